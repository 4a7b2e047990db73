#include <doctest.h>

#include <algorithm>
#include <map>

#include "fixtures.hpp"
#include "simq/text.hpp"

using namespace simq;

namespace {

EntityDictionary small_dict() {
  return EntityDictionary::parse(
      "pink eye\tpink eye\tdisease\n"
      "bloodshot eyes\tbloodshot eyes\tsymptom\n"
      "red eyes\tbloodshot eyes\tsymptom\n"
      "head\thead\tbody-part\n"
      "headache\theadache\tsymptom\n"
      "pink\tpink\tother\n");
}

Corpus token_corpus(const std::vector<std::vector<std::string>>& docs) {
  Corpus c;
  QuestionId id = 1;
  for (const auto& d : docs) {
    Question q;
    q.id = id++;
    q.text = "x";
    q.tokens = d;
    c.add(q);
  }
  return c;
}

}  // namespace

TEST_CASE("tokenize: whitespace mode") {
  CHECK(tokenize("kid has fever", TokenizeMode::whitespace) == std::vector<std::string>{"kid", "has", "fever"});
  CHECK(tokenize("  a  ", TokenizeMode::whitespace) == std::vector<std::string>{"a"});
  CHECK(tokenize("Kid has FEVER?", TokenizeMode::whitespace) == std::vector<std::string>{"kid", "has", "fever"});
}

TEST_CASE("tokenize: dictionary mode merges the longest entity") {
  const auto d = small_dict();
  CHECK(tokenize("kid has pink eye", TokenizeMode::dictionary, &d) ==
        std::vector<std::string>{"kid", "has", "pink eye"});
  CHECK(tokenize("pink shirt", TokenizeMode::dictionary, &d) == std::vector<std::string>{"pink", "shirt"});
  CHECK(tokenize("headache", TokenizeMode::dictionary, &d) == std::vector<std::string>{"headache"});
}

TEST_CASE("tokenize: unsegmented text uses the dictionary, then single characters") {
  const auto d = EntityDictionary::parse("吐奶\tvomit milk\tsymptom\n");
  const auto t = tokenize("52天女婴频繁吐奶，怎么办？", TokenizeMode::dictionary, &d);
  CHECK(std::find(t.begin(), t.end(), "吐奶") != t.end());
  CHECK(std::find(t.begin(), t.end(), "频") != t.end());
  CHECK(std::find(t.begin(), t.end(), "52") != t.end());
}

TEST_CASE("tokenize: empty question") {
  CHECK_THROWS_WITH_AS(tokenize("   ", TokenizeMode::whitespace), "empty question", ArgumentError);
  CHECK_THROWS_WITH_AS(tokenize("", TokenizeMode::dictionary), "empty question", ArgumentError);
}

TEST_CASE("tokenize: idempotent on joined token lists") {
  const auto c = testing::synth_tokenized(200, 4);
  for (const auto& q : c.questions()) {
    const auto ts = tokenize(q.text, TokenizeMode::whitespace);
    std::string joined;
    for (const auto& t : ts) joined += (joined.empty() ? "" : " ") + t;
    CHECK(tokenize(joined, TokenizeMode::whitespace) == ts);
    std::string joined_entities;
    for (const auto& t : q.tokens) joined_entities += (joined_entities.empty() ? "" : " ") + t;
    CHECK(tokenize(joined_entities, TokenizeMode::dictionary, &testing::bank_entity_dict()) == q.tokens);
  }
}

TEST_CASE("build_vocab: min_count thresholds") {
  const auto c = token_corpus({{"a", "a", "b"}, {"a"}});
  const auto v1 = build_vocab(c, 1);
  CHECK(v1.size() == 3);
  CHECK(v1.token(0) == Vocabulary::kUnk);
  CHECK(v1.token(1) == "a");
  CHECK(v1.token(2) == "b");
  const auto v2 = build_vocab(c, 2);
  CHECK(v2.size() == 2);
  CHECK(v2.contains("a"));
  CHECK_FALSE(v2.contains("b"));
  CHECK(v2.index_of("b") == Vocabulary::kUnkIndex);
  CHECK(v2.frequency(Vocabulary::kUnkIndex) == 1);
}

TEST_CASE("build_vocab: size matches an independent frequency scan") {
  const auto c = testing::synth_tokenized(1000, 7);
  std::map<std::string, std::size_t> freq;
  for (const auto& q : c.questions())
    for (const auto& t : q.tokens) freq[t]++;
  std::size_t kept = 0;
  for (const auto& [t, n] : freq) kept += n >= 5;
  const auto v = build_vocab(c, 5);
  CHECK(v.size() == kept + 1);
  for (const auto& [t, n] : freq) CHECK(v.contains(t) == (n >= 5));
}

TEST_CASE("build_vocab: ordering is frequency desc then lexicographic, and stable") {
  const auto c = testing::synth_tokenized(500, 9);
  const auto v = build_vocab(c, 2);
  CHECK(v == build_vocab(c, 2));
  for (std::size_t i = 2; i < v.size(); ++i) {
    const bool ordered =
        v.frequency(i - 1) > v.frequency(i) || (v.frequency(i - 1) == v.frequency(i) && v.token(i - 1) < v.token(i));
    CHECK(ordered);
  }
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index_of(v.token(i)) == i);
}

TEST_CASE("build_vocab: corpus without tokens") {
  CHECK_THROWS_AS(build_vocab(token_corpus({{}}), 1), DataError);
}

TEST_CASE("vocabulary: text round trip") {
  const auto v = build_vocab(testing::synth_tokenized(200, 2), 1);
  CHECK(Vocabulary::parse(v.serialize()) == v);
}

TEST_CASE("find_entities: examples") {
  const auto d = small_dict();
  CHECK(find_entities(std::vector<std::string>{"kid", "has", "fever"}, d).empty());

  const std::vector<std::string> ts{"my", "son", "got", "bloodshot eyes", "did", "he", "have", "the", "pink eye"};
  const auto m = find_entities(ts, d);
  REQUIRE(m.size() == 2);
  CHECK(m[0].entity.canonical_id == "bloodshot eyes");
  CHECK(m[0].entity.type == EntityType::symptom);
  CHECK(m[1].entity.canonical_id == "pink eye");
  CHECK(m[1].entity.type == EntityType::disease);

  const auto h = find_entities(std::vector<std::string>{"headache"}, d);
  REQUIRE(h.size() == 1);
  CHECK(h[0].entity.canonical_id == "headache");

  // multi-token span beats its single-token prefix
  const auto p = find_entities(std::vector<std::string>{"pink", "eye", "again"}, d);
  REQUIRE(p.size() == 1);
  CHECK(p[0].begin == 0);
  CHECK(p[0].end == 2);
  CHECK(p[0].entity.canonical_id == "pink eye");
}

TEST_CASE("find_entities: spans never overlap and are sorted") {
  const auto& d = testing::bank_entity_dict();
  const auto c = synth_corpus(300, 12, testing::bank());
  for (const auto& q : c.questions()) {
    const auto ts = tokenize(q.text, TokenizeMode::whitespace);
    const auto m = find_entities(ts, d);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(m[i].begin < m[i].end);
      CHECK(m[i].end <= ts.size());
      if (i > 0) CHECK(m[i - 1].end <= m[i].begin);
    }
  }
}

TEST_CASE("entity dictionary: file round trip and bad types") {
  const auto d = small_dict();
  CHECK(EntityDictionary::parse(d.serialize()).entries() == d.entries());
  CHECK(d.lookup("red eyes")->canonical_id == "bloodshot eyes");
  CHECK_THROWS_AS(EntityDictionary::parse("x\ty\tgene\n"), DataError);
}

TEST_CASE("synonym dictionary: groups are disjoint") {
  SynonymDictionary s;
  s.add_group({"child", "kid", "baby"});
  s.add_group({"doctor", "physician"});
  CHECK(s.group_of("kid") == s.group_of("baby"));
  CHECK(s.group_of("doctor") != s.group_of("kid"));
  CHECK_FALSE(s.group_of("fever"));
  CHECK_THROWS_AS(s.add_group({"toddler", "kid"}), DataError);
  CHECK(SynonymDictionary::parse(s.serialize()).serialize() == s.serialize());

  const auto& bank = testing::bank_synonym_dict();
  std::map<std::string, std::size_t> owner;
  for (std::size_t g = 0; g < bank.size(); ++g)
    for (const auto& f : bank.group(g)) {
      CHECK_FALSE(owner.contains(f));
      owner[f] = g;
      CHECK(bank.group_of(f) == g);
    }
}
