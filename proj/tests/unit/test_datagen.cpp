#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "simq/datagen.hpp"

using namespace simq;

namespace {

Question question(QuestionId id, std::vector<std::string> tokens) {
  Question q;
  q.id = id;
  q.text = "x";
  q.tokens = std::move(tokens);
  return q;
}

std::vector<std::string> words(std::string_view s) { return tokenize(s, TokenizeMode::whitespace); }

// Every token of `derived` maps, in order, onto a token of `source` that is
// equal to it or a synonym of it.
bool derivable(const std::vector<std::string>& source, const std::vector<std::string>& derived,
               const SynonymDictionary& syn) {
  std::size_t j = 0;
  for (const auto& t : derived) {
    bool found = false;
    while (j < source.size() && !found) {
      const auto& s = source[j++];
      const auto g = syn.group_of(s);
      found = s == t || (g && g == syn.group_of(t));
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gen_positive: no-op configuration") {
  GenConfig cfg;
  cfg.replace_prob = 0.0;
  cfg.drop_prob = 0.0;
  Rng rng(1);
  const auto ts = words("my baby has a cold what can i do");
  CHECK(gen_positive(ts, testing::bank_synonym_dict(), testing::bank_entity_dict(), cfg, rng) == ts);
}

TEST_CASE("gen_positive: entities survive certain dropping") {
  const auto ents = EntityDictionary::parse("fever\tfever\tsymptom\n");
  GenConfig cfg;
  cfg.drop_prob = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    CHECK(gen_positive(words("kid has fever"), SynonymDictionary{}, ents, cfg, rng) ==
          std::vector<std::string>{"fever"});
  }
  // nothing protected: one token is kept
  Rng rng(3);
  CHECK(gen_positive(words("kid has fever"), SynonymDictionary{}, EntityDictionary{}, cfg, rng).size() == 1);
}

TEST_CASE("gen_positive: the replace-and-drop example is reachable") {
  // "My baby has a cold with nose keeping flowing. What can I do?" ->
  // "Kid has a cold with runny nose. What can do?"
  const auto ents = EntityDictionary::parse(
      "cold\tcold\tdisease\nnose keeping flowing\trunny nose\tsymptom\nrunny nose\trunny nose\tsymptom\n");
  SynonymDictionary syn;
  syn.add_group({"baby", "kid", "child"});
  syn.add_group({"nose keeping flowing", "runny nose"});
  const auto src =
      tokenize("My baby has a cold with nose keeping flowing. What can I do?", TokenizeMode::dictionary, &ents);
  REQUIRE(src.size() == 11);
  const auto want = tokenize("Kid has a cold with runny nose. What can do?", TokenizeMode::dictionary, &ents);
  GenConfig cfg;
  bool reached = false;
  for (std::uint64_t seed = 1; seed <= 200000 && !reached; ++seed) {
    Rng rng(seed);
    reached = gen_positive(src, syn, ents, cfg, rng) == want;
  }
  CHECK(reached);
}

TEST_CASE("gen_positive: output is derivable, non-empty and keeps every entity") {
  const auto c = testing::synth_tokenized(500, 21);
  const auto& syn = testing::bank_synonym_dict();
  const auto& ents = testing::bank_entity_dict();
  GenConfig cfg;
  cfg.drop_prob = 0.3;
  for (const auto& q : c.questions()) {
    Rng rng(Rng::derive(5, q.id));
    const auto out = gen_positive(q.tokens, syn, ents, cfg, rng);
    CHECK_FALSE(out.empty());
    CHECK(derivable(q.tokens, out, syn));
    CHECK(entity_ids(out, ents) == entity_ids(q.tokens, ents));
  }
}

TEST_CASE("gen_negative: examples") {
  const auto ents = EntityDictionary::parse("fever\tfever\tsymptom\ncough\tcough\tsymptom\n");
  Corpus c;
  c.add(question(1, words("kid is sad")));
  c.add(question(2, words("kid has fever")));
  c.add(question(3, words("kid has cough")));

  // no entities: the first sampled question other than the anchor
  Rng replay(9);
  std::size_t first = replay.index(3);
  while (c.questions()[first].id == 1) first = replay.index(3);
  Rng rng(9);
  CHECK(gen_negative(c.at(1), c, ents, rng).id == c.questions()[first].id);

  Corpus shared;
  shared.add(question(1, words("kid has fever")));
  shared.add(question(2, words("fever again")));
  Rng r2(1);
  CHECK_THROWS_WITH_AS(gen_negative(shared.at(1), shared, ents, r2, 50),
                       doctest::Contains("no entity-disjoint negative found"), DataError);
  Corpus lonely;
  lonely.add(question(1, words("kid has fever")));
  CHECK_THROWS_AS(gen_negative(lonely.at(1), lonely, ents, r2), DataError);
}

TEST_CASE("gen_negative: sampled negatives never share an entity") {
  const auto c = testing::synth_tokenized(1000, 31);
  const auto& ents = testing::bank_entity_dict();
  Rng rng(4);
  std::size_t shared = 0;
  for (int k = 0; k < 3000; ++k) {
    const auto& anchor = c.questions()[rng.index(c.size())];
    const auto& neg = gen_negative(anchor, c, ents, rng);
    CHECK(neg.id != anchor.id);
    const auto a = entity_ids(anchor.tokens, ents);
    const auto b = entity_ids(neg.tokens, ents);
    std::vector<std::string> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    shared += !both.empty();
  }
  CHECK(shared == 0);
}

TEST_CASE("generate: counts and labels") {
  const auto c = testing::synth_tokenized(100, 41);
  const auto& syn = testing::bank_synonym_dict();
  const auto& ents = testing::bank_entity_dict();
  GenConfig cfg;
  const auto one = generate(c, 1, syn, ents, cfg);
  REQUIRE(one.size() == 4);
  CHECK(one[0].y == 1);
  CHECK(one[1].y == 0);
  CHECK(one[2].y == 0);
  CHECK(one[3].y == 0);
  for (const auto& p : one) CHECK(p.anchor_id == one[0].anchor_id);

  CHECK(generate(c, 0, syn, ents, cfg).empty());
  static_assert(pair_count(865945, 3) == 3463780);
  CHECK(generate(c, 37, syn, ents, cfg).size() == pair_count(37, 3));
  CHECK_THROWS_AS(generate(c, 101, syn, ents, cfg), DataError);
  cfg.replace_prob = 1.5;
  CHECK_THROWS_AS(generate(c, 1, syn, ents, cfg), ArgumentError);
}

TEST_CASE("generate: anchors without replacement, deterministic") {
  const auto c = testing::synth_tokenized(300, 42);
  const auto& syn = testing::bank_synonym_dict();
  const auto& ents = testing::bank_entity_dict();
  GenConfig cfg;
  cfg.seed = 8;
  const auto a = generate(c, 150, syn, ents, cfg);
  CHECK(a == generate(c, 150, syn, ents, cfg));
  std::set<QuestionId> anchors;
  for (std::size_t k = 0; k < a.size(); k += 4) anchors.insert(a[k].anchor_id);
  CHECK(anchors.size() == 150);
  cfg.seed = 9;
  CHECK_FALSE(a == generate(c, 150, syn, ents, cfg));
}

TEST_CASE("pair file: round trip") {
  const auto c = testing::synth_tokenized(50, 43);
  const auto pairs = generate(c, 20, testing::bank_synonym_dict(), testing::bank_entity_dict(), GenConfig{});
  CHECK(parse_pairs(serialize_pairs(pairs)) == pairs);
  CHECK_THROWS_AS(parse_pairs(R"({"q": ["a"], "q_prime": [], "y": 1, "anchor_id": 1})"), DataError);
  CHECK_THROWS_AS(parse_pairs(R"({"q": ["a"], "q_prime": ["b"], "y": 2, "anchor_id": 1})"), DataError);
}
