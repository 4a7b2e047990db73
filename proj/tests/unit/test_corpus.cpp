#include <doctest.h>

#include <fstream>
#include <map>

#include "fixtures.hpp"
#include "simq/corpus.hpp"

using namespace simq;
using simq::testing::TempDir;

namespace {

std::string record(QuestionId id, const std::string& text) {
  return R"({"id": )" + std::to_string(id) + R"(, "text": ")" + text + "\"}\n";
}

}  // namespace

TEST_CASE("ingest: empty file gives an empty corpus") {
  TempDir dir("ingest-empty");
  const auto path = dir.path / "empty.jsonl";
  std::ofstream(path).close();
  IngestReport rep;
  const auto c = ingest(path, {}, &rep);
  CHECK(c.size() == 0);
  CHECK(rep.accepted == 0);
  CHECK(rep.rejected == 0);
}

TEST_CASE("ingest: valid records pass through with ids preserved") {
  const auto c = ingest_text(record(4, "kid has fever") + record(9, "baby has cough") + record(2, "rash on arm"));
  REQUIRE(c.size() == 3);
  CHECK(c.questions()[0].id == 4);
  CHECK(c.questions()[1].id == 9);
  CHECK(c.questions()[2].id == 2);
  CHECK(c.at(9).text == "baby has cough");
  CHECK(c.at(2).category == kUnknownTag);
  CHECK(c.at(2).intention == kUnknownTag);
  CHECK(c.at(2).answered);
}

TEST_CASE("ingest: duplicate id names the id and both lines") {
  std::string text;
  for (QuestionId id : {1, 7, 3, 4, 5, 6, 8, 9, 7}) text += record(id, "question " + std::to_string(id));
  try {
    ingest_text(text);
    FAIL("expected a duplicate id error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("duplicate id 7") != std::string::npos);
    CHECK(msg.find("lines 2 and 9") != std::string::npos);
  }
}

TEST_CASE("ingest: malformed records are reported with their line number") {
  const std::string text = record(1, "ok") + "{not json\n" + R"({"id": 3})" + "\n" + R"({"id": -1, "text": "x"})" +
                           "\n" + record(5, "fine");
  IngestReport rep;
  const auto c = ingest_text(text, {}, &rep);
  CHECK(c.size() == 2);
  CHECK(rep.accepted == 2);
  CHECK(rep.rejected == 3);
  REQUIRE(rep.errors.size() == 3);
  CHECK(rep.errors[0].line == 2);
  CHECK(rep.errors[1].line == 3);
  CHECK(rep.errors[1].message.find("text") != std::string::npos);
  CHECK(rep.errors[2].line == 4);
}

TEST_CASE("ingest: tokenizer rejects empty questions") {
  IngestOptions opt;
  opt.tokenizer = make_tokenizer(TokenizeMode::whitespace, nullptr);
  IngestReport rep;
  const auto c = ingest_text(record(1, "kid has fever") + record(2, "  ?  "), opt, &rep);
  CHECK(c.size() == 1);
  CHECK(c.at(1).tokens == std::vector<std::string>{"kid", "has", "fever"});
  REQUIRE(rep.errors.size() == 1);
  CHECK(rep.errors[0].message.find("empty question") != std::string::npos);
}

TEST_CASE("corpus: lookup by id is exact and total") {
  const auto c = testing::synth_tokenized(300, 5);
  for (const auto& q : c.questions()) {
    REQUIRE(c.find(q.id) != nullptr);
    CHECK(c.at(q.id) == q);
    CHECK(c.categories().contains(q.category));
    CHECK(c.intentions().contains(q.intention));
  }
  CHECK(c.find(100000) == nullptr);
  CHECK_THROWS_AS(c.at(100000), DataError);
}

TEST_CASE("corpus: undeclared category is rejected") {
  Corpus c({"pediatrics"}, {"treatment"}, "test");
  Question q;
  q.id = 1;
  q.text = "x";
  q.category = "dentistry";
  q.intention = "treatment";
  CHECK_THROWS_AS(c.add(q), DataError);
  q.category = "pediatrics";
  c.add(q);
  CHECK_THROWS_AS(c.add(q), DataError);
}

TEST_CASE("corpus: write then ingest reproduces the corpus") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto c = testing::synth_tokenized(200, seed);
    CHECK(ingest_text(serialize_corpus(c)) == c);
  }
  TempDir dir("corpus-roundtrip");
  const auto c = testing::synth_tokenized(50, 8);
  write_corpus(c, dir.path / "c.jsonl");
  CHECK(ingest(dir.path / "c.jsonl") == c);
}

TEST_CASE("corpus: header declares the record count") {
  const auto c = testing::synth_tokenized(20, 1);
  auto text = serialize_corpus(c);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  CHECK_THROWS_WITH_AS(ingest_text(text), doctest::Contains("truncated corpus"), FormatError);
}

TEST_CASE("synth_corpus: n=1 yields one question from some template") {
  const auto c = synth_corpus(1, 77, testing::bank());
  REQUIRE(c.size() == 1);
  const auto& q = c.questions()[0];
  const auto tid = family_template(q.family);
  bool known = false;
  for (const auto& t : testing::bank().templates)
    if (t.id == tid) {
      known = true;
      CHECK(q.category == t.category);
      CHECK(q.intention == t.intention);
    }
  CHECK(known);
  CHECK_FALSE(q.text.empty());
}

TEST_CASE("synth_corpus: pure function of its arguments") {
  const auto a = serialize_corpus(synth_corpus(500, 42, testing::bank()));
  const auto b = serialize_corpus(synth_corpus(500, 42, testing::bank()));
  CHECK(a == b);
  CHECK(a != serialize_corpus(synth_corpus(500, 43, testing::bank())));
}

TEST_CASE("synth_corpus: template mix follows the bank weights") {
  const auto& bank = testing::bank();
  const auto c = synth_corpus(1000, 42, bank);
  REQUIRE(c.size() == 1000);
  std::map<std::string, std::size_t> counts;
  for (const auto& q : c.questions()) counts[std::string(family_template(q.family))]++;
  double total = 0;
  for (const auto& t : bank.templates) total += t.weight;
  for (const auto& t : bank.templates) {
    const double want = t.weight / total;
    const double got = static_cast<double>(counts[t.id]) / 1000.0;
    CAPTURE(t.id);
    CHECK(std::abs(got - want) <= 0.05);
  }
}

TEST_CASE("synth_corpus: bank errors") {
  TemplateBank empty;
  CHECK_THROWS_AS(synth_corpus(10, 1, empty), DataError);
  CHECK_THROWS_AS(synth_corpus(0, 1, testing::bank()), ArgumentError);
  CHECK_THROWS_AS(synth_corpus(1, 1, parse_template_bank(R"({"templates": []})")), DataError);
  CHECK_THROWS_AS(
      synth_corpus(1, 1, parse_template_bank(R"({"templates": [{"id": "t", "pattern": "has {NOPE}"}]})")),
      DataError);
}
