#include <doctest.h>

#include <algorithm>
#include <limits>

#include "fixtures.hpp"
#include "simq/datagen.hpp"
#include "simq/pipeline.hpp"

using namespace simq;

namespace {

struct SmallModel {
  Engine engine;
  Vocabulary vocab;
};

const SmallModel& small_model() {
  static const SmallModel m = [] {
    SmallModel s;
    auto& e = s.engine;
    e.corpus = testing::synth_tokenized(400, 61);
    e.entities = testing::bank_entity_dict();
    e.synonyms = testing::bank_synonym_dict();
    e.rules = RuleSet::load(testing::data_dir() / "rules.jsonl");
    s.vocab = build_vocab(e.corpus, 1);
    SkipGramConfig sg;
    sg.dim = 8;
    sg.epochs = 2;
    e.table = train_skipgram(e.corpus, s.vocab, sg).table;
    const auto pairs = generate(e.corpus, e.corpus.size(), e.synonyms, e.entities, GenConfig{});
    EncoderConfig ec;
    ec.hidden_dim = 8;
    ec.epochs = 4;
    ec.lr = 0.1;
    e.params = train(pairs, e.table, ec).params;
    e.index = InvertedIndex::build(e.corpus, e.entities, e.rules);
    e.vectors = precompute_vectors(e.corpus, e.table, e.params);
    return s;
  }();
  return m;
}

QueryOptions open_options(const Question& q) {
  QueryOptions o;
  o.k = 1000;
  o.threshold = -std::numeric_limits<double>::infinity();
  o.category = q.category;
  o.intention = q.intention;
  return o;
}

}  // namespace

TEST_CASE("precompute_vectors: agrees with fresh encoding") {
  const auto& e = small_model().engine;
  CHECK(precompute_vectors(Corpus{}, e.table, e.params).empty());
  CHECK(e.vectors.size() == e.corpus.size());
  CHECK(e.vectors.dim() == e.params.hidden_dim());
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto& q = e.corpus.questions()[rng.index(e.corpus.size())];
    REQUIRE(e.vectors.find(q.id));
    CHECK(*e.vectors.find(q.id) == encode(q.tokens, e.table, e.params));
  }
}

TEST_CASE("vector cache: file round trip and corruption") {
  const auto& e = small_model().engine;
  const auto bytes = e.vectors.serialize();
  CHECK(VectorCache::parse(bytes) == e.vectors);
  CHECK_THROWS_WITH_AS(VectorCache::parse(bytes.substr(0, bytes.size() - 1)), "unexpected end of vector cache file",
                       FormatError);
  auto v3 = bytes;
  v3.replace(v3.find("v1"), 2, "v3");
  CHECK_THROWS_WITH_AS(VectorCache::parse(v3), doctest::Contains("unsupported version"), FormatError);
  VectorCache c(2);
  CHECK_THROWS_AS(c.put(1, QuestionVector{Eigen::VectorXd::Zero(3)}), ArgumentError);
}

TEST_CASE("query: results are the independently sorted candidate scores") {
  const auto& e = small_model().engine;
  Rng rng(2);
  for (int k = 0; k < 30; ++k) {
    const auto& src = e.corpus.questions()[rng.index(e.corpus.size())];
    const auto opts = open_options(src);
    const auto got = query(e, src.text, opts);
    Question q = src;
    q.tokens = e.tokenize(src.text);
    const auto cands = retrieve(q, e.entities, e.rules, e.index);
    const auto qv = encode(q.tokens, e.table, e.params);
    std::vector<RankedResult> want;
    for (auto id : cands.ids) want.push_back({id, similarity(qv, encode(e.corpus.at(id).tokens, e.table, e.params)), 0});
    std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    for (std::size_t r = 0; r < want.size(); ++r) want[r].rank = r + 1;
    CHECK(got == want);
    CHECK(query(e, src.text, opts) == got);
  }
}

TEST_CASE("query: threshold and k") {
  const auto& e = small_model().engine;
  const auto& src = e.corpus.questions()[3];
  auto opts = open_options(src);
  const auto all = query(e, src.text, opts);
  REQUIRE(all.size() > 5);

  opts.threshold = std::numeric_limits<double>::infinity();
  CHECK(query(e, src.text, opts).empty());

  opts.threshold = all[all.size() / 2].score;
  const auto top = query(e, src.text, opts);
  for (const auto& r : top) CHECK(r.score >= opts.threshold);
  CHECK(top.size() >= all.size() / 2);

  QueryOptions defaults;
  defaults.category = src.category;
  defaults.intention = src.intention;
  const auto five = query(e, src.text, defaults);
  CHECK(five.size() <= 5);
  for (const auto& r : five) CHECK(r.score >= 0.5);

  CHECK(query(e, "my child is very happy today", QueryOptions{}).empty());
  CHECK_THROWS_AS(query(e, "  ", QueryOptions{}), ArgumentError);
}

TEST_CASE("query: an exact duplicate scores its squared norm and ranks first under cosine") {
  const auto& e = small_model().engine;
  Rng rng(3);
  std::size_t first = 0, n = 0;
  for (int k = 0; k < 100; ++k) {
    const auto& src = e.corpus.questions()[rng.index(e.corpus.size())];
    if (!src.answered) continue;
    auto opts = open_options(src);
    const auto raw = query(e, src.text, opts);
    const auto self = std::find_if(raw.begin(), raw.end(), [&](const auto& r) { return r.id == src.id; });
    REQUIRE(self != raw.end());
    CHECK(self->score == doctest::Approx(e.vectors.find(src.id)->v.squaredNorm()).epsilon(1e-12));
    opts.cosine = true;
    const auto cos = query(e, src.text, opts);
    ++n;
    // identical texts elsewhere in the corpus tie at 1
    first += !cos.empty() && (cos[0].id == src.id || cos[0].score == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(first == n);
}

TEST_CASE("query: dimension mismatch between table and model") {
  auto e = small_model().engine;
  e.params = EncoderParams(e.table.dim() + 1, 4);
  CHECK_THROWS_AS(query(e, e.corpus.questions()[0].text, QueryOptions{}), DataError);
}

TEST_CASE("engine directory: assemble, load and query") {
  const auto& m = small_model();
  const auto& e = m.engine;
  testing::TempDir dir("engine");
  const auto src = dir.path / "src";
  std::filesystem::create_directories(src);
  write_corpus(e.corpus, src / "corpus.jsonl");
  m.vocab.save(src / "vocab.txt");
  e.table.save(src / "emb.txt");
  save_params(e.params, src / "model.bin");
  e.index.save(src / "index.bin");
  write_file_atomic(src / "entities.tsv", e.entities.serialize());
  write_file_atomic(src / "synonyms.tsv", e.synonyms.serialize());
  std::filesystem::copy_file(testing::data_dir() / "rules.jsonl", src / "rules.jsonl");

  EngineSources s{src / "corpus.jsonl", src / "vocab.txt", src / "emb.txt", src / "model.bin",
                  src / "index.bin",    src / "rules.jsonl", src / "entities.tsv", src / "synonyms.tsv"};
  const auto manifest = assemble_engine(dir.path / "engine", s);
  CHECK(manifest.input_dim == e.table.dim());
  CHECK(manifest.hidden_dim == e.params.hidden_dim());
  CHECK(EngineManifest::parse(manifest.serialize()).files == manifest.files);

  const auto loaded = load_engine(dir.path / "engine");
  CHECK(loaded.vectors == e.vectors);
  CHECK(loaded.index == e.index);
  CHECK(loaded.params == e.params);
  for (int k = 0; k < 10; ++k) {
    const auto& q = e.corpus.questions()[static_cast<std::size_t>(k) * 7];
    CHECK(query(loaded, q.text, open_options(q)) == query(e, q.text, open_options(q)));
  }

  auto bad = s;
  bad.model.clear();
  CHECK_THROWS_WITH_AS(assemble_engine(dir.path / "other", bad), "engine: model file is required", DataError);
  std::filesystem::remove(dir.path / "engine" / "manifest.json");
  CHECK_THROWS_AS(load_engine(dir.path / "engine"), DataError);
}

TEST_CASE("engine manifest: magic and version") {
  EngineManifest m;
  m.input_dim = 3;
  m.hidden_dim = 4;
  m.files["corpus"] = "corpus.jsonl";
  const auto text = m.serialize();
  CHECK(EngineManifest::parse(text).hidden_dim == 4);
  auto v2 = text;
  v2.replace(v2.find("\"version\": 1"), 12, "\"version\": 2");
  CHECK_THROWS_WITH_AS(EngineManifest::parse(v2), doctest::Contains("unsupported version"), FormatError);
  auto magic = text;
  magic.replace(magic.find("SIMQ-ENGINE"), 11, "SIMQ-ENGINX");
  CHECK_THROWS_WITH_AS(EngineManifest::parse(magic), doctest::Contains("bad magic"), FormatError);
}
