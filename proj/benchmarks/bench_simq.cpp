#include <benchmark/benchmark.h>

#include <algorithm>
#include <filesystem>
#include <memory>

#include "simq/corpus.hpp"
#include "simq/datagen.hpp"
#include "simq/embed.hpp"
#include "simq/encoder.hpp"
#include "simq/index.hpp"
#include "simq/text.hpp"

using namespace simq;

namespace {

struct World {
  TemplateBank bank;
  EntityDictionary entities;
  SynonymDictionary synonyms;
  RuleSet rules;
  Corpus corpus;
  InvertedIndex index;
  EmbeddingTable table;
  EncoderParams params;
  std::vector<TrainingPair> pairs;
};

const World& world() {
  static std::unique_ptr<World> w;
  if (w) return *w;
  w = std::make_unique<World>();
  const std::filesystem::path data = SIMQ_DATA_DIR;
  w->bank = load_template_bank(data / "bank.json");
  w->entities = bank_entities(w->bank);
  w->synonyms = bank_synonyms(w->bank);
  w->rules = RuleSet::load(data / "rules.jsonl");
  w->corpus = tokenize_corpus(synth_corpus(10000, 1, w->bank),
                              make_tokenizer(TokenizeMode::dictionary, &w->entities));
  w->index = InvertedIndex::build(w->corpus, w->entities, w->rules);
  w->table = init_embeddings(build_vocab(w->corpus, 1), 32, 1);
  EncoderConfig ec;
  ec.hidden_dim = 32;
  w->params = init_params(32, ec);
  GenConfig gc;
  w->pairs = generate(w->corpus, 8, w->synonyms, w->entities, gc);
  return *w;
}

std::vector<QuestionId> scan(const World& w, const Question& q) {
  const auto keys = extract_keywords(q, w.entities, w.rules);
  std::vector<QuestionId> out;
  for (const auto& c : w.corpus.questions()) {
    if (!c.answered || c.category != q.category || c.intention != q.intention) continue;
    const auto mine = extract_keywords(c, w.entities, w.rules);
    if (std::any_of(keys.begin(), keys.end(),
                    [&](const auto& k) { return std::find(mine.begin(), mine.end(), k) != mine.end(); }))
      out.push_back(c.id);
  }
  return out;
}

void bm_encode(benchmark::State& state) {
  const auto& w = world();
  const auto len = static_cast<std::size_t>(state.range(0));
  std::vector<std::string> toks;
  for (const auto& q : w.corpus.questions())
    for (const auto& t : q.tokens)
      if (toks.size() < len) toks.push_back(t);
  for (auto _ : state) benchmark::DoNotOptimize(encode(toks, w.table, w.params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(bm_encode)->Arg(8)->Arg(32)->Arg(64);

void bm_retrieve_index(benchmark::State& state) {
  const auto& w = world();
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& q = w.corpus.questions()[k++ % w.corpus.size()];
    benchmark::DoNotOptimize(retrieve(q, w.entities, w.rules, w.index));
  }
}
BENCHMARK(bm_retrieve_index);

void bm_retrieve_scan(benchmark::State& state) {
  const auto& w = world();
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& q = w.corpus.questions()[k++ % w.corpus.size()];
    benchmark::DoNotOptimize(scan(w, q));
  }
}
BENCHMARK(bm_retrieve_scan);

void bm_train_step(benchmark::State& state) {
  const auto& w = world();
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(state.range(0)), w.pairs.size());
  const std::span<const TrainingPair> batch(w.pairs.data(), n);
  for (auto _ : state) benchmark::DoNotOptimize(grad(batch, w.table, w.params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(bm_train_step)->Arg(1)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
