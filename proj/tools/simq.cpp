#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "simq/corpus.hpp"
#include "simq/datagen.hpp"
#include "simq/embed.hpp"
#include "simq/encoder.hpp"
#include "simq/eval.hpp"
#include "simq/index.hpp"
#include "simq/pipeline.hpp"
#include "simq/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stage {
 public:
  explicit Stage(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  template <typename... Args>
  void info(fmt::format_string<Args...> f, Args&&... args) const {
    spdlog::info("[{}] {} ({:.2f}s)", name_, fmt::format(f, std::forward<Args>(args)...), seconds());
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void setup_logging(bool quiet) {
  auto logger = spdlog::stderr_color_mt("simq");
  logger->set_pattern("%H:%M:%S %^%l%$ %v");
  spdlog::set_default_logger(logger);
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("SIMQ_LOG")) {
    std::string v = env;
    if (v == "error") level = spdlog::level::err;
    else if (v == "debug") level = spdlog::level::debug;
  }
  if (quiet) level = spdlog::level::err;
  spdlog::set_level(level);
}

simq::TokenizeMode parse_mode(const std::string& s) {
  if (s == "whitespace") return simq::TokenizeMode::whitespace;
  if (s == "dictionary") return simq::TokenizeMode::dictionary;
  throw simq::ArgumentError("unknown tokenizer '" + s + "'");
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  fs::path input, out, entities;
  std::string tokenizer = "dictionary";
};

void run_ingest(const IngestArgs& a) {
  Stage st("ingest");
  simq::EntityDictionary ents;
  if (!a.entities.empty()) ents = simq::EntityDictionary::load(a.entities);
  simq::IngestOptions opts;
  opts.tokenizer = simq::make_tokenizer(parse_mode(a.tokenizer), &ents);
  simq::IngestReport report;
  const auto corpus = simq::ingest(a.input, opts, &report);
  for (const auto& e : report.errors) spdlog::warn("[ingest] line {}: {}", e.line, e.message);
  simq::write_corpus(corpus, a.out);
  st.info("accepted={} rejected={} -> {}", report.accepted, report.rejected, a.out.string());
}

// --- synth-corpus -----------------------------------------------------------

struct SynthArgs {
  fs::path bank, out, dicts_out;
  std::size_t n = 2000;
  std::uint64_t seed = 1;
};

void run_synth(const SynthArgs& a) {
  Stage st("synth-corpus");
  const auto bank = simq::load_template_bank(a.bank);
  const auto ents = simq::bank_entities(bank);
  auto corpus = simq::synth_corpus(a.n, a.seed, bank);
  corpus = simq::tokenize_corpus(corpus, simq::make_tokenizer(simq::TokenizeMode::dictionary, &ents));
  simq::write_corpus(corpus, a.out);
  if (!a.dicts_out.empty()) {
    fs::create_directories(a.dicts_out);
    simq::write_file_atomic(a.dicts_out / "entities.tsv", ents.serialize());
    simq::write_file_atomic(a.dicts_out / "synonyms.tsv", simq::bank_synonyms(bank).serialize());
  }
  st.info("questions={} -> {}", corpus.size(), a.out.string());
}

// --- build-vocab ------------------------------------------------------------

struct VocabArgs {
  fs::path corpus, out;
  std::size_t min_count = 1;
};

void run_vocab(const VocabArgs& a) {
  Stage st("build-vocab");
  const auto vocab = simq::build_vocab(simq::ingest(a.corpus), a.min_count);
  vocab.save(a.out);
  st.info("tokens={} min_count={} -> {}", vocab.size(), a.min_count, a.out.string());
}

// --- train-embeddings -------------------------------------------------------

struct EmbedArgs {
  fs::path corpus, vocab, out;
  simq::SkipGramConfig config;
};

void run_embeddings(const EmbedArgs& a) {
  Stage st("train-embeddings");
  const auto corpus = simq::ingest(a.corpus);
  const auto vocab = simq::Vocabulary::load(a.vocab);
  auto result = simq::train_skipgram(corpus, vocab, a.config);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    spdlog::debug("[train-embeddings] epoch {} loss {:.5f}", e + 1, result.epoch_loss[e]);
  result.table.save(a.out);
  st.info("vocab={} dim={} final_loss={:.5f} -> {}", vocab.size(), a.config.dim,
          result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(), a.out.string());
}

// --- generate-pairs ---------------------------------------------------------

struct PairsArgs {
  fs::path corpus, entities, synonyms, out;
  std::optional<std::size_t> anchors;
  simq::GenConfig config;
};

void run_pairs(const PairsArgs& a) {
  Stage st("generate-pairs");
  const auto corpus = simq::ingest(a.corpus);
  const auto ents = simq::EntityDictionary::load(a.entities);
  simq::SynonymDictionary syn;
  if (!a.synonyms.empty()) syn = simq::SynonymDictionary::load(a.synonyms);
  const auto pairs = simq::generate(corpus, a.anchors.value_or(corpus.size()), syn, ents, a.config);
  simq::write_pairs(pairs, a.out);
  st.info("pairs={} -> {}", pairs.size(), a.out.string());
}

// --- train-encoder ----------------------------------------------------------

struct EncoderArgs {
  fs::path pairs, embeddings, out, embeddings_out;
  simq::EncoderConfig config;
};

void run_encoder(const EncoderArgs& a) {
  Stage st("train-encoder");
  const auto pairs = simq::read_pairs(a.pairs);
  const auto table = simq::EmbeddingTable::load(a.embeddings);
  auto result = simq::train(pairs, table, a.config, [](const simq::EpochStats& e) {
    spdlog::info("[train-encoder] epoch {} loss {:.5f} ({:.2f}s)", e.epoch, e.loss, e.seconds);
  });
  simq::save_params(result.params, a.out);
  if (result.table) result.table->save(a.embeddings_out.empty() ? a.embeddings : a.embeddings_out);
  st.info("pairs={} initial_loss={:.5f} final_loss={:.5f} -> {}", pairs.size(), result.initial_loss,
          result.final_loss, a.out.string());
}

// --- index ------------------------------------------------------------------

struct IndexArgs {
  fs::path corpus, entities, rules, out;
};

void run_index(const IndexArgs& a) {
  Stage st("index");
  const auto corpus = simq::ingest(a.corpus);
  const auto ents = simq::EntityDictionary::load(a.entities);
  simq::RuleSet rules;
  if (!a.rules.empty()) rules = simq::RuleSet::load(a.rules);
  const auto idx = simq::InvertedIndex::build(corpus, ents, rules);
  idx.save(a.out);
  st.info("keys={} -> {}", idx.size(), a.out.string());
}

// --- precompute -------------------------------------------------------------

struct PrecomputeArgs {
  fs::path engine;
  simq::EngineSources sources;
  std::size_t max_length = simq::kDefaultMaxLength;
};

void run_precompute(const PrecomputeArgs& a) {
  Stage st("precompute");
  json echo = {{"max_length", a.max_length}};
  const auto m = simq::assemble_engine(a.engine, a.sources, a.max_length, echo.dump());
  st.info("engine={} dims={}x{} files={}", a.engine.string(), m.input_dim, m.hidden_dim, m.files.size());
}

// --- query ------------------------------------------------------------------

struct QueryArgs {
  fs::path engine, input;
  std::string text;
  std::optional<simq::QuestionId> query_id;
  std::string format = "text";
  simq::QueryOptions options;
};

void print_results(const simq::QueryResults& qr, const simq::Engine& engine, const std::string& format) {
  if (format == "jsonl") {
    std::cout << simq::serialize_results(std::span(&qr, 1));
    return;
  }
  if (qr.results.empty()) std::cout << "(no similar questions)\n";
  for (const auto& r : qr.results) {
    const auto* q = engine.corpus.find(r.id);
    std::cout << r.rank << "\t" << r.id << "\t" << fmt::format("{:.4f}", r.score) << "\t"
              << (q ? q->text : std::string()) << "\n";
  }
}

void run_query(const QueryArgs& a) {
  Stage st("query");
  const auto engine = simq::load_engine(a.engine);
  std::size_t n = 0;
  if (!a.input.empty()) {
    const auto text = simq::read_file(a.input);
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      auto line = std::string_view(text).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      pos = nl == std::string::npos ? text.size() : nl + 1;
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw simq::DataError("query file line " + std::to_string(line_no) + ": " + e.what());
      }
      auto opts = a.options;
      opts.category = j.value("category", opts.category);
      opts.intention = j.value("intention", opts.intention);
      simq::QueryResults qr;
      qr.query_id = j.value("query_id", simq::QuestionId{line_no});
      qr.results = simq::query(engine, j.at("text").get<std::string>(), opts);
      print_results(qr, engine, a.format);
      ++n;
    }
  } else if (a.query_id && a.text.empty()) {
    // re-query a corpus question, excluding itself
    const auto& q = engine.corpus.at(*a.query_id);
    auto ropts = a.options.retrieve;
    const auto cands = simq::retrieve(q, engine.entities, engine.rules, engine.index, ropts, q.id);
    simq::QueryResults qr{q.id, {}};
    if (!cands.ids.empty())
      qr.results = simq::rank_candidates(engine, simq::encode(q.tokens, engine.table, engine.params, engine.max_length),
                                         cands.ids, a.options);
    print_results(qr, engine, a.format);
    n = 1;
  } else {
    if (a.text.empty()) throw simq::ArgumentError("query needs --text, --input or --query-id");
    simq::QueryResults qr{a.query_id.value_or(0), simq::query(engine, a.text, a.options)};
    print_results(qr, engine, a.format);
    n = 1;
  }
  st.info("queries={}", n);
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  fs::path engine, labels, results, hist_out;
};

void run_eval(const EvalArgs& a) {
  Stage st("eval");
  if (!a.engine.empty()) simq::load_engine(a.engine);
  const auto labels = simq::LabelSet::load(a.labels);
  const auto results = simq::read_results(a.results);

  std::cout << "pairs labeled: " << labels.size() << " (rejected labels dropped: " << labels.rejected() << ")\n";
  std::cout << fmt::format("precision: {:.4f}\n", simq::precision(labels, results));

  const auto hist = simq::label_histogram(labels);
  std::size_t peak = 1;
  for (auto c : hist) peak = std::max(peak, c);
  std::cout << "similar-label histogram:\n";
  std::string data = "bin_lo\tbin_hi\tcount\n";
  for (std::size_t b = 0; b < hist.size(); ++b) {
    const auto bar = std::string(hist[b] * 40 / peak, '#');
    std::cout << fmt::format("  [{:3d}%,{:3d}%{} {:6d} {}\n", b * 10, b * 10 + 10, b == 9 ? "]" : ")", hist[b], bar);
    data += fmt::format("{}\t{}\t{}\n", b * 10, b * 10 + 10, hist[b]);
  }
  if (!a.hist_out.empty()) simq::write_file_atomic(a.hist_out, data);

  const auto corr = simq::rank_correlations(labels, results);
  std::cout << "query_id\tn\ttau\trho\tlabel_ties\n";
  std::vector<double> taus, rhos;
  for (const auto& c : corr) {
    std::cout << fmt::format("{}\t{}\t{:.4f}\t{:.4f}\t{}\n", c.query_id, c.n, c.tau, c.rho, c.label_ties ? "yes" : "no");
    taus.push_back(c.tau);
    rhos.push_back(c.rho);
  }
  auto summary = [](const char* name, const std::vector<double>& v) {
    if (v.empty()) return;
    const auto s = simq::five_number_summary(v);
    std::cout << fmt::format("{}: min {:.4f} q1 {:.4f} median {:.4f} q3 {:.4f} max {:.4f}\n", name, s.min, s.q1,
                             s.median, s.q3, s.max);
  };
  summary("kendall tau", taus);
  summary("spearman rho", rhos);
  st.info("queries={} pairs={}", results.size(), labels.size());
}

// --- probe ------------------------------------------------------------------

struct ProbeArgs {
  fs::path engine;
  std::string text;
  std::optional<simq::QuestionId> query_id;
  std::vector<std::string> subs;
};

void run_probe(const ProbeArgs& a) {
  Stage st("probe");
  const auto engine = simq::load_engine(a.engine);
  std::vector<std::string> tokens;
  if (a.query_id)
    tokens = engine.corpus.at(*a.query_id).tokens;
  else if (!a.text.empty())
    tokens = engine.tokenize(a.text);
  else
    throw simq::ArgumentError("probe needs --text or --query-id");

  std::vector<simq::Substitution> subs;
  for (const auto& s : a.subs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw simq::ArgumentError("--sub expects POS:TOKEN, got '" + s + "'");
    std::size_t pos = 0;
    try {
      pos = std::stoul(s.substr(0, colon));
    } catch (const std::exception&) {
      throw simq::ArgumentError("--sub position is not a number: '" + s + "'");
    }
    subs.push_back({pos, s.substr(colon + 1)});
  }
  const auto orig = simq::encode(tokens, engine.table, engine.params, engine.max_length);
  std::cout << fmt::format("{:.4f}\t{}\t(original)\n", simq::similarity(orig, orig), join(tokens));
  for (const auto& r : simq::probe_saliency(tokens, subs, engine.table, engine.params, engine.max_length))
    std::cout << fmt::format("{:.4f}\t{}\n", r.similarity, r.text);
  st.info("substitutions={}", subs.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simq: similar question retrieval"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print results and errors");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Read and tokenize a raw question file");
  c_ingest->add_option("--input,--in", ingest.input, "Line-delimited question records")->required();
  c_ingest->add_option("--out", ingest.out, "Corpus file to write")->required();
  c_ingest->add_option("--entities", ingest.entities, "Entity dictionary (TSV)");
  c_ingest->add_option("--tokenizer", ingest.tokenizer, "dictionary or whitespace")->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-corpus", "Generate a synthetic corpus from a template bank");
  c_synth->add_option("--bank,--templates", synth.bank, "Template bank (JSON)")->required();
  c_synth->add_option("--n", synth.n, "Number of questions")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Corpus file to write")->required();
  c_synth->add_option("--dicts-out", synth.dicts_out, "Directory for entities.tsv and synonyms.tsv");

  VocabArgs vocab;
  auto* c_vocab = app.add_subcommand("build-vocab", "Count tokens into a vocabulary");
  c_vocab->add_option("--corpus", vocab.corpus)->required();
  c_vocab->add_option("--min-count", vocab.min_count)->capture_default_str();
  c_vocab->add_option("--out", vocab.out)->required();

  EmbedArgs emb;
  auto* c_emb = app.add_subcommand("train-embeddings", "Skip-gram word vectors");
  c_emb->add_option("--corpus", emb.corpus)->required();
  c_emb->add_option("--vocab", emb.vocab)->required();
  c_emb->add_option("--out", emb.out)->required();
  c_emb->add_option("--dim", emb.config.dim)->capture_default_str();
  c_emb->add_option("--window", emb.config.window)->capture_default_str();
  c_emb->add_option("--negatives", emb.config.negatives)->capture_default_str();
  c_emb->add_option("--epochs", emb.config.epochs)->capture_default_str();
  c_emb->add_option("--lr", emb.config.lr)->capture_default_str();
  c_emb->add_option("--sample", emb.config.sample)->capture_default_str();
  c_emb->add_option("--seed", emb.config.seed)->capture_default_str();

  PairsArgs pairs;
  auto* c_pairs = app.add_subcommand("generate-pairs", "Positive and negative training pairs");
  c_pairs->add_option("--corpus", pairs.corpus)->required();
  c_pairs->add_option("--entities", pairs.entities)->required();
  c_pairs->add_option("--synonyms", pairs.synonyms);
  c_pairs->add_option("--out", pairs.out)->required();
  c_pairs->add_option("--anchors", pairs.anchors, "Anchor questions (default: all)");
  c_pairs->add_option("--negatives", pairs.config.negatives_per_question)->capture_default_str();
  c_pairs->add_option("--replace-prob", pairs.config.replace_prob)->capture_default_str();
  c_pairs->add_option("--drop-prob", pairs.config.drop_prob)->capture_default_str();
  c_pairs->add_option("--max-attempts", pairs.config.max_attempts)->capture_default_str();
  c_pairs->add_option("--seed", pairs.config.seed)->capture_default_str();

  EncoderArgs enc;
  auto* c_enc = app.add_subcommand("train-encoder", "Train the LSTM question encoder on pairs");
  c_enc->add_option("--pairs", enc.pairs)->required();
  c_enc->add_option("--embeddings,--emb", enc.embeddings)->required();
  c_enc->add_option("--out", enc.out)->required();
  c_enc->add_option("--embeddings-out", enc.embeddings_out, "Where to write fine-tuned embeddings");
  c_enc->add_option("--hidden", enc.config.hidden_dim)->capture_default_str();
  c_enc->add_option("--epochs", enc.config.epochs)->capture_default_str();
  c_enc->add_option("--lr", enc.config.lr)->capture_default_str();
  c_enc->add_option("--batch", enc.config.batch_size)->capture_default_str();
  c_enc->add_option("--clip", enc.config.clip_norm)->capture_default_str();
  c_enc->add_option("--max-length", enc.config.max_length)->capture_default_str();
  c_enc->add_option("--seed", enc.config.seed)->capture_default_str();
  c_enc->add_flag("--train-embeddings", enc.config.train_embeddings, "Update word vectors too");

  IndexArgs idx;
  auto* c_idx = app.add_subcommand("index", "Build the keyword inverted index");
  c_idx->add_option("--corpus", idx.corpus)->required();
  c_idx->add_option("--entities", idx.entities)->required();
  c_idx->add_option("--rules", idx.rules);
  c_idx->add_option("--out", idx.out)->required();

  PrecomputeArgs pre;
  auto* c_pre = app.add_subcommand("precompute", "Assemble an engine directory and cache question vectors");
  c_pre->add_option("--engine", pre.engine, "Engine directory to write")->required();
  c_pre->add_option("--corpus", pre.sources.corpus)->required();
  c_pre->add_option("--vocab", pre.sources.vocab);
  c_pre->add_option("--embeddings", pre.sources.embeddings)->required();
  c_pre->add_option("--model", pre.sources.model)->required();
  c_pre->add_option("--index", pre.sources.index)->required();
  c_pre->add_option("--rules", pre.sources.rules);
  c_pre->add_option("--entities", pre.sources.entities);
  c_pre->add_option("--synonyms", pre.sources.synonyms);
  c_pre->add_option("--max-length", pre.max_length)->capture_default_str();

  QueryArgs qry;
  auto* c_qry = app.add_subcommand("query", "Find similar answered questions");
  c_qry->add_option("--engine", qry.engine)->required();
  c_qry->add_option("--text", qry.text, "Question text");
  c_qry->add_option("--input", qry.input, "Line-delimited {query_id, text, category, intention}");
  c_qry->add_option("--query-id", qry.query_id, "Corpus question to re-query (itself excluded)");
  c_qry->add_option("--category", qry.options.category)->capture_default_str();
  c_qry->add_option("--intention", qry.options.intention)->capture_default_str();
  c_qry->add_option("-k,--k", qry.options.k)->capture_default_str();
  c_qry->add_option("--threshold", qry.options.threshold)->capture_default_str();
  c_qry->add_option("--max-candidates", qry.options.retrieve.max_candidates)->capture_default_str();
  c_qry->add_flag("--strict-meta", qry.options.retrieve.strict_meta, "No category/intention relaxation");
  c_qry->add_flag("--cosine", qry.options.cosine, "Rank by cosine similarity");
  c_qry->add_option("--format", qry.format, "text or jsonl")
      ->check(CLI::IsMember({"text", "jsonl"}))
      ->capture_default_str();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Precision, label histogram and rank correlation");
  c_ev->add_option("--engine", ev.engine);
  c_ev->add_option("--labels", ev.labels)->required();
  c_ev->add_option("--results", ev.results, "Output of query --format jsonl")->required();
  c_ev->add_option("--hist-out", ev.hist_out, "Histogram data file");

  ProbeArgs pr;
  auto* c_pr = app.add_subcommand("probe", "Similarity of single-word substitutions to the original");
  c_pr->add_option("--engine", pr.engine)->required();
  c_pr->add_option("--text", pr.text);
  c_pr->add_option("--query-id", pr.query_id);
  c_pr->add_option("--sub", pr.subs, "POS:TOKEN, zero-based token position")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  setup_logging(quiet);
  try {
    if (*c_ingest) run_ingest(ingest);
    else if (*c_synth) run_synth(synth);
    else if (*c_vocab) run_vocab(vocab);
    else if (*c_emb) run_embeddings(emb);
    else if (*c_pairs) run_pairs(pairs);
    else if (*c_enc) run_encoder(enc);
    else if (*c_idx) run_index(idx);
    else if (*c_pre) run_precompute(pre);
    else if (*c_qry) run_query(qry);
    else if (*c_ev) run_eval(ev);
    else if (*c_pr) run_probe(pr);
  } catch (const simq::ArgumentError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
