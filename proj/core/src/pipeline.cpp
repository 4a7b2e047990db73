#include "simq/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>

#include "simq/binary_io.hpp"

namespace simq {

using nlohmann::json;

namespace {

constexpr std::string_view kVectorMagic = "SIMQ-VEC v1";
constexpr std::string_view kManifestFormat = "SIMQ-ENGINE";

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

// --- VectorCache ------------------------------------------------------------

void VectorCache::put(QuestionId id, QuestionVector v) {
  if (dim_ == 0) dim_ = v.dim();
  if (v.dim() != dim_)
    throw ArgumentError("vector cache: dim " + std::to_string(v.dim()) + " != " + std::to_string(dim_));
  vectors_.insert_or_assign(id, std::move(v));
}

const QuestionVector* VectorCache::find(QuestionId id) const {
  auto it = vectors_.find(id);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::string VectorCache::serialize() const {
  ByteWriter w;
  w.raw(kVectorMagic);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u64(vectors_.size());
  for (const auto& [id, v] : vectors_) {
    w.u64(id);
    for (Eigen::Index d = 0; d < v.v.size(); ++d) w.f64(v.v(d));
  }
  return w.take();
}

VectorCache VectorCache::parse(std::string_view bytes) {
  ByteReader in(bytes, "vector cache file");
  check_magic(in, kVectorMagic);
  VectorCache cache(in.u32());
  const auto n = in.u64();
  const auto record = sizeof(std::uint64_t) + cache.dim_ * sizeof(double);
  if (n > in.remaining() / record) throw FormatError("unexpected end of vector cache file");
  QuestionId last = 0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto id = in.u64();
    if (k > 0 && id <= last) throw FormatError("vector cache ids are not ascending");
    last = id;
    QuestionVector v{Eigen::VectorXd(static_cast<Eigen::Index>(cache.dim_))};
    for (Eigen::Index d = 0; d < v.v.size(); ++d) v.v(d) = in.f64();
    cache.vectors_.emplace(id, std::move(v));
  }
  in.expect_end();
  return cache;
}

void VectorCache::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

VectorCache VectorCache::load(const std::filesystem::path& path) { return parse(read_file(path)); }

VectorCache precompute_vectors(const Corpus& corpus, const EmbeddingTable& table, const EncoderParams& params,
                               std::size_t max_length) {
  VectorCache cache(params.hidden_dim());
  for (const auto& q : corpus.questions()) {
    if (q.tokens.empty()) continue;
    cache.put(q.id, encode(q.tokens, table, params, max_length));
  }
  return cache;
}

// --- Engine -----------------------------------------------------------------

void Engine::validate() const {
  if (table.dim() != params.input_dim())
    throw DataError("engine: embedding dim " + std::to_string(table.dim()) + " does not match encoder input dim " +
                    std::to_string(params.input_dim()));
  if (!vectors.empty() && vectors.dim() != params.hidden_dim())
    throw DataError("engine: vector cache dim " + std::to_string(vectors.dim()) +
                    " does not match encoder hidden dim " + std::to_string(params.hidden_dim()));
}

std::vector<std::string> Engine::tokenize(std::string_view text) const {
  return simq::tokenize(text, tokenize_mode, &entities);
}

std::vector<RankedResult> rank_candidates(const Engine& engine, const QuestionVector& qv,
                                          std::span<const QuestionId> candidates, const QueryOptions& options) {
  std::vector<RankedResult> scored;
  scored.reserve(candidates.size());
  for (auto id : candidates) {
    const QuestionVector* cv = engine.vectors.find(id);
    QuestionVector fresh;
    if (!cv) {
      fresh = encode(engine.corpus.at(id).tokens, engine.table, engine.params, engine.max_length);
      cv = &fresh;
    }
    const double s = options.cosine ? cosine_similarity(qv, *cv) : similarity(qv, *cv);
    if (s >= options.threshold) scored.push_back({id, s, 0});
  }
  std::sort(scored.begin(), scored.end(), [](const RankedResult& a, const RankedResult& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  if (scored.size() > options.k) scored.resize(options.k);
  for (std::size_t r = 0; r < scored.size(); ++r) scored[r].rank = r + 1;
  return scored;
}

std::vector<RankedResult> query(const Engine& engine, const Question& q, const QueryOptions& options) {
  if (q.tokens.empty()) throw ArgumentError("empty question");
  engine.validate();
  const auto candidates = retrieve(q, engine.entities, engine.rules, engine.index, options.retrieve);
  if (candidates.ids.empty()) return {};
  const auto qv = encode(q.tokens, engine.table, engine.params, engine.max_length);
  return rank_candidates(engine, qv, candidates.ids, options);
}

std::vector<RankedResult> query(const Engine& engine, std::string_view text, const QueryOptions& options) {
  Question q;
  q.text = std::string(text);
  q.tokens = engine.tokenize(text);
  q.category = options.category;
  q.intention = options.intention;
  return query(engine, q, options);
}

// --- manifest ---------------------------------------------------------------

std::string EngineManifest::serialize() const {
  nlohmann::ordered_json j;
  j["format"] = kManifestFormat;
  j["version"] = 1;
  j["created"] = created;
  j["files"] = files;
  j["dims"] = {{"input", input_dim}, {"hidden", hidden_dim}};
  j["max_length"] = max_length;
  j["tokenizer"] = tokenize_mode == TokenizeMode::dictionary ? "dictionary" : "whitespace";
  j["config"] = json::parse(config.empty() ? "{}" : config);
  return j.dump(2) + "\n";
}

EngineManifest EngineManifest::parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (j.value("format", "") != kManifestFormat) throw FormatError("bad magic: expected SIMQ-ENGINE manifest");
  if (j.value("version", 0) != 1) throw FormatError("unsupported version: manifest v" + j.value("version", json()).dump());
  try {
    EngineManifest m;
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.input_dim = j.at("dims").at("input").get<std::size_t>();
    m.hidden_dim = j.at("dims").at("hidden").get<std::size_t>();
    m.max_length = j.value("max_length", kDefaultMaxLength);
    m.tokenize_mode = j.value("tokenizer", "dictionary") == "whitespace" ? TokenizeMode::whitespace
                                                                         : TokenizeMode::dictionary;
    m.created = j.value("created", "");
    m.config = j.contains("config") ? j.at("config").dump() : "{}";
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

EngineManifest assemble_engine(const std::filesystem::path& dir, const EngineSources& src, std::size_t max_length,
                               std::string config_echo) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  EngineManifest m;
  auto copy = [&](const char* role, const fs::path& from, const char* name) {
    if (from.empty()) return;
    if (!fs::exists(from)) throw DataError(std::string("engine: missing ") + role + " file " + from.string());
    const auto to = dir / name;
    if (fs::exists(to) && fs::equivalent(from, to)) {
      m.files[role] = name;
      return;
    }
    write_file_atomic(to, read_file(from));
    m.files[role] = name;
  };
  copy("corpus", src.corpus, "corpus.jsonl");
  copy("vocab", src.vocab, "vocab.txt");
  copy("embeddings", src.embeddings, "embeddings.txt");
  copy("model", src.model, "encoder.bin");
  copy("index", src.index, "index.bin");
  copy("rules", src.rules, "rules.jsonl");
  copy("entities", src.entities, "entities.tsv");
  copy("synonyms", src.synonyms, "synonyms.tsv");
  for (const char* role : {"corpus", "embeddings", "model", "index"})
    if (!m.files.contains(role)) throw DataError(std::string("engine: ") + role + " file is required");

  const auto corpus = ingest(dir / m.files["corpus"]);
  const auto table = EmbeddingTable::load(dir / m.files["embeddings"]);
  const auto params = load_params(dir / m.files["model"]);
  if (table.dim() != params.input_dim())
    throw DataError("engine: embedding dim " + std::to_string(table.dim()) + " does not match encoder input dim " +
                    std::to_string(params.input_dim()));
  const auto vectors = precompute_vectors(corpus, table, params, max_length);
  vectors.save(dir / "vectors.bin");
  m.files["vectors"] = "vectors.bin";

  m.input_dim = params.input_dim();
  m.hidden_dim = params.hidden_dim();
  m.max_length = max_length;
  m.tokenize_mode = m.files.contains("entities") ? TokenizeMode::dictionary : TokenizeMode::whitespace;
  m.created = utc_now();
  m.config = std::move(config_echo);
  write_file_atomic(dir / "manifest.json", m.serialize());
  return m;
}

Engine load_engine(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError("engine: no manifest.json in " + dir.string());
  const auto m = EngineManifest::parse(read_file(manifest_path));
  auto path_of = [&](const std::string& role) -> std::optional<fs::path> {
    auto it = m.files.find(role);
    if (it == m.files.end()) return std::nullopt;
    auto p = dir / it->second;
    if (!fs::exists(p)) throw DataError("engine: " + role + " file " + p.string() + " is missing");
    return p;
  };
  auto required = [&](const std::string& role) {
    auto p = path_of(role);
    if (!p) throw DataError("engine: manifest lists no " + role + " file");
    return *p;
  };

  Engine e;
  e.corpus = ingest(required("corpus"));
  e.table = EmbeddingTable::load(required("embeddings"));
  if (auto p = path_of("vocab")) {
    auto vocab = Vocabulary::load(*p);
    if (!std::equal(vocab.tokens().begin(), vocab.tokens().end(), e.table.vocab.tokens().begin(),
                    e.table.vocab.tokens().end()))
      throw DataError("engine: vocabulary and embedding tokens differ");
    e.table.vocab = std::move(vocab);
  }
  e.params = load_params(required("model"));
  e.index = InvertedIndex::load(required("index"));
  if (auto p = path_of("rules")) e.rules = RuleSet::load(*p);
  if (auto p = path_of("entities")) e.entities = EntityDictionary::load(*p);
  if (auto p = path_of("synonyms")) e.synonyms = SynonymDictionary::load(*p);
  if (auto p = path_of("vectors")) e.vectors = VectorCache::load(*p);
  e.tokenize_mode = m.tokenize_mode;
  e.max_length = m.max_length;

  if (m.input_dim != e.params.input_dim() || m.hidden_dim != e.params.hidden_dim())
    throw DataError("engine: manifest dims do not match the encoder model");
  e.validate();
  return e;
}

}  // namespace simq
