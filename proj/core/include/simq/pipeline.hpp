#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simq/corpus.hpp"
#include "simq/embed.hpp"
#include "simq/encoder.hpp"
#include "simq/index.hpp"
#include "simq/text.hpp"

namespace simq {

/// Precomputed question vectors keyed by question id.
class VectorCache {
 public:
  VectorCache() = default;
  explicit VectorCache(std::size_t dim) : dim_(dim) {}

  void put(QuestionId id, QuestionVector v);
  const QuestionVector* find(QuestionId id) const;
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::map<QuestionId, QuestionVector>& entries() const { return vectors_; }

  /// Binary: magic "SIMQ-VEC v1", u32 dim, u64 count, then per record a u64
  /// id followed by dim f64 components, ids ascending.
  std::string serialize() const;
  static VectorCache parse(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static VectorCache load(const std::filesystem::path& path);

  friend bool operator==(const VectorCache&, const VectorCache&) = default;

 private:
  std::size_t dim_ = 0;
  std::map<QuestionId, QuestionVector> vectors_;
};

/// Encodes every tokenized question of the corpus.
VectorCache precompute_vectors(const Corpus& corpus, const EmbeddingTable& table, const EncoderParams& params,
                               std::size_t max_length = kDefaultMaxLength);

struct RankedResult {
  QuestionId id = 0;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const RankedResult&, const RankedResult&) = default;
};

/// Everything a query needs, loaded once and shared read-only.
struct Engine {
  Corpus corpus;
  EntityDictionary entities;
  SynonymDictionary synonyms;
  RuleSet rules;
  EmbeddingTable table;
  EncoderParams params;
  InvertedIndex index;
  VectorCache vectors;
  TokenizeMode tokenize_mode = TokenizeMode::dictionary;
  std::size_t max_length = kDefaultMaxLength;

  /// Throws DataError when dimensions or vocabularies disagree.
  void validate() const;
  std::vector<std::string> tokenize(std::string_view text) const;
};

struct QueryOptions {
  std::size_t k = 5;
  double threshold = 0.5;
  std::string category{kUnknownTag};
  std::string intention{kUnknownTag};
  RetrieveOptions retrieve;
  bool cosine = false;  // rank by cosine instead of the raw inner product
};

/// Tokenize, retrieve candidates, score each against the query vector and
/// return at most k results scoring >= threshold, best first (ties by
/// ascending id).
std::vector<RankedResult> query(const Engine& engine, std::string_view text, const QueryOptions& options = {});

/// Same, for an already tokenized query question.
std::vector<RankedResult> query(const Engine& engine, const Question& q, const QueryOptions& options = {});

/// Scores and orders explicit candidates; the ranking stage of query().
std::vector<RankedResult> rank_candidates(const Engine& engine, const QuestionVector& query_vector,
                                          std::span<const QuestionId> candidates, const QueryOptions& options);

// --- engine directories -----------------------------------------------------

struct EngineSources {
  std::filesystem::path corpus;
  std::filesystem::path vocab;
  std::filesystem::path embeddings;
  std::filesystem::path model;
  std::filesystem::path index;
  std::filesystem::path rules;
  std::filesystem::path entities;
  std::filesystem::path synonyms;  // optional
};

struct EngineManifest {
  std::map<std::string, std::string> files;  // role -> file name in the engine dir
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t max_length = kDefaultMaxLength;
  TokenizeMode tokenize_mode = TokenizeMode::dictionary;
  std::string created;
  std::string config;  // free-form JSON echo of the build settings

  std::string serialize() const;
  static EngineManifest parse(std::string_view json_text);
};

/// Copies the component files into `dir`, precomputes the vector cache and
/// writes manifest.json. Returns the manifest.
EngineManifest assemble_engine(const std::filesystem::path& dir, const EngineSources& sources,
                               std::size_t max_length = kDefaultMaxLength, std::string config_echo = "{}");

/// Loads and cross-checks every component listed in dir/manifest.json.
Engine load_engine(const std::filesystem::path& dir);

}  // namespace simq
