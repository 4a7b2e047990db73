#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simq/corpus.hpp"
#include "simq/text.hpp"

namespace simq {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Word vectors indexed by vocabulary position. Row i of `input` is the
/// embedding of vocab token i; `output` holds the skip-gram context vectors
/// and is only meaningful during training (it is not persisted).
struct EmbeddingTable {
  Vocabulary vocab;
  RowMatrix input;
  RowMatrix output;

  std::size_t dim() const { return static_cast<std::size_t>(input.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(input.rows()); }

  /// Vector of `token`, or of UNK when the token is out of vocabulary.
  Eigen::Ref<const Eigen::RowVectorXd> lookup(std::string_view token) const;

  /// Text format: "SIMQ-EMB v1 <|V|> <dim>" then "token v1 ... vdim" per row.
  std::string serialize() const;
  static EmbeddingTable parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);
};

struct SkipGramConfig {
  std::size_t dim = 100;
  std::size_t window = 8;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;  // decays linearly to lr * 1e-4 over all epochs
  /// Frequent-token subsampling threshold; 0 disables subsampling.
  double sample = 1e-3;
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable table;
  /// Mean negative-sampling loss per (center, context) update, per epoch.
  std::vector<double> epoch_loss;
};

/// Seeded initialization: input rows uniform in [-0.5/dim, 0.5/dim] except
/// UNK, which starts at zero; output rows zero.
EmbeddingTable init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

/// Skip-gram with negative sampling over each question's token sequence.
/// Single-threaded and deterministic given the config.
SkipGramResult train_skipgram(const Corpus& corpus, const Vocabulary& vocab,
                              const SkipGramConfig& config);

/// Unigram^0.75 sampling distribution over vocab indices (cumulative form).
std::vector<double> negative_sampling_cdf(std::span<const std::size_t> frequencies);

/// Per-token keep probability for frequent-token subsampling.
std::vector<double> subsample_keep_probability(std::span<const std::size_t> frequencies,
                                               double sample);

/// Logistic negative-sampling loss for one (center, context) pair:
///   -log σ(c·u_ctx) - Σ_k log σ(-c·u_k)
/// When gradient pointers are given they receive ∂loss/∂center,
/// ∂loss/∂context and ∂loss/∂negative_k.
double sgns_pair_loss(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                      std::span<const Eigen::VectorXd> negatives,
                      Eigen::VectorXd* grad_center = nullptr,
                      Eigen::VectorXd* grad_context = nullptr,
                      std::vector<Eigen::VectorXd>* grad_negatives = nullptr);

/// One column per token: the x_t input sequence of the encoder.
/// Throws ArgumentError on empty input.
Eigen::MatrixXd embed_question(std::span<const std::string> tokens, const EmbeddingTable& table);

}  // namespace simq
