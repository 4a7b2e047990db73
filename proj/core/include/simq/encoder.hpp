#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simq/embed.hpp"

namespace simq {

/// LSTM gate order used for the stacked parameter blocks and the model file.
enum class Gate : int { input = 0, forget = 1, output = 2, cell = 3 };

/// All LSTM weights. The four gates are stacked row-wise so one product
/// computes every pre-activation:
///
///   Wx = [W_ix; W_fx; W_ox; W_cx]   (4H x D)
///   Wh = [W_ih; W_fh; W_oh; W_ch]   (4H x H)
///   b  = [b_i;  b_f;  b_o;  b_c ]   (4H)
struct EncoderParams {
  Eigen::MatrixXd Wx;
  Eigen::MatrixXd Wh;
  Eigen::VectorXd b;

  EncoderParams() = default;
  /// Zero-initialized parameters.
  EncoderParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return static_cast<std::size_t>(Wx.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(Wh.cols()); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(Wx.size() + Wh.size() + b.size());
  }

  auto Wx_gate(Gate g) { return Wx.middleRows(offset(g), rows()); }
  auto Wx_gate(Gate g) const { return Wx.middleRows(offset(g), rows()); }
  auto Wh_gate(Gate g) { return Wh.middleRows(offset(g), rows()); }
  auto Wh_gate(Gate g) const { return Wh.middleRows(offset(g), rows()); }
  auto b_gate(Gate g) { return b.segment(offset(g), rows()); }
  auto b_gate(Gate g) const { return b.segment(offset(g), rows()); }

  /// Throws ArgumentError on inconsistent shapes or non-finite entries.
  void validate() const;

  /// Flat views in file order (W_ix, W_fx, W_ox, W_cx, W_ih, ..., b_c).
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  EncoderParams& operator+=(const EncoderParams& o);
  EncoderParams& operator*=(double s);
  double squared_norm() const;

  friend bool operator==(const EncoderParams& a, const EncoderParams& b);

 private:
  Eigen::Index rows() const { return Wh.cols(); }
  Eigen::Index offset(Gate g) const { return static_cast<Eigen::Index>(g) * Wh.cols(); }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
  // gate activations of the step that produced this state
  Eigen::VectorXd i, f, o, g;

  static LstmState zero(std::size_t hidden_dim);
};

/// One application of the LSTM cell:
///   i = σ(W_ix x + W_ih h + b_i), f = σ(...), o = σ(...)
///   c' = c ⊙ f + tanh(W_cx x + W_ch h + b_c) ⊙ i
///   h' = tanh(c') ⊙ o
LstmState lstm_step(const Eigen::VectorXd& x, const LstmState& prev, const EncoderParams& params);

/// v = h_T, the final hidden state of the LSTM over a question.
struct QuestionVector {
  Eigen::VectorXd v;

  std::size_t dim() const { return static_cast<std::size_t>(v.size()); }
  friend bool operator==(const QuestionVector& a, const QuestionVector& b) {
    return a.v.size() == b.v.size() && a.v == b.v;
  }
};

inline constexpr std::size_t kDefaultMaxLength = 64;

/// Runs the LSTM from the zero state over the first `max_length` tokens.
QuestionVector encode(std::span<const std::string> tokens, const EmbeddingTable& table,
                      const EncoderParams& params, std::size_t max_length = kDefaultMaxLength);
QuestionVector encode_indices(std::span<const std::size_t> indices, const EmbeddingTable& table,
                              const EncoderParams& params, std::size_t max_length = kDefaultMaxLength);

/// Inner product <u, v>.
double similarity(const QuestionVector& u, const QuestionVector& v);
/// Cosine of the angle between u and v (0 when either is zero).
double cosine_similarity(const QuestionVector& u, const QuestionVector& v);

struct TrainingPair {
  std::vector<std::string> q;
  std::vector<std::string> q_prime;
  int y = 0;
  QuestionId anchor_id = 0;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// Σ_j (S(q_j, q'_j) - y_j)²
double pair_loss(std::span<const TrainingPair> batch, const EmbeddingTable& table,
                 const EncoderParams& params, std::size_t max_length = kDefaultMaxLength);

struct Gradient {
  EncoderParams params;
  /// ∂l/∂(embedding rows); only filled when requested. Same shape as the
  /// table's input matrix.
  std::optional<RowMatrix> embeddings;
  double loss = 0.0;
};

/// Exact gradient of pair_loss by backpropagation through time.
Gradient grad(std::span<const TrainingPair> batch, const EmbeddingTable& table,
              const EncoderParams& params, bool with_embeddings = false,
              std::size_t max_length = kDefaultMaxLength);

struct EncoderConfig {
  std::size_t hidden_dim = 100;
  std::size_t epochs = 10;
  double lr = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool train_embeddings = false;
  double init_scale = 0.1;
  double forget_bias = 1.0;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
  std::size_t max_length = kDefaultMaxLength;
};

/// Uniform in [-init_scale, init_scale], forget-gate bias set to forget_bias.
EncoderParams init_params(std::size_t input_dim, const EncoderConfig& config);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;  // Σ over the epoch's mini-batches, before each update
  double seconds = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::optional<EmbeddingTable> table;  // set when train_embeddings
  double initial_loss = 0.0;            // full-set loss at initialization
  double final_loss = 0.0;              // full-set loss after training
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch gradient descent on the pair loss. Deterministic given the
/// config. Throws DataError naming the epoch and learning rate if the loss
/// becomes non-finite.
TrainResult train(std::span<const TrainingPair> pairs, const EmbeddingTable& table,
                  const EncoderConfig& config, const EpochCallback& on_epoch = {});

/// Binary model file: magic "SIMQ-ENC v1", u32 input_dim, u32 hidden_dim,
/// then every matrix row-major as little-endian f64 in file order.
std::string serialize_params(const EncoderParams& params);
EncoderParams parse_params(std::string_view bytes);
void save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_params(const std::filesystem::path& path);

}  // namespace simq
