#include "simq/encoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "simq/binary_io.hpp"

namespace simq {

namespace {

constexpr std::string_view kModelMagic = "SIMQ-ENC v1";

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(what);
}

// Recorded forward pass over one sequence. Column t+1 of H/C holds the state
// after token t; column 0 is the zero initial state.
struct Trace {
  std::vector<std::size_t> tokens;
  Eigen::MatrixXd X;  // D x T
  Eigen::MatrixXd A;  // 4H x T gate activations [i; f; o; g]
  Eigen::MatrixXd H;  // H x (T+1)
  Eigen::MatrixXd C;  // H x (T+1)
};

std::span<const std::size_t> clip_length(std::span<const std::size_t> tokens, std::size_t max_length) {
  return max_length > 0 && tokens.size() > max_length ? tokens.first(max_length) : tokens;
}

// Activations for one step given the input contribution Wx x + b.
void cell(const Eigen::Ref<const Eigen::VectorXd>& input_part, const Eigen::Ref<const Eigen::VectorXd>& h_prev,
          const Eigen::Ref<const Eigen::VectorXd>& c_prev, const EncoderParams& p,
          Eigen::Ref<Eigen::VectorXd> act, Eigen::Ref<Eigen::VectorXd> h, Eigen::Ref<Eigen::VectorXd> c) {
  const auto n = static_cast<Eigen::Index>(p.hidden_dim());
  act.noalias() = p.Wh * h_prev;
  act += input_part;
  act.head(3 * n) = act.head(3 * n).unaryExpr([](double z) { return sigmoid(z); });
  act.tail(n) = act.tail(n).array().tanh();
  const auto i = act.segment(0, n).array();
  const auto f = act.segment(n, n).array();
  const auto o = act.segment(2 * n, n).array();
  const auto g = act.segment(3 * n, n).array();
  c = (c_prev.array() * f + g * i).matrix();
  h = (c.array().tanh() * o).matrix();
}

void forward(std::span<const std::size_t> tokens, const EmbeddingTable& table, const EncoderParams& p,
             Trace& tr) {
  const auto T = static_cast<Eigen::Index>(tokens.size());
  const auto D = static_cast<Eigen::Index>(p.input_dim());
  const auto n = static_cast<Eigen::Index>(p.hidden_dim());
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.X.resize(D, T);
  for (Eigen::Index t = 0; t < T; ++t)
    tr.X.col(t) = table.input.row(static_cast<Eigen::Index>(tokens[static_cast<std::size_t>(t)])).transpose();
  Eigen::MatrixXd pre = p.Wx * tr.X;
  pre.colwise() += p.b;
  tr.A.resize(4 * n, T);
  tr.H.resize(n, T + 1);
  tr.C.resize(n, T + 1);
  tr.H.col(0).setZero();
  tr.C.col(0).setZero();
  for (Eigen::Index t = 0; t < T; ++t)
    cell(pre.col(t), tr.H.col(t), tr.C.col(t), p, tr.A.col(t), tr.H.col(t + 1), tr.C.col(t + 1));
}

// Accumulates ∂l/∂params (and ∂l/∂embeddings) given ∂l/∂h_T.
void backward(const Trace& tr, const Eigen::VectorXd& dh_final, const EncoderParams& p, EncoderParams& g,
              RowMatrix* g_emb) {
  const auto T = tr.X.cols();
  const auto n = static_cast<Eigen::Index>(p.hidden_dim());
  Eigen::MatrixXd dA(4 * n, T);
  Eigen::VectorXd dh = dh_final;
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto a = tr.A.col(t);
    const auto i = a.segment(0, n).array();
    const auto f = a.segment(n, n).array();
    const auto o = a.segment(2 * n, n).array();
    const auto gg = a.segment(3 * n, n).array();
    const Eigen::ArrayXd tc = tr.C.col(t + 1).array().tanh();
    dc.array() += dh.array() * o * (1.0 - tc.square());
    dA.col(t).segment(0, n) = (dc.array() * gg * i * (1.0 - i)).matrix();
    dA.col(t).segment(n, n) = (dc.array() * tr.C.col(t).array() * f * (1.0 - f)).matrix();
    dA.col(t).segment(2 * n, n) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dA.col(t).segment(3 * n, n) = (dc.array() * i * (1.0 - gg.square())).matrix();
    dc.array() *= f;
    dh.noalias() = p.Wh.transpose() * dA.col(t);
  }
  g.Wx.noalias() += dA * tr.X.transpose();
  g.Wh.noalias() += dA * tr.H.leftCols(T).transpose();
  g.b += dA.rowwise().sum();
  if (g_emb) {
    Eigen::MatrixXd dX = p.Wx.transpose() * dA;
    for (Eigen::Index t = 0; t < T; ++t)
      g_emb->row(static_cast<Eigen::Index>(tr.tokens[static_cast<std::size_t>(t)])) += dX.col(t).transpose();
  }
}

struct IndexedPair {
  std::vector<std::size_t> q;
  std::vector<std::size_t> q_prime;
  double y = 0.0;
};

std::vector<IndexedPair> index_pairs(std::span<const TrainingPair> pairs, const Vocabulary& vocab,
                                     std::size_t max_length) {
  std::vector<IndexedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.q.empty() || p.q_prime.empty()) throw ArgumentError("training pair with an empty question");
    if (p.y != 0 && p.y != 1) throw ArgumentError("training label must be 0 or 1");
    IndexedPair ip;
    auto q = vocab.indices(p.q);
    auto qp = vocab.indices(p.q_prime);
    auto a = clip_length(q, max_length);
    auto b = clip_length(qp, max_length);
    ip.q.assign(a.begin(), a.end());
    ip.q_prime.assign(b.begin(), b.end());
    ip.y = static_cast<double>(p.y);
    out.push_back(std::move(ip));
  }
  return out;
}

void check_dims(const EmbeddingTable& table, const EncoderParams& params) {
  if (table.dim() != params.input_dim())
    throw ArgumentError("embedding dim " + std::to_string(table.dim()) + " does not match encoder input dim " +
                        std::to_string(params.input_dim()));
}

struct Workspace {
  Trace a, b;
};

// Loss over the given pairs; accumulates the gradient when `g` is non-null.
double accumulate(std::span<const IndexedPair> pairs, const EmbeddingTable& table, const EncoderParams& p,
                  EncoderParams* g, RowMatrix* g_emb, Workspace& ws) {
  double loss = 0.0;
  for (const auto& pair : pairs) {
    forward(pair.q, table, p, ws.a);
    forward(pair.q_prime, table, p, ws.b);
    const auto u = ws.a.H.col(ws.a.H.cols() - 1);
    const auto v = ws.b.H.col(ws.b.H.cols() - 1);
    const double r = u.dot(v) - pair.y;
    loss += r * r;
    if (g) {
      // siamese: both branches share the parameters
      const Eigen::VectorXd du = 2.0 * r * v;
      const Eigen::VectorXd dv = 2.0 * r * u;
      backward(ws.a, du, p, *g, g_emb);
      backward(ws.b, dv, p, *g, g_emb);
    }
  }
  return loss;
}

}  // namespace

// --- EncoderParams ----------------------------------------------------------

EncoderParams::EncoderParams(std::size_t input_dim, std::size_t hidden_dim) {
  require(input_dim > 0 && hidden_dim > 0, "encoder dims must be >= 1");
  const auto D = static_cast<Eigen::Index>(input_dim);
  const auto n = static_cast<Eigen::Index>(hidden_dim);
  Wx = Eigen::MatrixXd::Zero(4 * n, D);
  Wh = Eigen::MatrixXd::Zero(4 * n, n);
  b = Eigen::VectorXd::Zero(4 * n);
}

void EncoderParams::validate() const {
  const auto n = Wh.cols();
  require(n > 0 && Wx.cols() > 0, "encoder dims must be >= 1");
  require(Wh.rows() == 4 * n && Wx.rows() == 4 * n && b.size() == 4 * n, "encoder parameter shapes are inconsistent");
  require(Wx.allFinite() && Wh.allFinite() && b.allFinite(), "encoder parameters contain non-finite values");
}

std::vector<double> EncoderParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (Eigen::Index r = 0; r < Wx.rows(); ++r)
    for (Eigen::Index c = 0; c < Wx.cols(); ++c) out.push_back(Wx(r, c));
  for (Eigen::Index r = 0; r < Wh.rows(); ++r)
    for (Eigen::Index c = 0; c < Wh.cols(); ++c) out.push_back(Wh(r, c));
  for (Eigen::Index r = 0; r < b.size(); ++r) out.push_back(b(r));
  return out;
}

void EncoderParams::unflatten(std::span<const double> values) {
  require(values.size() == parameter_count(), "unflatten: wrong number of values");
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < Wx.rows(); ++r)
    for (Eigen::Index c = 0; c < Wx.cols(); ++c) Wx(r, c) = values[k++];
  for (Eigen::Index r = 0; r < Wh.rows(); ++r)
    for (Eigen::Index c = 0; c < Wh.cols(); ++c) Wh(r, c) = values[k++];
  for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = values[k++];
}

EncoderParams& EncoderParams::operator+=(const EncoderParams& o) {
  Wx += o.Wx;
  Wh += o.Wh;
  b += o.b;
  return *this;
}

EncoderParams& EncoderParams::operator*=(double s) {
  Wx *= s;
  Wh *= s;
  b *= s;
  return *this;
}

double EncoderParams::squared_norm() const {
  return Wx.squaredNorm() + Wh.squaredNorm() + b.squaredNorm();
}

bool operator==(const EncoderParams& a, const EncoderParams& b) {
  return a.Wx.rows() == b.Wx.rows() && a.Wx.cols() == b.Wx.cols() && a.Wh.cols() == b.Wh.cols() &&
         a.Wx == b.Wx && a.Wh == b.Wh && a.b == b.b;
}

// --- forward ----------------------------------------------------------------

LstmState LstmState::zero(std::size_t hidden_dim) {
  const auto n = static_cast<Eigen::Index>(hidden_dim);
  LstmState s;
  s.h = Eigen::VectorXd::Zero(n);
  s.c = Eigen::VectorXd::Zero(n);
  return s;
}

LstmState lstm_step(const Eigen::VectorXd& x, const LstmState& prev, const EncoderParams& params) {
  const auto n = static_cast<Eigen::Index>(params.hidden_dim());
  if (static_cast<std::size_t>(x.size()) != params.input_dim())
    throw ArgumentError("lstm_step: input has " + std::to_string(x.size()) + " components, expected " +
                        std::to_string(params.input_dim()));
  if (prev.h.size() != n || prev.c.size() != n)
    throw ArgumentError("lstm_step: state dim does not match hidden dim " + std::to_string(n));
  Eigen::VectorXd input_part = params.Wx * x + params.b;
  Eigen::VectorXd act(4 * n);
  LstmState next;
  next.h.resize(n);
  next.c.resize(n);
  cell(input_part, prev.h, prev.c, params, act, next.h, next.c);
  next.i = act.segment(0, n);
  next.f = act.segment(n, n);
  next.o = act.segment(2 * n, n);
  next.g = act.segment(3 * n, n);
  return next;
}

QuestionVector encode_indices(std::span<const std::size_t> indices, const EmbeddingTable& table,
                              const EncoderParams& params, std::size_t max_length) {
  if (indices.empty()) throw ArgumentError("encode: empty token list");
  check_dims(table, params);
  Trace tr;
  forward(clip_length(indices, max_length), table, params, tr);
  return {tr.H.col(tr.H.cols() - 1)};
}

QuestionVector encode(std::span<const std::string> tokens, const EmbeddingTable& table,
                      const EncoderParams& params, std::size_t max_length) {
  if (tokens.empty()) throw ArgumentError("encode: empty token list");
  return encode_indices(table.vocab.indices(tokens), table, params, max_length);
}

double similarity(const QuestionVector& u, const QuestionVector& v) {
  if (u.v.size() != v.v.size())
    throw ArgumentError("similarity: dimension mismatch (" + std::to_string(u.v.size()) + " vs " +
                        std::to_string(v.v.size()) + ")");
  return u.v.dot(v.v);
}

double cosine_similarity(const QuestionVector& u, const QuestionVector& v) {
  const double dot = similarity(u, v);
  const double norm = u.v.norm() * v.v.norm();
  return norm > 0.0 ? dot / norm : 0.0;
}

// --- loss and gradient ------------------------------------------------------

double pair_loss(std::span<const TrainingPair> batch, const EmbeddingTable& table, const EncoderParams& params,
                 std::size_t max_length) {
  if (batch.empty()) throw ArgumentError("pair_loss: empty batch");
  check_dims(table, params);
  auto pairs = index_pairs(batch, table.vocab, max_length);
  Workspace ws;
  return accumulate(pairs, table, params, nullptr, nullptr, ws);
}

Gradient grad(std::span<const TrainingPair> batch, const EmbeddingTable& table, const EncoderParams& params,
              bool with_embeddings, std::size_t max_length) {
  if (batch.empty()) throw ArgumentError("grad: empty batch");
  check_dims(table, params);
  auto pairs = index_pairs(batch, table.vocab, max_length);
  Gradient out;
  out.params = EncoderParams(params.input_dim(), params.hidden_dim());
  if (with_embeddings) out.embeddings = RowMatrix::Zero(table.input.rows(), table.input.cols());
  Workspace ws;
  out.loss = accumulate(pairs, table, params, &out.params, out.embeddings ? &*out.embeddings : nullptr, ws);
  return out;
}

// --- training ---------------------------------------------------------------

EncoderParams init_params(std::size_t input_dim, const EncoderConfig& config) {
  EncoderParams p(input_dim, config.hidden_dim);
  Rng rng(config.seed);
  const double s = config.init_scale;
  auto fill = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-s, s);
  };
  fill(p.Wx);
  fill(p.Wh);
  for (Eigen::Index r = 0; r < p.b.size(); ++r) p.b(r) = rng.uniform(-s, s);
  p.b_gate(Gate::forget).setConstant(config.forget_bias);
  return p;
}

TrainResult train(std::span<const TrainingPair> pairs, const EmbeddingTable& table, const EncoderConfig& config,
                  const EpochCallback& on_epoch) {
  if (pairs.empty()) throw ArgumentError("train: no training pairs");
  if (config.batch_size == 0) throw ArgumentError("train: batch_size must be >= 1");

  TrainResult result;
  result.params = init_params(table.dim(), config);
  if (config.train_embeddings) result.table = table;
  const EmbeddingTable& live = config.train_embeddings ? *result.table : table;
  auto& params = result.params;

  const auto data = index_pairs(pairs, table.vocab, config.max_length);
  Workspace ws;
  result.initial_loss = accumulate(data, live, params, nullptr, nullptr, ws);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(Rng::derive(config.seed, 2));

  EncoderParams g(params.input_dim(), params.hidden_dim());
  std::optional<RowMatrix> g_emb;
  if (config.train_embeddings) g_emb = RowMatrix::Zero(table.input.rows(), table.input.cols());
  std::vector<IndexedPair> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);

    double epoch_loss = 0.0;
    for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      const auto end = std::min(order.size(), pos + config.batch_size);
      batch.clear();
      for (auto k = pos; k < end; ++k) batch.push_back(data[order[k]]);

      g *= 0.0;
      if (g_emb) g_emb->setZero();
      epoch_loss += accumulate(batch, live, params, &g, g_emb ? &*g_emb : nullptr, ws);

      double norm2 = g.squared_norm() + (g_emb ? g_emb->squaredNorm() : 0.0);
      if (!std::isfinite(norm2) || !std::isfinite(epoch_loss))
        throw DataError("training diverged at epoch " + std::to_string(epoch) + " (lr=" + format_double(config.lr) +
                        ")");
      double step = config.lr;
      if (config.clip_norm > 0.0 && norm2 > config.clip_norm * config.clip_norm)
        step *= config.clip_norm / std::sqrt(norm2);
      params.Wx -= step * g.Wx;
      params.Wh -= step * g.Wh;
      params.b -= step * g.b;
      if (g_emb) result.table->input -= step * *g_emb;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  result.final_loss = accumulate(data, live, params, nullptr, nullptr, ws);
  if (!std::isfinite(result.final_loss))
    throw DataError("training diverged at epoch " + std::to_string(config.epochs) + " (lr=" +
                    format_double(config.lr) + ")");
  return result;
}

// --- persistence ------------------------------------------------------------

std::string serialize_params(const EncoderParams& params) {
  params.validate();
  ByteWriter w;
  w.raw(kModelMagic);
  w.u32(static_cast<std::uint32_t>(params.input_dim()));
  w.u32(static_cast<std::uint32_t>(params.hidden_dim()));
  for (double v : params.flatten()) w.f64(v);
  return w.take();
}

EncoderParams parse_params(std::string_view bytes) {
  ByteReader in(bytes, "model file");
  check_magic(in, kModelMagic);
  const auto input_dim = in.u32();
  const auto hidden_dim = in.u32();
  if (input_dim == 0 || hidden_dim == 0) throw FormatError("model file has a zero dimension");
  EncoderParams p(input_dim, hidden_dim);
  const auto count = p.parameter_count();
  if (in.remaining() < count * sizeof(double)) throw FormatError("unexpected end of model file");
  std::vector<double> values(count);
  for (auto& v : values) v = in.f64();
  in.expect_end();
  p.unflatten(values);
  if (!(p.Wx.allFinite() && p.Wh.allFinite() && p.b.allFinite()))
    throw FormatError("model file contains non-finite parameters");
  return p;
}

void save_params(const EncoderParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_params(params));
}

EncoderParams load_params(const std::filesystem::path& path) { return parse_params(read_file(path)); }

}  // namespace simq
