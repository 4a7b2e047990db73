#include "simq/embed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace simq {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log σ(x) without overflow for large |x|
double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double r = rng.uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingTable::lookup(std::string_view token) const {
  return input.row(static_cast<Eigen::Index>(vocab.index_of(token)));
}

std::string EmbeddingTable::serialize() const {
  std::string out = "SIMQ-EMB v1 " + std::to_string(size()) + " " + std::to_string(dim()) + "\n";
  for (std::size_t i = 0; i < size(); ++i) {
    out += vocab.token(i);
    for (std::size_t d = 0; d < dim(); ++d) {
      out += ' ';
      out += format_double(input(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
    }
    out += '\n';
  }
  return out;
}

EmbeddingTable EmbeddingTable::parse(std::string_view text) {
  auto next_line = [&text](std::string_view& line) {
    if (text.empty()) return false;
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw FormatError("unexpected end of embedding file");
    line = text.substr(0, nl);
    text.remove_prefix(nl + 1);
    return true;
  };
  auto to_size = [](std::string_view s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw FormatError("bad embedding header");
    return v;
  };

  std::string_view line;
  if (!next_line(line)) throw FormatError("unexpected end of embedding file");
  if (!line.starts_with("SIMQ-EMB ")) throw FormatError("bad magic: expected SIMQ-EMB v1");
  line.remove_prefix(9);
  if (!line.starts_with("v1 ")) throw FormatError("unsupported version: embeddings " +
                                                  std::string(line.substr(0, line.find(' '))));
  line.remove_prefix(3);
  auto sp = line.find(' ');
  if (sp == std::string_view::npos) throw FormatError("bad embedding header");
  const auto rows = to_size(line.substr(0, sp));
  const auto dim = to_size(line.substr(sp + 1));
  if (dim == 0) throw FormatError("bad embedding header: dim 0");

  EmbeddingTable t;
  t.input.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::vector<std::string> tokens;
  tokens.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!next_line(line)) throw FormatError("unexpected end of embedding file");
    // tokens may contain spaces (multi-word entities): the last `dim` fields
    // are the components, everything before them is the token
    std::vector<std::string_view> fields;
    std::size_t end = line.size();
    for (std::size_t d = 0; d < dim; ++d) {
      auto s = end == 0 ? std::string_view::npos : line.rfind(' ', end - 1);
      if (s == std::string_view::npos)
        throw FormatError("embedding line " + std::to_string(r + 2) + ": expected " +
                          std::to_string(dim) + " components");
      fields.push_back(line.substr(s + 1, end - s - 1));
      end = s;
    }
    for (std::size_t d = 0; d < dim; ++d) {
      double v;
      try {
        v = parse_double(fields[dim - 1 - d]);
      } catch (const DataError& e) {
        throw FormatError("embedding line " + std::to_string(r + 2) + ": " + e.what());
      }
      if (!std::isfinite(v)) throw FormatError("embedding line " + std::to_string(r + 2) + ": non-finite value");
      t.input(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = v;
    }
    tokens.emplace_back(line.substr(0, end));
  }
  if (!text.empty()) throw FormatError("trailing lines after embeddings");
  t.vocab = Vocabulary::from_tokens(std::move(tokens));
  t.output = RowMatrix::Zero(t.input.rows(), t.input.cols());
  return t;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

EmbeddingTable init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ArgumentError("embedding dim must be >= 1");
  EmbeddingTable t;
  t.vocab = vocab;
  const auto rows = static_cast<Eigen::Index>(vocab.size());
  const auto cols = static_cast<Eigen::Index>(dim);
  t.input.resize(rows, cols);
  t.output = RowMatrix::Zero(rows, cols);
  Rng rng(seed);
  const double scale = 0.5 / static_cast<double>(dim);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) t.input(r, c) = rng.uniform(-scale, scale);
  t.input.row(static_cast<Eigen::Index>(Vocabulary::kUnkIndex)).setZero();
  return t;
}

std::vector<double> negative_sampling_cdf(std::span<const std::size_t> frequencies) {
  std::vector<double> cdf(frequencies.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    acc += std::pow(static_cast<double>(frequencies[i]), 0.75);
    cdf[i] = acc;
  }
  if (acc <= 0.0) {
    // no frequency information (e.g. a vocabulary loaded from an embedding
    // file): fall back to uniform
    for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = static_cast<double>(i + 1);
  }
  return cdf;
}

std::vector<double> subsample_keep_probability(std::span<const std::size_t> frequencies,
                                               double sample) {
  std::vector<double> keep(frequencies.size(), 1.0);
  if (sample <= 0.0) return keep;
  double total = 0.0;
  for (auto f : frequencies) total += static_cast<double>(f);
  const double threshold = sample * total;
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    const double f = static_cast<double>(frequencies[i]);
    if (f <= 0.0) continue;
    keep[i] = std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f);
  }
  return keep;
}

double sgns_pair_loss(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                      std::span<const Eigen::VectorXd> negatives, Eigen::VectorXd* grad_center,
                      Eigen::VectorXd* grad_context, std::vector<Eigen::VectorXd>* grad_negatives) {
  const double pos = center.dot(context);
  double loss = -log_sigmoid(pos);
  const double g_pos = sigmoid(pos) - 1.0;
  if (grad_center) *grad_center = g_pos * context;
  if (grad_context) *grad_context = g_pos * center;
  if (grad_negatives) grad_negatives->clear();
  for (const auto& neg : negatives) {
    const double s = center.dot(neg);
    loss -= log_sigmoid(-s);
    const double g = sigmoid(s);
    if (grad_center) *grad_center += g * neg;
    if (grad_negatives) grad_negatives->push_back(g * center);
  }
  return loss;
}

SkipGramResult train_skipgram(const Corpus& corpus, const Vocabulary& vocab,
                              const SkipGramConfig& config) {
  if (config.dim == 0) throw ArgumentError("dim must be >= 1");
  if (config.window == 0) throw ArgumentError("window must be >= 1");
  if (config.negatives == 0) throw ArgumentError("negatives must be >= 1");
  if (vocab.size() < config.negatives + 1)
    throw DataError("vocabulary too small for negative sampling");

  SkipGramResult result{init_embeddings(vocab, config.dim, config.seed), {}};
  auto& table = result.table;

  std::vector<std::vector<std::size_t>> sentences;
  std::size_t total_tokens = 0;
  for (const auto& q : corpus.questions()) {
    sentences.push_back(vocab.indices(q.tokens));
    total_tokens += q.tokens.size();
  }
  const auto cdf = negative_sampling_cdf(vocab.frequencies());
  const auto keep = subsample_keep_probability(vocab.frequencies(), config.sample);

  // the training stream is independent from the initialization stream
  Rng rng(Rng::derive(config.seed, 1));
  const double planned = static_cast<double>(total_tokens * config.epochs) + 1.0;
  double processed = 0.0;
  const auto dim = static_cast<Eigen::Index>(config.dim);
  Eigen::VectorXd grad_center(dim);
  std::vector<std::size_t> kept;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t updates = 0;
    for (const auto& sentence : sentences) {
      processed += static_cast<double>(sentence.size());
      const double lr = config.lr * std::max(1e-4, 1.0 - processed / planned);
      kept.clear();
      for (auto w : sentence)
        if (keep[w] >= 1.0 || rng.uniform() < keep[w]) kept.push_back(w);
      for (std::size_t pos = 0; pos < kept.size(); ++pos) {
        const auto shrink = rng.index(config.window);  // dynamic window, as in word2vec
        const auto reach = config.window - shrink;
        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(kept.size() - 1, pos + reach);
        const auto center = static_cast<Eigen::Index>(kept[pos]);
        for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
          if (ctx == pos) continue;
          grad_center.setZero();
          auto c = table.input.row(center);
          auto update = [&](std::size_t target, double label) {
            auto u = table.output.row(static_cast<Eigen::Index>(target));
            const double s = c.dot(u);
            loss_sum -= label > 0.5 ? log_sigmoid(s) : log_sigmoid(-s);
            const double g = sigmoid(s) - label;  // ∂loss/∂s
            grad_center += g * u.transpose();
            u -= lr * g * c;
          };
          update(kept[ctx], 1.0);
          for (std::size_t k = 0; k < config.negatives; ++k) {
            const auto neg = sample_cdf(cdf, rng);
            if (neg == kept[ctx]) continue;
            update(neg, 0.0);
          }
          c -= lr * grad_center.transpose();
          ++updates;
        }
      }
    }
    result.epoch_loss.push_back(updates ? loss_sum / static_cast<double>(updates) : 0.0);
  }
  return result;
}

Eigen::MatrixXd embed_question(std::span<const std::string> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw ArgumentError("embed_question: empty token list");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(table.dim()), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t)
    x.col(static_cast<Eigen::Index>(t)) = table.lookup(tokens[t]).transpose();
  return x;
}

}  // namespace simq
