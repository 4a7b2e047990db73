#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simq/embed.hpp"
#include "simq/encoder.hpp"
#include "simq/pipeline.hpp"

namespace simq {

struct LabelRecord {
  QuestionId query_id = 0;
  QuestionId candidate_id = 0;
  std::string worker_id;
  int label = 0;
  bool rejected = false;
};

/// Worker labels per (query id, candidate id). Labels from rejected workers
/// are dropped on insertion.
class LabelSet {
 public:
  using PairKey = std::pair<QuestionId, QuestionId>;

  void add(const LabelRecord& r);
  /// Nullptr when the pair has no (accepted) labels.
  const std::vector<int>* find(QuestionId query, QuestionId candidate) const;
  const std::map<PairKey, std::vector<int>>& pairs() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t rejected() const { return rejected_; }

  /// Line-delimited {"query_id", "candidate_id", "worker_id", "label", "rejected"}.
  static LabelSet parse(std::string_view jsonl);
  static LabelSet load(const std::filesystem::path& path);

 private:
  std::map<PairKey, std::vector<int>> labels_;
  std::size_t rejected_ = 0;
};

/// Share of "similar" labels on a pair.
double similar_fraction(const std::vector<int>& labels);
/// Majority vote: strictly more than half of the workers said similar.
bool majority_similar(const std::vector<int>& labels);

/// The ranked list a query returned.
struct QueryResults {
  QuestionId query_id = 0;
  std::vector<RankedResult> results;
};

/// Line-delimited {"query_id": N, "results": [{"id", "score", "rank"}, ...]}.
std::string serialize_results(std::span<const QueryResults> results);
std::vector<QueryResults> parse_results(std::string_view jsonl);
std::vector<QueryResults> read_results(const std::filesystem::path& path);

/// Fraction of returned pairs whose majority label is similar. Throws
/// DataError listing the unlabeled pairs.
double precision(const LabelSet& labels, std::span<const QueryResults> results);

/// Counts of pairs by similar percentage: bins [0,10%), ..., [90%,100%].
using Histogram = std::array<std::size_t, 10>;
Histogram label_histogram(const LabelSet& labels);

/// a[i] and b[i] are the positions (or scores) of item i under two rankings.
/// Throws ArgumentError for n < 2, different lengths or ties.
double kendall_tau(std::span<const double> a, std::span<const double> b);
/// Uses average ranks for tied values.
double spearman_rho(std::span<const double> a, std::span<const double> b);

/// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct RankCorrelation {
  QuestionId query_id = 0;
  std::size_t n = 0;
  double tau = 0.0;
  double rho = 0.0;
  bool label_ties = false;  // ground truth needed the candidate-id tie break
};

/// Per query with at least two returned results: the system order against
/// the order by descending similar fraction (ties by candidate id).
std::vector<RankCorrelation> rank_correlations(const LabelSet& labels, std::span<const QueryResults> results);

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Linear-interpolation quartiles. Throws ArgumentError on empty input.
FiveNumber five_number_summary(std::vector<double> values);

struct Substitution {
  std::size_t position = 0;
  std::string token;
};

struct ProbeResult {
  std::vector<std::string> tokens;
  std::string text;  // tokens joined by spaces
  double similarity = 0.0;
};

/// Encodes each single-token substitution of `tokens` and scores it against
/// the unmodified encoding; best first.
std::vector<ProbeResult> probe_saliency(std::span<const std::string> tokens, std::span<const Substitution> subs,
                                        const EmbeddingTable& table, const EncoderParams& params,
                                        std::size_t max_length = kDefaultMaxLength);

}  // namespace simq
