#include "simq/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace simq {

using nlohmann::json;

void LabelSet::add(const LabelRecord& r) {
  if (r.label != 0 && r.label != 1) throw DataError("label must be 0 or 1");
  if (r.rejected) {
    ++rejected_;
    return;
  }
  labels_[{r.query_id, r.candidate_id}].push_back(r.label);
}

const std::vector<int>* LabelSet::find(QuestionId query, QuestionId candidate) const {
  auto it = labels_.find({query, candidate});
  return it == labels_.end() ? nullptr : &it->second;
}

LabelSet LabelSet::parse(std::string_view jsonl) {
  LabelSet out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = json::parse(line);
      LabelRecord r;
      r.query_id = j.at("query_id").get<QuestionId>();
      r.candidate_id = j.at("candidate_id").get<QuestionId>();
      const auto& w = j.value("worker_id", json());
      r.worker_id = w.is_string() ? w.get<std::string>() : w.dump();
      r.label = j.at("label").get<int>();
      r.rejected = j.value("rejected", false);
      out.add(r);
    } catch (const json::exception& e) {
      throw DataError("label file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("label file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

LabelSet LabelSet::load(const std::filesystem::path& path) { return parse(read_file(path)); }

double similar_fraction(const std::vector<int>& labels) {
  if (labels.empty()) throw ArgumentError("pair has no labels");
  return static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / static_cast<double>(labels.size());
}

bool majority_similar(const std::vector<int>& labels) {
  const auto yes = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return 2 * yes > labels.size();
}

// --- results files ----------------------------------------------------------

std::string serialize_results(std::span<const QueryResults> results) {
  std::string out;
  for (const auto& q : results) {
    nlohmann::ordered_json j;
    j["query_id"] = q.query_id;
    j["results"] = json::array();
    for (const auto& r : q.results) {
      nlohmann::ordered_json e;
      e["id"] = r.id;
      e["score"] = r.score;
      e["rank"] = r.rank;
      j["results"].push_back(std::move(e));
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<QueryResults> parse_results(std::string_view jsonl) {
  std::vector<QueryResults> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = json::parse(line);
      QueryResults q;
      q.query_id = j.at("query_id").get<QuestionId>();
      std::size_t rank = 0;
      for (const auto& e : j.at("results")) {
        ++rank;
        q.results.push_back({e.at("id").get<QuestionId>(), e.value("score", 0.0), e.value("rank", rank)});
      }
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw DataError("results file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<QueryResults> read_results(const std::filesystem::path& path) { return parse_results(read_file(path)); }

// --- metrics ----------------------------------------------------------------

double precision(const LabelSet& labels, std::span<const QueryResults> results) {
  std::size_t total = 0;
  std::size_t similar = 0;
  std::vector<std::string> missing;
  for (const auto& q : results) {
    for (const auto& r : q.results) {
      const auto* l = labels.find(q.query_id, r.id);
      if (!l) {
        missing.push_back("(" + std::to_string(q.query_id) + ", " + std::to_string(r.id) + ")");
        continue;
      }
      ++total;
      if (majority_similar(*l)) ++similar;
    }
  }
  if (!missing.empty()) {
    std::string msg = "unlabeled pairs:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  if (total == 0) throw DataError("precision: no returned pairs");
  return static_cast<double>(similar) / static_cast<double>(total);
}

Histogram label_histogram(const LabelSet& labels) {
  Histogram h{};
  for (const auto& [_, l] : labels.pairs()) {
    const auto yes = static_cast<std::size_t>(std::count(l.begin(), l.end(), 1));
    h[std::min<std::size_t>(9, 10 * yes / l.size())]++;
  }
  return h;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ArgumentError("rankings differ in length (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  if (a.size() < 2) throw ArgumentError("rank correlation needs at least 2 items");
}

int sign(double x) { return (x > 0) - (x < 0); }

}  // namespace

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto n = a.size();
  long long s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sa = sign(a[i] - a[j]);
      const int sb = sign(b[i] - b[j]);
      if (sa == 0 || sb == 0) throw ArgumentError("kendall_tau: tied ranks are not supported");
      s += sa * sb;
    }
  return static_cast<double>(s) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const auto n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return values[x] < values[y]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    auto j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (auto k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  double d2 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const auto n = static_cast<double>(a.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

std::vector<RankCorrelation> rank_correlations(const LabelSet& labels, std::span<const QueryResults> results) {
  std::vector<RankCorrelation> out;
  for (const auto& q : results) {
    if (q.results.size() < 2) continue;
    struct Item {
      QuestionId id;
      double frac;
      std::size_t system_pos;
    };
    std::vector<Item> items;
    for (std::size_t k = 0; k < q.results.size(); ++k) {
      const auto* l = labels.find(q.query_id, q.results[k].id);
      if (!l)
        throw DataError("unlabeled pair (" + std::to_string(q.query_id) + ", " + std::to_string(q.results[k].id) +
                        ")");
      items.push_back({q.results[k].id, similar_fraction(*l), k + 1});
    }
    auto truth = items;
    std::sort(truth.begin(), truth.end(),
              [](const Item& x, const Item& y) { return x.frac != y.frac ? x.frac > y.frac : x.id < y.id; });
    RankCorrelation rc;
    rc.query_id = q.query_id;
    rc.n = items.size();
    for (std::size_t k = 1; k < truth.size(); ++k)
      if (truth[k].frac == truth[k - 1].frac) rc.label_ties = true;

    std::map<QuestionId, double> truth_pos;
    for (std::size_t k = 0; k < truth.size(); ++k) truth_pos[truth[k].id] = static_cast<double>(k + 1);
    std::vector<double> a, b;
    for (const auto& it : items) {
      a.push_back(static_cast<double>(it.system_pos));
      b.push_back(truth_pos.at(it.id));
    }
    rc.tau = kendall_tau(a, b);
    rc.rho = spearman_rho(a, b);
    out.push_back(rc);
  }
  return out;
}

FiveNumber five_number_summary(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("five_number_summary: no values");
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back()};
}

std::vector<ProbeResult> probe_saliency(std::span<const std::string> tokens, std::span<const Substitution> subs,
                                        const EmbeddingTable& table, const EncoderParams& params,
                                        std::size_t max_length) {
  if (tokens.empty()) throw ArgumentError("empty question");
  const auto original = encode(tokens, table, params, max_length);
  std::vector<ProbeResult> out;
  for (const auto& s : subs) {
    if (s.position >= tokens.size())
      throw ArgumentError("probe: position " + std::to_string(s.position) + " out of range for " +
                          std::to_string(tokens.size()) + " tokens");
    ProbeResult r;
    r.tokens.assign(tokens.begin(), tokens.end());
    r.tokens[s.position] = s.token;
    for (const auto& t : r.tokens) {
      if (!r.text.empty()) r.text += ' ';
      r.text += t;
    }
    r.similarity = similarity(original, encode(r.tokens, table, params, max_length));
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ProbeResult& a, const ProbeResult& b) { return a.similarity > b.similarity; });
  return out;
}

}  // namespace simq
