#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "simq/eval.hpp"

using namespace simq;

namespace {

void label_pair(LabelSet& s, QuestionId q, QuestionId c, int yes, int no, int rejected_yes = 0) {
  int w = 0;
  for (int k = 0; k < yes; ++k) s.add({q, c, "w" + std::to_string(w++), 1, false});
  for (int k = 0; k < no; ++k) s.add({q, c, "w" + std::to_string(w++), 0, false});
  for (int k = 0; k < rejected_yes; ++k) s.add({q, c, "w" + std::to_string(w++), 1, true});
}

std::vector<double> iota_ranks(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

QueryResults results(QuestionId q, std::initializer_list<QuestionId> ids) {
  QueryResults r;
  r.query_id = q;
  std::size_t rank = 0;
  for (auto id : ids) r.results.push_back({id, 1.0 - 0.1 * static_cast<double>(rank), ++rank});
  return r;
}

}  // namespace

TEST_CASE("precision: majority vote per pair") {
  LabelSet unanimous;
  label_pair(unanimous, 1, 10, 5, 0);
  label_pair(unanimous, 1, 11, 3, 0);
  const std::vector<QueryResults> r{results(1, {10, 11})};
  CHECK(precision(unanimous, r) == 1.0);

  LabelSet split;
  label_pair(split, 1, 10, 11, 9);
  label_pair(split, 1, 11, 9, 11);
  CHECK(precision(split, r) == 0.5);

  // exactly half is not a majority; rejected workers do not count
  LabelSet tie;
  label_pair(tie, 1, 10, 2, 2, 5);
  label_pair(tie, 1, 11, 3, 2);
  CHECK(precision(tie, r) == 0.5);
  CHECK(tie.rejected() == 5);

  // order of the returned pairs does not matter
  const std::vector<QueryResults> reversed{results(1, {11, 10})};
  CHECK(precision(split, reversed) == precision(split, r));
}

TEST_CASE("precision: unlabeled pairs are listed") {
  LabelSet s;
  label_pair(s, 1, 10, 1, 0);
  const std::vector<QueryResults> r{results(1, {10, 12}), results(2, {10})};
  CHECK_THROWS_WITH_AS(precision(s, r), "unlabeled pairs: (1, 12) (2, 10)", DataError);
  CHECK_THROWS_AS(precision(s, std::vector<QueryResults>{}), DataError);
}

TEST_CASE("label_histogram: bins") {
  LabelSet one;
  label_pair(one, 1, 10, 20, 0);
  const auto h1 = label_histogram(one);
  CHECK(h1[9] == 1);
  CHECK(std::accumulate(h1.begin(), h1.end(), std::size_t{0}) == 1);

  LabelSet two;
  label_pair(two, 1, 10, 11, 9);  // 55%
  label_pair(two, 1, 11, 19, 1);  // 95%
  label_pair(two, 1, 12, 0, 4);   // 0%
  label_pair(two, 1, 13, 1, 9);   // 10% opens the second bin
  const auto h2 = label_histogram(two);
  CHECK(h2[5] == 1);
  CHECK(h2[9] == 1);
  CHECK(h2[0] == 1);
  CHECK(h2[1] == 1);
}

TEST_CASE("label_histogram: matches a known generating mixture") {
  // 2000 pairs of 10 workers: 30% of pairs at p=0.05, 70% at p=0.85
  Rng rng(5);
  LabelSet s;
  std::array<double, 10> expected{};
  auto binom = [](int n, int k, double p) {
    double c = 1;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    return c * std::pow(p, k) * std::pow(1 - p, n - k);
  };
  for (int yes = 0; yes <= 10; ++yes)
    expected[std::min(9, yes)] += 2000 * (0.3 * binom(10, yes, 0.05) + 0.7 * binom(10, yes, 0.85));
  for (QuestionId c = 0; c < 2000; ++c) {
    const double p = rng.bernoulli(0.3) ? 0.05 : 0.85;
    int yes = 0;
    for (int w = 0; w < 10; ++w) yes += rng.bernoulli(p);
    label_pair(s, 1, c, yes, 10 - yes);
  }
  const auto h = label_histogram(s);
  CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == 2000);
  for (std::size_t b = 0; b < 10; ++b) {
    // within four standard deviations of the multinomial count
    const double sd = std::sqrt(expected[b] * (1 - expected[b] / 2000));
    CAPTURE(b);
    CHECK(std::abs(static_cast<double>(h[b]) - expected[b]) <= 4 * sd + 1);
  }
}

TEST_CASE("kendall_tau and spearman_rho: examples") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> rev{5, 4, 3, 2, 1};
  const std::vector<double> swap{1, 2, 3, 5, 4};
  CHECK(kendall_tau(a, a) == 1.0);
  CHECK(kendall_tau(a, rev) == -1.0);
  CHECK(kendall_tau(a, swap) == 0.8);
  CHECK(spearman_rho(a, a) == 1.0);
  CHECK(spearman_rho(a, rev) == -1.0);
  CHECK(spearman_rho(a, swap) == 0.9);

  CHECK_THROWS_AS(kendall_tau(std::vector<double>{1}, std::vector<double>{1}), ArgumentError);
  CHECK_THROWS_AS(spearman_rho(std::vector<double>{1}, std::vector<double>{1}), ArgumentError);
  CHECK_THROWS_AS(kendall_tau(a, std::vector<double>{1, 2}), ArgumentError);
  CHECK_THROWS_AS(kendall_tau(a, std::vector<double>{1, 1, 3, 4, 5}), ArgumentError);
}

TEST_CASE("spearman_rho: ties take average ranks") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 30}) == std::vector<double>{1, 2.5, 2.5, 4});
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{1, 2, 2, 4};
  // d = (0, -0.5, 0.5, 0): 1 - 6 * 0.5 / 60
  CHECK(spearman_rho(a, b) == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("rank coefficients: antisymmetric under reversal") {
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + rng.index(8);
    auto a = iota_ranks(n), b = iota_ranks(n);
    for (std::size_t i = n; i > 1; --i) std::swap(b[i - 1], b[rng.index(i)]);
    std::vector<double> neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = static_cast<double>(n + 1) - b[i];
    CHECK(kendall_tau(a, neg) == doctest::Approx(-kendall_tau(a, b)).epsilon(1e-12));
    CHECK(spearman_rho(a, neg) == doctest::Approx(-spearman_rho(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("rank_correlations: system order against label order") {
  LabelSet s;
  label_pair(s, 1, 10, 9, 1);
  label_pair(s, 1, 11, 8, 2);
  label_pair(s, 1, 12, 7, 3);
  label_pair(s, 1, 13, 5, 5);
  label_pair(s, 1, 14, 6, 4);
  label_pair(s, 2, 20, 3, 1);
  label_pair(s, 2, 21, 3, 1);
  label_pair(s, 3, 30, 1, 0);
  const std::vector<QueryResults> r{results(1, {10, 11, 12, 13, 14}), results(2, {21, 20}), results(3, {30})};
  const auto rc = rank_correlations(s, r);
  REQUIRE(rc.size() == 2);
  CHECK(rc[0].query_id == 1);
  CHECK(rc[0].n == 5);
  CHECK(rc[0].tau == doctest::Approx(0.8));
  CHECK(rc[0].rho == doctest::Approx(0.9));
  CHECK_FALSE(rc[0].label_ties);
  // tied fractions fall back to candidate id: truth is (20, 21)
  CHECK(rc[1].label_ties);
  CHECK(rc[1].tau == -1.0);
}

TEST_CASE("five_number_summary") {
  const auto f = five_number_summary({3, 1, 4, 1, 5});
  CHECK(f.min == 1);
  CHECK(f.q1 == 1);
  CHECK(f.median == 3);
  CHECK(f.q3 == 4);
  CHECK(f.max == 5);
  const auto g = five_number_summary({1, 2, 3, 4});
  CHECK(g.q1 == 1.75);
  CHECK(g.median == 2.5);
  CHECK(g.q3 == 3.25);
  CHECK_THROWS_AS(five_number_summary({}), ArgumentError);
}

TEST_CASE("label and result files") {
  const auto s = LabelSet::parse(
      "{\"query_id\": 1, \"candidate_id\": 2, \"worker_id\": \"a\", \"label\": 1, \"rejected\": false}\n"
      "{\"query_id\": 1, \"candidate_id\": 2, \"worker_id\": \"b\", \"label\": 0, \"rejected\": true}\n"
      "{\"query_id\": 1, \"candidate_id\": 3, \"worker_id\": 7, \"label\": 0}\n");
  CHECK(s.size() == 2);
  CHECK(s.rejected() == 1);
  REQUIRE(s.find(1, 2));
  CHECK(*s.find(1, 2) == std::vector<int>{1});
  CHECK_THROWS_AS(LabelSet::parse(R"({"query_id": 1, "candidate_id": 2, "label": 3})"), DataError);

  const std::vector<QueryResults> r{results(1, {2, 3}), results(4, {})};
  CHECK(parse_results(serialize_results(r)).size() == 2);
  CHECK(parse_results(serialize_results(r))[0].results == r[0].results);
}

TEST_CASE("probe_saliency") {
  std::vector<std::string> toks{std::string(Vocabulary::kUnk), "my", "child", "baby", "has", "thrush", "cold"};
  EmbeddingTable t;
  t.vocab = Vocabulary::from_tokens(toks);
  t.input.resize(7, 3);
  Rng rng(1);
  for (Eigen::Index i = 0; i < t.input.size(); ++i) t.input.data()[i] = rng.uniform(-1, 1);
  EncoderParams p(3, 4);
  for (Eigen::Index i = 0; i < p.Wx.size(); ++i) p.Wx.data()[i] = rng.uniform(-1, 1);

  const std::vector<std::string> q{"my", "child", "has", "thrush"};
  const auto v = encode(q, t, p);
  const std::vector<Substitution> subs{{1, "baby"}, {3, "cold"}, {1, "child"}};
  const auto out = probe_saliency(q, subs, t, p);
  REQUIRE(out.size() == 3);
  for (std::size_t k = 1; k < out.size(); ++k) CHECK(out[k - 1].similarity >= out[k].similarity);
  bool saw_identity = false;
  for (const auto& r : out)
    if (r.text == "my child has thrush") {
      saw_identity = true;
      CHECK(r.similarity == doctest::Approx(v.v.squaredNorm()).epsilon(1e-15));
    }
  CHECK(saw_identity);
  CHECK_THROWS_AS(probe_saliency(q, std::vector<Substitution>{{4, "cold"}}, t, p), ArgumentError);
}
