#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "setfeat/autograd.hpp"
#include "setfeat/errors.hpp"
#include "setfeat/grad_check.hpp"
#include "setfeat/metrics.hpp"
#include "setfeat/ops.hpp"
#include "test_util.hpp"

using namespace setfeat;
using setfeat::testing::random_set;

namespace {

FeatureSet identity_rows(std::size_t m) {
  FeatureSet f(m, m);
  for (std::size_t i = 0; i < m; ++i) f.at(i, i) = 1.0;
  return f;
}

DistanceMatrix matrix(std::size_t r, std::size_t c, std::vector<double> v) { return {r, c, std::move(v)}; }

DistanceMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  DistanceMatrix d{r, c, std::vector<double>(r * c)};
  for (auto& v : d.values) v = rng.uniform(-1, 1);
  return d;
}

Metric metric(MetricKind k, std::size_t m = 1) { return Metric{k, m, false}; }

}  // namespace

TEST(NegCosine, Examples) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{1, 2}, d{2, 4};
  EXPECT_DOUBLE_EQ(neg_cosine(a, a), -1.0);
  EXPECT_DOUBLE_EQ(neg_cosine(a, b), 0.0);
  EXPECT_NEAR(neg_cosine(c, d), -1.0, 1e-15);
}

TEST(NegCosine, ZeroVectorIsGuarded) {
  const std::vector<double> z{0, 0}, a{1, 0};
  EXPECT_EQ(neg_cosine(z, a), 0.0);
  EXPECT_FALSE(std::isnan(neg_cosine(z, z)));
}

TEST(Centroids, SingleShotIsTheSupportSet) {
  Rng rng(1);
  const std::vector<FeatureSet> s{random_set(3, 4, rng), random_set(3, 4, rng)};
  const std::vector<std::size_t> labels{1, 0};
  const auto c = centroids(s, labels, 2);
  EXPECT_EQ(c[0].values, s[1].values);
  EXPECT_EQ(c[1].values, s[0].values);
}

TEST(Centroids, OppositeSupportsCancel) {
  Rng rng(2);
  auto v = random_set(2, 3, rng);
  auto neg = v;
  for (auto& x : neg.values) x = -x;
  const std::vector<FeatureSet> s{v, neg};
  const std::vector<std::size_t> labels{0, 0};
  const CentroidSet c = centroids(s, labels, 1);
  for (double x : c[0].values) EXPECT_EQ(x, 0.0);
}

TEST(Centroids, FiveShotMatchesColumnMean) {
  Rng rng(3);
  std::vector<FeatureSet> s;
  for (int i = 0; i < 5; ++i) s.push_back(random_set(4, 6, rng));
  const std::vector<std::size_t> labels(5, 0);
  const auto c = centroids(s, labels, 1)[0];
  for (std::size_t k = 0; k < c.values.size(); ++k) {
    double mean = 0;
    for (const auto& f : s) mean += f.values[k];
    EXPECT_NEAR(c.values[k], mean / 5, 1e-7);
  }
}

TEST(Centroids, EmptyClassRejected) {
  Rng rng(4);
  const std::vector<FeatureSet> s{random_set(2, 2, rng)};
  const std::vector<std::size_t> labels{0};
  EXPECT_THROW(centroids(s, labels, 2), ContractError);
}

TEST(Pairwise, Examples) {
  const auto eye = identity_rows(4);
  const auto d = pairwise(eye, eye);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(d(i, j), i == j ? -1.0 : 0.0);
  Rng rng(5);
  const auto q = random_set(3, 4, rng), c = random_set(3, 4, rng);
  const auto r = pairwise(q, c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double dot = 0, nq = 0, nc = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        dot += q.at(i, k) * c.at(j, k);
        nq += q.at(i, k) * q.at(i, k);
        nc += c.at(j, k) * c.at(j, k);
      }
      EXPECT_NEAR(r(i, j), -dot / std::sqrt(nq * nc), 1e-7);
    }
}

TEST(Metrics, IdenticalUnitSets) {
  const auto eye = identity_rows(10);
  EXPECT_DOUBLE_EQ(match_sum(pairwise(eye, eye)), -10.0);
  EXPECT_DOUBLE_EQ(min_min(pairwise(eye, eye)), -1.0);
  EXPECT_DOUBLE_EQ(sum_min(pairwise(eye, eye)), -10.0);
  EXPECT_DOUBLE_EQ(hausdorff(eye, eye), -1.0);
  EXPECT_NEAR(concat_cosine(eye, eye), -1.0, 1e-15);
}

TEST(Metrics, HandBuiltMatrices) {
  EXPECT_EQ(match_sum(matrix(2, 2, {0, 0, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(min_min(matrix(2, 3, {0, 0, 0, 0, -0.9, 0})), -0.9);
  // row minima -0.5, -0.2, -0.7
  const auto d = matrix(3, 3, {-0.5, 0.1, 0.3, 0.2, -0.2, 0.0, 0.4, -0.7, 0.1});
  EXPECT_NEAR(top_m(d, 2), -1.2, 1e-15);
  EXPECT_NEAR(sum_min(d), -1.4, 1e-15);
  // column minima -0.5, -0.7, 0.0 ; max(row-min) = -0.2, max(col-min) = 0.0
  EXPECT_NEAR(hausdorff(d, true), -0.2, 1e-15);
  EXPECT_NEAR(hausdorff(d, false), 0.0, 1e-15);
}

TEST(Metrics, SingleMapperDegenerates) {
  Rng rng(6);
  const auto q = random_set(1, 5, rng), c = random_set(1, 5, rng);
  const auto d = pairwise(q, c);
  EXPECT_DOUBLE_EQ(sum_min(d), min_min(d));
  EXPECT_DOUBLE_EQ(sum_min(d), match_sum(d));
  EXPECT_NEAR(hausdorff(q, c), neg_cosine(q.row(0), c.row(0)), 1e-15);
}

TEST(Metrics, TopMEndpointsAndRange) {
  Rng rng(7);
  const auto d = random_matrix(5, 5, rng);
  EXPECT_DOUBLE_EQ(top_m(d, 1), min_min(d));
  EXPECT_NEAR(top_m(d, 5), sum_min(d), 1e-15);
  EXPECT_THROW(top_m(d, 0), IndexError);
  EXPECT_THROW(top_m(d, 6), IndexError);
  EXPECT_THROW(Metric(metric(MetricKind::top_m, 11)).validate(10), IndexError);
}

TEST(Metrics, TopMAddsNextSmallestRowMin) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto d = random_matrix(6, 6, rng);
    std::vector<double> mins(6);
    for (std::size_t i = 0; i < 6; ++i) mins[i] = *std::min_element(d.values.begin() + i * 6, d.values.begin() + i * 6 + 6);
    std::sort(mins.begin(), mins.end());
    for (std::size_t m = 1; m < 6; ++m) EXPECT_NEAR(top_m(d, m + 1), top_m(d, m) + mins[m], 1e-12);
  }
}

TEST(Metrics, ConcatIsOrderSensitive) {
  FeatureSet a(2, 2, {1, 0, 0.6, 0.8});
  FeatureSet swapped(2, 2, {0.6, 0.8, 1, 0});
  EXPECT_GT(concat_cosine(a, swapped), -1.0 + 1e-3);
  EXPECT_NEAR(concat_cosine(a, a), -1.0, 1e-15);
}

TEST(Metrics, RandomInstancesMatchOracle) {
  Rng rng(9);
  for (int t = 0; t < 300; ++t) {
    const std::size_t m = 1 + rng.below(8), d = 1 + rng.below(16);
    const auto q = random_set(m, d, rng), c = random_set(m, d, rng);
    for (MetricKind k : kAllMetrics) {
      for (bool directed : {false, true}) {
        const Metric mt{k, 1 + rng.below(m), directed};
        ASSERT_NEAR(set_distance(mt, q, c), oracle::metric_oracle(mt, q, c), 1e-9) << to_string(k);
      }
    }
  }
}

TEST(Metrics, OrderingInequalities) {
  Rng rng(10);
  for (int t = 0; t < 300; ++t) {
    const std::size_t m = 1 + rng.below(8);
    const auto d = pairwise(random_set(m, 5, rng), random_set(m, 5, rng));
    const double sm = sum_min(d);
    EXPECT_LE(sm, match_sum(d));
    EXPECT_LE(static_cast<double>(m) * min_min(d), sm);
    std::vector<double> mins(m);
    for (std::size_t i = 0; i < m; ++i) mins[i] = *std::min_element(d.values.begin() + i * m, d.values.begin() + (i + 1) * m);
    EXPECT_LE(sm, static_cast<double>(m) * *std::max_element(mins.begin(), mins.end()) + 1e-15);
  }
}

TEST(Metrics, ParseAndNames) {
  for (MetricKind k : kAllMetrics) EXPECT_EQ(parse_metric_kind(to_string(k)), k);
  EXPECT_THROW(parse_metric_kind("chamfer"), ConfigError);
}

TEST(Metrics, RowArgminFirstOnTies) {
  const auto d = matrix(2, 3, {0.1, -0.5, -0.5, 0.0, 0.0, 0.0});
  EXPECT_EQ(row_argmins(d), (std::vector<std::size_t>{1, 0}));
}

// ---- differentiable path ---------------------------------------------------------

namespace {

Tensor<double> to_tensor(const std::vector<FeatureSet>& sets) {
  const std::size_t m = sets[0].rows, d = sets[0].dim;
  Tensor<double> t(Shape{sets.size(), m, d});
  for (std::size_t n = 0; n < sets.size(); ++n) std::copy(sets[n].values.begin(), sets[n].values.end(), t.data().begin() + n * m * d);
  return t;
}

}  // namespace

TEST(SetDistances, MatchesFastPathForEveryMetric) {
  Rng rng(11);
  std::vector<FeatureSet> qs, cs;
  for (int i = 0; i < 4; ++i) qs.push_back(random_set(5, 6, rng));
  for (int i = 0; i < 3; ++i) cs.push_back(random_set(5, 6, rng));
  const auto qt = to_tensor(qs), ct = to_tensor(cs);
  for (MetricKind k : kAllMetrics)
    for (bool directed : {false, true}) {
      const Metric mt{k, 3, directed};
      const auto dist = set_distances(mt, qt, ct);
      ASSERT_EQ(dist.shape(), (Shape{4, 3}));
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t n = 0; n < 3; ++n) EXPECT_NEAR(dist[i * 3 + n], set_distance(mt, qs[i], cs[n]), 1e-12) << to_string(k);
    }
}

TEST(SetDistances, GradientsPassFiniteDifferences) {
  Rng rng(12);
  for (MetricKind k : kAllMetrics) {
    std::vector<FeatureSet> qs{random_set(4, 5, rng), random_set(4, 5, rng)}, cs{random_set(4, 5, rng), random_set(4, 5, rng), random_set(4, 5, rng)};
    auto q = to_tensor(qs), c = to_tensor(cs);
    Tensor<double> w(Shape{2, 3});
    for (auto& v : w.data()) v = rng.normal();
    const Metric mt{k, 2, false};
    std::vector<Tensor<double>> params{q, c};
    const auto rep = grad_check([=] { return ops::sum(ops::mul(set_distances(mt, q, c), w)); }, params,
                                GradCheckOptions{1e-5, 1e-4, 0, 1});
    EXPECT_TRUE(rep.pass) << to_string(k) << " err " << rep.max_rel_err;
  }
}

TEST(SetDistances, ShapeMismatchRejected) {
  EXPECT_THROW(set_distances(Metric{}, Tensor<double>(Shape{2, 3, 4}), Tensor<double>(Shape{2, 2, 4})), DimensionError);
}
