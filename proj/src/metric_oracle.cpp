// Brute-force reference metrics. Deliberately written with plain loops and
// local helpers only, so agreement with metrics.cpp is meaningful.

#include <cmath>
#include <vector>

#include "setfeat/metrics.hpp"

namespace setfeat::oracle {

namespace {

double cosine_distance(const FeatureSet& a, std::size_t i, const FeatureSet& b, std::size_t j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.dim; ++k) {
    const double x = a.values[i * a.dim + k];
    const double y = b.values[j * b.dim + k];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12) na = 1e-12;
  if (nb < 1e-12) nb = 1e-12;
  return -dot / (na * nb);
}

}  // namespace

double metric_oracle(const Metric& metric, const FeatureSet& q, const FeatureSet& c) {
  const std::size_t rows = q.rows, cols = c.rows;
  switch (metric.kind) {
    case MetricKind::match_sum: {
      double total = 0.0;
      for (std::size_t i = 0; i < rows; ++i) total += cosine_distance(q, i, c, i);
      return total;
    }
    case MetricKind::min_min: {
      double best = 1e300;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
          const double d = cosine_distance(q, i, c, j);
          if (d < best) best = d;
        }
      return best;
    }
    case MetricKind::sum_min: {
      double total = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        double best = 1e300;
        for (std::size_t j = 0; j < cols; ++j) {
          const double d = cosine_distance(q, i, c, j);
          if (d < best) best = d;
        }
        total += best;
      }
      return total;
    }
    case MetricKind::top_m: {
      std::vector<double> mins;
      for (std::size_t i = 0; i < rows; ++i) {
        double best = 1e300;
        for (std::size_t j = 0; j < cols; ++j) {
          const double d = cosine_distance(q, i, c, j);
          if (d < best) best = d;
        }
        mins.push_back(best);
      }
      // selection sort, ascending
      for (std::size_t a = 0; a < mins.size(); ++a)
        for (std::size_t b = a + 1; b < mins.size(); ++b)
          if (mins[b] < mins[a]) {
            const double t = mins[a];
            mins[a] = mins[b];
            mins[b] = t;
          }
      double total = 0.0;
      for (std::size_t a = 0; a < metric.m; ++a) total += mins[a];
      return total;
    }
    case MetricKind::hausdorff: {
      double forward = -1e300;
      for (std::size_t i = 0; i < rows; ++i) {
        double best = 1e300;
        for (std::size_t j = 0; j < cols; ++j) {
          const double d = cosine_distance(q, i, c, j);
          if (d < best) best = d;
        }
        if (best > forward) forward = best;
      }
      if (metric.directed) return forward;
      double backward = -1e300;
      for (std::size_t j = 0; j < cols; ++j) {
        double best = 1e300;
        for (std::size_t i = 0; i < rows; ++i) {
          const double d = cosine_distance(q, i, c, j);
          if (d < best) best = d;
        }
        if (best > backward) backward = best;
      }
      return forward > backward ? forward : backward;
    }
    case MetricKind::concat: {
      FeatureSet qf(1, q.rows * q.dim, q.values);
      FeatureSet cf(1, c.rows * c.dim, c.values);
      return cosine_distance(qf, 0, cf, 0);
    }
  }
  return 0.0;
}

}  // namespace setfeat::oracle
