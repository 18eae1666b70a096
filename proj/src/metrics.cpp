#include "setfeat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace setfeat {

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "match-sum") return MetricKind::match_sum;
  if (name == "min-min") return MetricKind::min_min;
  if (name == "sum-min") return MetricKind::sum_min;
  if (name == "top-m") return MetricKind::top_m;
  if (name == "hausdorff") return MetricKind::hausdorff;
  if (name == "concat") return MetricKind::concat;
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected match-sum|min-min|sum-min|top-m|hausdorff|concat)");
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::match_sum: return "match-sum";
    case MetricKind::min_min: return "min-min";
    case MetricKind::sum_min: return "sum-min";
    case MetricKind::top_m: return "top-m";
    case MetricKind::hausdorff: return "hausdorff";
    case MetricKind::concat: return "concat";
  }
  return "?";
}

void Metric::validate(std::size_t mappers) const {
  if (kind == MetricKind::top_m && (m < 1 || m > mappers))
    throw IndexError("top-m: m = " + std::to_string(m) + " outside [1, " + std::to_string(mappers) + "]");
}

double neg_cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DimensionError("neg_cosine: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
  const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  return -dot / (std::max(nu, kCosineEps) * std::max(nv, kCosineEps));
}

CentroidSet centroids(std::span<const FeatureSet> support, std::span<const std::size_t> labels, std::size_t classes) {
  if (support.size() != labels.size()) throw ContractError("centroids: one label per support set required");
  if (support.empty()) throw ContractError("centroids: empty support");
  const std::size_t rows = support[0].rows, dim = support[0].dim;
  CentroidSet out(classes, FeatureSet(rows, dim));
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (labels[i] >= classes) throw IndexError("centroids: label " + std::to_string(labels[i]) + " out of range");
    if (support[i].rows != rows || support[i].dim != dim) throw DimensionError("centroids: feature sets differ in shape");
    auto& c = out[labels[i]];
    for (std::size_t k = 0; k < c.values.size(); ++k) c.values[k] += support[i].values[k];
    ++counts[labels[i]];
  }
  for (std::size_t n = 0; n < classes; ++n) {
    if (counts[n] == 0) throw ContractError("centroids: class " + std::to_string(n) + " has no support examples");
    for (auto& v : out[n].values) v /= static_cast<double>(counts[n]);
    out[n].mapper_ids = support[0].mapper_ids;
  }
  return out;
}

DistanceMatrix pairwise(const FeatureSet& query, const FeatureSet& centroid) {
  if (query.dim != centroid.dim)
    throw DimensionError("pairwise: feature widths " + std::to_string(query.dim) + " and " +
                         std::to_string(centroid.dim));
  DistanceMatrix dm{query.rows, centroid.rows, std::vector<double>(query.rows * centroid.rows)};
  for (std::size_t i = 0; i < query.rows; ++i)
    for (std::size_t j = 0; j < centroid.rows; ++j) dm.values[i * dm.cols + j] = neg_cosine(query.row(i), centroid.row(j));
  return dm;
}

namespace {

std::vector<double> row_minima(const DistanceMatrix& dm) {
  std::vector<double> mins(dm.rows);
  for (std::size_t i = 0; i < dm.rows; ++i) {
    const auto first = dm.values.begin() + static_cast<std::ptrdiff_t>(i * dm.cols);
    mins[i] = *std::min_element(first, first + static_cast<std::ptrdiff_t>(dm.cols));
  }
  return mins;
}

}  // namespace

double match_sum(const DistanceMatrix& dm) {
  if (dm.rows != dm.cols) throw DimensionError("match_sum: distance matrix must be square");
  double s = 0.0;
  for (std::size_t i = 0; i < dm.rows; ++i) s += dm(i, i);
  return s;
}

double min_min(const DistanceMatrix& dm) { return *std::min_element(dm.values.begin(), dm.values.end()); }

double sum_min(const DistanceMatrix& dm) {
  const auto mins = row_minima(dm);
  return std::accumulate(mins.begin(), mins.end(), 0.0);
}

double top_m(const DistanceMatrix& dm, std::size_t m) {
  if (m < 1 || m > dm.rows)
    throw IndexError("top_m: m = " + std::to_string(m) + " outside [1, " + std::to_string(dm.rows) + "]");
  const auto mins = row_minima(dm);
  std::vector<std::size_t> order(mins.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mins[a] < mins[b]; });
  std::vector<bool> keep(mins.size(), false);
  for (std::size_t r = 0; r < m; ++r) keep[order[r]] = true;
  // row order, as in sum_min, so top_M and sum_min agree to the last bit
  double s = 0.0;
  for (std::size_t i = 0; i < mins.size(); ++i)
    if (keep[i]) s += mins[i];
  return s;
}

double hausdorff(const DistanceMatrix& dm, bool directed) {
  const auto mins = row_minima(dm);
  const double forward = *std::max_element(mins.begin(), mins.end());
  if (directed) return forward;
  double backward = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < dm.cols; ++j) {
    double col_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dm.rows; ++i) col_min = std::min(col_min, dm(i, j));
    backward = std::max(backward, col_min);
  }
  return std::max(forward, backward);
}

double hausdorff(const FeatureSet& query, const FeatureSet& centroid, bool directed) {
  return hausdorff(pairwise(query, centroid), directed);
}

double concat_cosine(const FeatureSet& query, const FeatureSet& centroid) {
  if (query.values.size() != centroid.values.size())
    throw DimensionError("concat_cosine: feature sets differ in size");
  return neg_cosine(query.values, centroid.values);
}

double set_distance(const Metric& metric, const FeatureSet& query, const FeatureSet& centroid) {
  if (metric.kind == MetricKind::concat) return concat_cosine(query, centroid);
  const DistanceMatrix dm = pairwise(query, centroid);
  switch (metric.kind) {
    case MetricKind::match_sum: return match_sum(dm);
    case MetricKind::min_min: return min_min(dm);
    case MetricKind::sum_min: return sum_min(dm);
    case MetricKind::top_m: return top_m(dm, metric.m);
    case MetricKind::hausdorff: return hausdorff(dm, metric.directed);
    case MetricKind::concat: break;
  }
  return concat_cosine(query, centroid);
}

std::vector<std::size_t> row_argmins(const DistanceMatrix& dm) {
  std::vector<std::size_t> out(dm.rows);
  for (std::size_t i = 0; i < dm.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < dm.cols; ++j)
      if (dm(i, j) < dm(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

}  // namespace setfeat
