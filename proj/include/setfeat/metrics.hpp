#pragma once

// Set-to-set distances between a query feature set and a class centroid set,
// all built on the negative cosine d(u, v) = -cos(u, v).

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setfeat/feature_set.hpp"
#include "setfeat/tensor.hpp"

namespace setfeat {

enum class MetricKind { match_sum, min_min, sum_min, top_m, hausdorff, concat };

inline constexpr MetricKind kAllMetrics[] = {MetricKind::match_sum, MetricKind::min_min, MetricKind::sum_min,
                                             MetricKind::top_m,     MetricKind::hausdorff, MetricKind::concat};

MetricKind parse_metric_kind(std::string_view name);
std::string_view to_string(MetricKind kind);

struct Metric {
  MetricKind kind = MetricKind::sum_min;
  std::size_t m = 1;      // top-m only
  bool directed = false;  // hausdorff only: query -> support direction alone

  void validate(std::size_t mappers) const;
};

/// Per class: M x D matrix of per-mapper support centroids.
using CentroidSet = std::vector<FeatureSet>;

/// Entry (i, j) = d(query row i, centroid row j).
struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

inline constexpr double kCosineEps = 1e-12;

/// -(u . v) / (max(|u|, eps) max(|v|, eps)).
double neg_cosine(std::span<const double> u, std::span<const double> v);

/// Mean feature set of each class. `labels[i]` is the class of `support[i]`.
CentroidSet centroids(std::span<const FeatureSet> support, std::span<const std::size_t> labels, std::size_t classes);

DistanceMatrix pairwise(const FeatureSet& query, const FeatureSet& centroid);

double match_sum(const DistanceMatrix& dm);
double min_min(const DistanceMatrix& dm);
double sum_min(const DistanceMatrix& dm);
/// Sum of the m smallest row minima (ties by lower row index).
double top_m(const DistanceMatrix& dm, std::size_t m);
double hausdorff(const DistanceMatrix& dm, bool directed = false);
double hausdorff(const FeatureSet& query, const FeatureSet& centroid, bool directed = false);
/// neg_cosine of the two flattened M*D vectors.
double concat_cosine(const FeatureSet& query, const FeatureSet& centroid);

double set_distance(const Metric& metric, const FeatureSet& query, const FeatureSet& centroid);

/// For each query row, the index of the nearest centroid row (first on ties).
std::vector<std::size_t> row_argmins(const DistanceMatrix& dm);

/// Independent straight-line reference for every metric; shares no code with the functions above.
namespace oracle {
double metric_oracle(const Metric& metric, const FeatureSet& query, const FeatureSet& centroid);
}

/// Differentiable distances for every (query, class) pair.
/// queries: Q x M x D, centroids: N x M x D  ->  Q x N.
template <class T>
Tensor<T> set_distances(const Metric& metric, const Tensor<T>& queries, const Tensor<T>& centroids);

}  // namespace setfeat
