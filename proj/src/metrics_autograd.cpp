#include "setfeat/metrics.hpp"
#include "setfeat/ops.hpp"

namespace setfeat {

template <class T>
Tensor<T> set_distances(const Metric& metric, const Tensor<T>& queries, const Tensor<T>& centroids) {
  if (queries.rank() != 3 || centroids.rank() != 3 || queries.dim(1) != centroids.dim(1) ||
      queries.dim(2) != centroids.dim(2))
    throw DimensionError("set_distances: queries " + to_string(queries.shape()) + " vs centroids " +
                         to_string(centroids.shape()));
  const std::size_t nq = queries.dim(0), m = queries.dim(1), d = queries.dim(2), nc = centroids.dim(0);
  metric.validate(m);
  const T eps = static_cast<T>(kCosineEps);
  using ops::Trans;

  if (metric.kind == MetricKind::concat) {
    const Tensor<T> qf = ops::l2_normalize(ops::reshape(queries, Shape{nq, m * d}), eps);
    const Tensor<T> cf = ops::l2_normalize(ops::reshape(centroids, Shape{nc, m * d}), eps);
    return ops::scale(ops::matmul(qf, cf, Trans::no, Trans::yes), T{-1});
  }

  const Tensor<T> qn = ops::l2_normalize(queries, eps);
  const Tensor<T> cn = ops::l2_normalize(centroids, eps);
  if (metric.kind == MetricKind::match_sum) {
    // sum_i -<q_i, c_i> is a dot product of the flattened row-normalised sets.
    const Tensor<T> qf = ops::reshape(qn, Shape{nq, m * d});
    const Tensor<T> cf = ops::reshape(cn, Shape{nc, m * d});
    return ops::scale(ops::matmul(qf, cf, Trans::no, Trans::yes), T{-1});
  }

  // dist[q, i, n, j] = d(query q row i, centroid n row j)
  const Tensor<T> gram =
      ops::matmul(ops::reshape(qn, Shape{nq * m, d}), ops::reshape(cn, Shape{nc * m, d}), Trans::no, Trans::yes);
  const Tensor<T> dist = ops::scale(ops::reshape(gram, Shape{nq, m, nc, m}), T{-1});
  switch (metric.kind) {
    case MetricKind::sum_min: return ops::sum_axis(ops::min_axis(dist, 3), 1);
    case MetricKind::min_min: return ops::min_axis(ops::min_axis(dist, 3), 1);
    case MetricKind::top_m: return ops::sum_smallest(ops::min_axis(dist, 3), 1, metric.m);
    case MetricKind::hausdorff: {
      const Tensor<T> forward = ops::max_axis(ops::min_axis(dist, 3), 1);
      if (metric.directed) return forward;
      const Tensor<T> backward = ops::max_axis(ops::min_axis(dist, 1), 2);
      return ops::maximum(forward, backward);
    }
    default: break;
  }
  throw ContractError("set_distances: unhandled metric");
}

template Tensor<float> set_distances(const Metric&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> set_distances(const Metric&, const Tensor<double>&, const Tensor<double>&);

}  // namespace setfeat
