#pragma once

// Differentiable tensor operations. Each op computes its forward value and,
// when gradient recording is on and an input requires a gradient, attaches a
// backward rule to the result.

#include <cstddef>
#include <span>
#include <vector>

#include "setfeat/kernels.hpp"
#include "setfeat/tensor.hpp"

namespace setfeat {

enum class Mode { train, eval };

/// Running statistics of a batch-normalization layer (not trainable).
template <class T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

namespace ops {

using kernels::Trans;

// Elementwise. Operands must have identical shapes, or one of them is a single-element scalar.
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <class T>
Tensor<T> relu(const Tensor<T>& x);
/// Elementwise max; ties select `a`.
template <class T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b);

/// Rank-2 product, or a batched product of two rank-3 tensors with equal leading extent.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, Trans ta = Trans::no, Trans tb = Trans::no);
/// Swaps the last two axes.
template <class T>
Tensor<T> transpose(const Tensor<T>& x);
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <class T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
template <class T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);

// Reductions remove `axis` from the shape.
template <class T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis);
template <class T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis);
template <class T>
Tensor<T> sum(const Tensor<T>& x);
template <class T>
Tensor<T> mean(const Tensor<T>& x);
/// Minimum along `axis`; the gradient flows to the first minimal element.
template <class T>
Tensor<T> min_axis(const Tensor<T>& x, std::size_t axis);
template <class T>
Tensor<T> max_axis(const Tensor<T>& x, std::size_t axis);
/// Sum of the `count` smallest entries along `axis` (ties by lower index).
template <class T>
Tensor<T> sum_smallest(const Tensor<T>& x, std::size_t axis, std::size_t count);

/// x / max(||x||, eps) along the last axis.
template <class T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps = T(1e-12));
template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
/// Mean over the batch of -log softmax(logits)[target].
template <class T>
Tensor<T> cross_entropy_logits(const Tensor<T>& logits, std::span<const std::size_t> targets);

/// y = x W^T + b for x of shape B x I, W of shape O x I; `bias` may be undefined.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// NCHW convolution with an O x C x k x k weight, k in {1, 3}, stride 1, 3x3 zero-padded.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
template <class T>
Tensor<T> maxpool2(const Tensor<T>& x);
/// Per-channel normalization over (N, H, W). Train mode uses batch statistics
/// and updates `stats`; eval mode uses `stats`.
template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                      Mode mode, T eps, T momentum);

}  // namespace ops
}  // namespace setfeat
