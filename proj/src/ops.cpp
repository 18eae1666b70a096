#include "setfeat/ops.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace setfeat::ops {

namespace {

template <class T>
bool tracks(const Tensor<T>& x) {
  return x.defined() && x.requires_grad();
}

template <class T>
bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return tracks(*t); });
}

template <class T, class Fn>
void record(Tensor<T>& out, std::string_view op, std::vector<Tensor<T>> inputs, Fn&& apply) {
  auto* s = out.storage();
  s->requires_grad = true;
  s->grad_fn = std::make_shared<GradFn<T>>(GradFn<T>{op, std::move(inputs), std::forward<Fn>(apply)});
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, std::string_view op) {
  if (axis >= shape.size())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out.push_back(shape[i]);
  return out;
}

enum class Binary { add, sub, mul };

template <class T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary kind, std::string_view op) {
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
  const Shape& shape = a_scalar ? b.shape() : a.shape();
  auto out = Tensor<T>::uninitialized(shape);
  const auto av = a.data();
  const auto bv = b.data();
  auto ov = out.data();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) {
    const T x = av[a_scalar ? 0 : i];
    const T y = bv[b_scalar ? 0 : i];
    ov[i] = kind == Binary::add ? x + y : kind == Binary::sub ? x - y : x * y;
  }
  if (needs_grad({&a, &b})) {
    record(out, op, {a, b},
           [as = a.storage(), bs = b.storage(), a_scalar, b_scalar, kind](std::span<const T> g) {
             const std::size_t n = g.size();
             if (as->requires_grad) {
               auto ga = as->grad_buffer();
               for (std::size_t i = 0; i < n; ++i) {
                 const T d = kind == Binary::mul ? g[i] * bs->data[b_scalar ? 0 : i] : g[i];
                 ga[a_scalar ? 0 : i] += d;
               }
             }
             if (bs->requires_grad) {
               auto gb = bs->grad_buffer();
               for (std::size_t i = 0; i < n; ++i) {
                 const T d = kind == Binary::mul ? g[i] * as->data[a_scalar ? 0 : i]
                             : kind == Binary::sub ? -g[i]
                                                   : g[i];
                 gb[b_scalar ? 0 : i] += d;
               }
             }
           });
  }
  return out;
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::add, "add");
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::sub, "sub");
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::mul, "mul");
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  auto out = Tensor<T>::uninitialized(x.shape());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(), [factor](T v) { return v * factor; });
  if (needs_grad({&x})) {
    record(out, "scale", {x}, [xs = x.storage(), factor](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  auto out = Tensor<T>::uninitialized(x.shape());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(), [](T v) { return v > T{0} ? v : T{0}; });
  if (needs_grad({&x})) {
    record(out, "relu", {x}, [xs = x.storage()](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xs->data[i] > T{0}) gx[i] += g[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_mismatch("maximum", a.shape(), b.shape());
  auto out = Tensor<T>::uninitialized(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] >= b[i] ? a[i] : b[i];
  if (needs_grad({&a, &b})) {
    record(out, "maximum", {a, b}, [as = a.storage(), bs = b.storage()](std::span<const T> g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        auto* winner = as->data[i] >= bs->data[i] ? as : bs;
        if (winner->requires_grad) winner->grad_buffer()[i] += g[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, Trans ta, Trans tb) {
  const std::size_t rank = a.rank();
  if ((rank != 2 && rank != 3) || b.rank() != rank || (rank == 3 && a.dim(0) != b.dim(0)))
    shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t batch = rank == 3 ? a.dim(0) : 1;
  const std::size_t ar = a.dim(rank - 2), ac = a.dim(rank - 1);
  const std::size_t br = b.dim(rank - 2), bc = b.dim(rank - 1);
  const std::size_t m = ta == Trans::no ? ar : ac;
  const std::size_t k = ta == Trans::no ? ac : ar;
  const std::size_t kb = tb == Trans::no ? br : bc;
  const std::size_t n = tb == Trans::no ? bc : br;
  if (k != kb) shape_mismatch("matmul", a.shape(), b.shape());

  Shape shape = rank == 3 ? Shape{batch, m, n} : Shape{m, n};
  auto out = Tensor<T>::uninitialized(shape);
  const std::size_t a_step = ar * ac, b_step = br * bc, c_step = m * n;
  const auto items = static_cast<long>(batch);
#pragma omp parallel for schedule(static) if (batch > 1 && !omp_in_parallel() && batch * m * n * k > 65536)
  for (long i = 0; i < items; ++i) {
    const auto bi = static_cast<std::size_t>(i);
    kernels::gemm(ta, tb, m, n, k, T{1}, a.data().data() + bi * a_step, ac, b.data().data() + bi * b_step, bc, T{0},
                  out.data().data() + bi * c_step, n);
  }

  if (needs_grad({&a, &b})) {
    record(out, "matmul", {a, b},
           [as = a.storage(), bs = b.storage(), ta, tb, batch, m, n, k, ar, ac, br, bc](std::span<const T> g) {
             using kernels::gemm;
             const Trans no = Trans::no, yes = Trans::yes;
             const std::size_t a_step = ar * ac, b_step = br * bc, c_step = m * n;
             for (std::size_t i = 0; i < batch; ++i) {
               const T* G = g.data() + i * c_step;
               const T* A = as->data.data() + i * a_step;
               const T* B = bs->data.data() + i * b_step;
               if (as->requires_grad) {
                 T* dA = as->grad_buffer().data() + i * a_step;
                 if (ta == no) {
                   // dA (m x k) = G op(B)^T
                   gemm(no, tb == no ? yes : no, m, k, n, T{1}, G, n, B, bc, T{1}, dA, ac);
                 } else {
                   // dA (k x m) = op(B) G^T
                   gemm(tb, yes, k, m, n, T{1}, B, bc, G, n, T{1}, dA, ac);
                 }
               }
               if (bs->requires_grad) {
                 T* dB = bs->grad_buffer().data() + i * b_step;
                 if (tb == no) {
                   // dB (k x n) = op(A)^T G
                   gemm(ta == no ? yes : no, no, k, n, m, T{1}, A, ac, G, n, T{1}, dB, bc);
                 } else {
                   // dB (n x k) = G^T op(A)
                   gemm(yes, ta, n, k, m, T{1}, G, n, A, ac, T{1}, dB, bc);
                 }
               }
             }
           });
  }
  return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() < 2) throw DimensionError("transpose: need rank >= 2, got " + to_string(x.shape()));
  Shape shape = x.shape();
  const std::size_t rows = shape[shape.size() - 2], cols = shape[shape.size() - 1];
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  const std::size_t batch = x.size() / (rows * cols);
  auto out = Tensor<T>::uninitialized(shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[b * rows * cols + c * rows + r] = x[b * rows * cols + r * cols + c];
  if (needs_grad({&x})) {
    record(out, "transpose", {x}, [xs = x.storage(), batch, rows, cols](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gx[b * rows * cols + r * cols + c] += g[b * rows * cols + c * rows + r];
    });
  }
  return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) shape_mismatch("reshape", x.shape(), shape);
  auto out = Tensor<T>::uninitialized(std::move(shape));
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  if (needs_grad({&x})) {
    record(out, "reshape", {x}, [xs = x.storage()](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  Shape shape = first;
  split_at(first, axis, "concat");
  shape[axis] = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) shape_mismatch("concat", first, probe);
    probe[axis] = first[axis];
    if (probe != first) shape_mismatch("concat", first, p.shape());
    shape[axis] += p.dim(axis);
  }
  const AxisSplit s = split_at(shape, axis, "concat");
  auto out = Tensor<T>::uninitialized(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis) * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(p.data().data() + o * len, len, out.data().data() + o * s.len * s.inner + offset);
    offset += len;
  }
  bool any = false;
  for (const auto& p : parts) any = any || tracks(p);
  if (any && grad_enabled()) {
    std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
    std::vector<TensorStorage<T>*> stores;
    for (const auto& p : parts) stores.push_back(p.storage());
    record(out, "concat", std::move(inputs), [stores, s, axis](std::span<const T> g) {
      std::size_t offset = 0;
      for (auto* ps : stores) {
        const std::size_t len = ps->shape[axis] * s.inner;
        if (ps->requires_grad) {
          auto gp = ps->grad_buffer();
          for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < len; ++i) gp[o * len + i] += g[o * s.len * s.inner + offset + i];
        }
        offset += len;
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_at(x.shape(), axis, "slice");
  if (begin >= end || end > s.len)
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                         to_string(x.shape()));
  Shape shape = x.shape();
  shape[axis] = end - begin;
  auto out = Tensor<T>::uninitialized(shape);
  const std::size_t len = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(x.data().data() + (o * s.len + begin) * s.inner, len, out.data().data() + o * len);
  if (needs_grad({&x})) {
    record(out, "slice", {x}, [xs = x.storage(), s, begin, len](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < len; ++i) gx[(o * s.len + begin) * s.inner + i] += g[o * len + i];
    });
  }
  return out;
}

namespace {

template <class T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::size_t axis, T factor, std::string_view op) {
  const AxisSplit s = split_at(x.shape(), axis, op);
  auto out = Tensor<T>::uninitialized(drop_axis(x.shape(), axis));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      T acc{0};
      for (std::size_t l = 0; l < s.len; ++l) acc += x[(o * s.len + l) * s.inner + i];
      out[o * s.inner + i] = acc * factor;
    }
  if (needs_grad({&x})) {
    record(out, op, {x}, [xs = x.storage(), s, factor](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
          for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.len + l) * s.inner + i] += factor * g[o * s.inner + i];
    });
  }
  return out;
}

template <class T, class Better>
Tensor<T> reduce_select(const Tensor<T>& x, std::size_t axis, Better better, std::string_view op) {
  const AxisSplit s = split_at(x.shape(), axis, op);
  auto out = Tensor<T>::uninitialized(drop_axis(x.shape(), axis));
  std::vector<std::size_t> picked(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = o * s.len * s.inner + i;
      for (std::size_t l = 1; l < s.len; ++l) {
        const std::size_t idx = (o * s.len + l) * s.inner + i;
        if (better(x[idx], x[best])) best = idx;
      }
      out[o * s.inner + i] = x[best];
      picked[o * s.inner + i] = best;
    }
  if (needs_grad({&x})) {
    record(out, op, {x}, [xs = x.storage(), picked = std::move(picked)](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t j = 0; j < g.size(); ++j) gx[picked[j]] += g[j];
    });
  }
  return out;
}

}  // namespace

template <class T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis) {
  return reduce_sum(x, axis, T{1}, "sum_axis");
}

template <class T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) split_at(x.shape(), axis, "mean_axis");
  return reduce_sum(x, axis, T{1} / static_cast<T>(x.dim(axis)), "mean_axis");
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  return reduce_sum(reshape(x, Shape{x.size()}), 0, T{1}, "sum");
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return reduce_sum(reshape(x, Shape{x.size()}), 0, T{1} / static_cast<T>(x.size()), "mean");
}

template <class T>
Tensor<T> min_axis(const Tensor<T>& x, std::size_t axis) {
  return reduce_select(x, axis, [](T a, T b) { return a < b; }, "min_axis");
}

template <class T>
Tensor<T> max_axis(const Tensor<T>& x, std::size_t axis) {
  return reduce_select(x, axis, [](T a, T b) { return a > b; }, "max_axis");
}

template <class T>
Tensor<T> sum_smallest(const Tensor<T>& x, std::size_t axis, std::size_t count) {
  const AxisSplit s = split_at(x.shape(), axis, "sum_smallest");
  if (count < 1 || count > s.len)
    throw IndexError("sum_smallest: count " + std::to_string(count) + " outside [1, " + std::to_string(s.len) + "]");
  auto out = Tensor<T>::uninitialized(drop_axis(x.shape(), axis));
  std::vector<std::size_t> picked(s.outer * s.inner * count);
  std::vector<std::size_t> order(s.len);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * s.len + l) * s.inner + i; };
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[at(l)] < x[at(r)]; });
      T acc{0};
      for (std::size_t c = 0; c < count; ++c) {
        acc += x[at(order[c])];
        picked[(o * s.inner + i) * count + c] = at(order[c]);
      }
      out[o * s.inner + i] = acc;
    }
  if (needs_grad({&x})) {
    record(out, "sum_smallest", {x}, [xs = x.storage(), picked = std::move(picked), count](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t j = 0; j < g.size(); ++j)
        for (std::size_t c = 0; c < count; ++c) gx[picked[j * count + c]] += g[j];
    });
  }
  return out;
}

template <class T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps) {
  if (x.rank() < 1) throw DimensionError("l2_normalize: scalar input");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  auto out = Tensor<T>::uninitialized(x.shape());
  std::vector<T> denom(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T sq{0};
    for (std::size_t j = 0; j < width; ++j) sq += x[r * width + j] * x[r * width + j];
    denom[r] = std::max(std::sqrt(sq), eps);
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = x[r * width + j] / denom[r];
  }
  if (needs_grad({&x})) {
    record(out, "l2_normalize", {x},
           [xs = x.storage(), ys = out.storage(), denom = std::move(denom), width, rows, eps](std::span<const T> g) {
             auto gx = xs->grad_buffer();
             for (std::size_t r = 0; r < rows; ++r) {
               const T* y = ys->data.data() + r * width;
               const T* gr = g.data() + r * width;
               if (denom[r] > eps) {
                 T dot{0};
                 for (std::size_t j = 0; j < width; ++j) dot += y[j] * gr[j];
                 for (std::size_t j = 0; j < width; ++j) gx[r * width + j] += (gr[j] - y[j] * dot) / denom[r];
               } else {
                 for (std::size_t j = 0; j < width; ++j) gx[r * width + j] += gr[j] / eps;
               }
             }
           });
  }
  return out;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis, "softmax");
  auto out = Tensor<T>::uninitialized(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * s.len + l) * s.inner + i; };
      T hi = x[at(0)];
      for (std::size_t l = 1; l < s.len; ++l) hi = std::max(hi, x[at(l)]);
      T total{0};
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(x[at(l)] - hi);
        out[at(l)] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[at(l)] /= total;
    }
  if (needs_grad({&x})) {
    // The output storage is captured raw: the grad_fn lives inside it.
    record(out, "softmax", {x}, [xs = x.storage(), ys = out.storage(), s](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      const auto& y = ys->data;
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          auto at = [&](std::size_t l) { return (o * s.len + l) * s.inner + i; };
          T dot{0};
          for (std::size_t l = 0; l < s.len; ++l) dot += g[at(l)] * y[at(l)];
          for (std::size_t l = 0; l < s.len; ++l) gx[at(l)] += y[at(l)] * (g[at(l)] - dot);
        }
    });
  }
  return out;
}

template <class T>
Tensor<T> cross_entropy_logits(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size())
    throw DimensionError("cross_entropy_logits: logits " + to_string(logits.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  for (std::size_t t : targets)
    if (t >= classes)
      throw IndexError("cross_entropy_logits: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(classes) + ")");
  std::vector<T> probs(batch * classes);
  T loss{0};
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = logits.data().data() + b * classes;
    const T hi = *std::max_element(row, row + classes);
    T total{0};
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - hi);
    const T log_z = hi + std::log(total);
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - log_z);
    loss += log_z - row[targets[b]];
  }
  Tensor<T> out = Tensor<T>::scalar(loss / static_cast<T>(batch));
  if (needs_grad({&logits})) {
    std::vector<std::size_t> labels(targets.begin(), targets.end());
    record(out, "cross_entropy_logits", {logits},
           [ls = logits.storage(), probs = std::move(probs), labels = std::move(labels), batch,
            classes](std::span<const T> g) {
             auto gl = ls->grad_buffer();
             const T k = g[0] / static_cast<T>(batch);
             for (std::size_t b = 0; b < batch; ++b)
               for (std::size_t c = 0; c < classes; ++c)
                 gl[b * classes + c] += k * (probs[b * classes + c] - (c == labels[b] ? T{1} : T{0}));
           });
  }
  return out;
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) shape_mismatch("linear", x.shape(), weight.shape());
  const std::size_t batch = x.dim(0), in = x.dim(1), outs = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{outs}) shape_mismatch("linear", weight.shape(), bias.shape());
  auto out = Tensor<T>::uninitialized(Shape{batch, outs});
  kernels::gemm(Trans::no, Trans::yes, batch, outs, in, T{1}, x.data().data(), in, weight.data().data(), in, T{0},
                out.data().data(), outs);
  if (bias.defined())
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < outs; ++o) out[b * outs + o] += bias[o];
  if (needs_grad({&x, &weight, &bias})) {
    std::vector<Tensor<T>> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    record(out, "linear", std::move(inputs),
           [xs = x.storage(), ws = weight.storage(), bs = bias.defined() ? bias.storage() : nullptr, batch, in,
            outs](std::span<const T> g) {
             if (xs->requires_grad)
               kernels::gemm(Trans::no, Trans::no, batch, in, outs, T{1}, g.data(), outs, ws->data.data(), in, T{1},
                             xs->grad_buffer().data(), in);
             if (ws->requires_grad)
               kernels::gemm(Trans::yes, Trans::no, outs, in, batch, T{1}, g.data(), outs, xs->data.data(), in, T{1},
                             ws->grad_buffer().data(), in);
             if (bs != nullptr && bs->requires_grad) {
               auto gb = bs->grad_buffer();
               for (std::size_t b = 0; b < batch; ++b)
                 for (std::size_t o = 0; o < outs; ++o) gb[o] += g[b * outs + o];
             }
           });
  }
  return out;
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 4 || weight.rank() != 4) shape_mismatch("conv2d", x.shape(), weight.shape());
  const std::size_t kernel = weight.dim(2);
  if ((kernel != 1 && kernel != 3) || weight.dim(3) != kernel)
    throw DimensionError("conv2d: kernel must be 1x1 or 3x3, got weight " + to_string(weight.shape()));
  if (x.dim(1) != weight.dim(1)) shape_mismatch("conv2d", x.shape(), weight.shape());
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), cout = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{cout}) shape_mismatch("conv2d", weight.shape(), bias.shape());
  auto out = Tensor<T>::uninitialized(Shape{batch, cout, h, w});
  kernels::conv2d_forward(x.data().data(), batch, cin, h, w, weight.data().data(), cout, kernel,
                          bias.defined() ? bias.data().data() : nullptr, out.data().data());
  if (needs_grad({&x, &weight, &bias})) {
    std::vector<Tensor<T>> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    record(out, "conv2d", std::move(inputs),
           [xs = x.storage(), ws = weight.storage(), bs = bias.defined() ? bias.storage() : nullptr, batch, cin, h, w,
            cout, kernel](std::span<const T> g) {
             kernels::conv2d_backward(xs->data.data(), batch, cin, h, w, ws->data.data(), cout, kernel, g.data(),
                                      xs->requires_grad ? xs->grad_buffer().data() : nullptr,
                                      ws->requires_grad ? ws->grad_buffer().data() : nullptr,
                                      bs != nullptr && bs->requires_grad ? bs->grad_buffer().data() : nullptr);
           });
  }
  return out;
}

template <class T>
Tensor<T> maxpool2(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("maxpool2: expected NCHW input, got " + to_string(x.shape()));
  const std::size_t h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw DimensionError("maxpool2: odd spatial extent in " + to_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1);
  auto out = Tensor<T>::uninitialized(Shape{x.dim(0), x.dim(1), h / 2, w / 2});
  std::vector<std::size_t> argmax(out.size());
  kernels::maxpool2_forward(x.data().data(), planes, h, w, out.data().data(), argmax.data());
  if (needs_grad({&x})) {
    record(out, "maxpool2", {x}, [xs = x.storage(), argmax = std::move(argmax)](std::span<const T> g) {
      auto gx = xs->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                      Mode mode, T eps, T momentum) {
  if (x.rank() != 4) throw DimensionError("batchnorm2d: expected NCHW input, got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  const Shape cshape{channels};
  if (gamma.shape() != cshape) shape_mismatch("batchnorm2d", x.shape(), gamma.shape());
  if (beta.shape() != cshape) shape_mismatch("batchnorm2d", x.shape(), beta.shape());
  const std::size_t count = batch * plane;
  if (mode == Mode::train && count <= 1)
    throw ContractError("batchnorm2d: degenerate statistics, train mode needs more than one value per channel");

  std::vector<T> mean(channels), invstd(channels);
  if (mode == Mode::train) {
    const auto cs = static_cast<long>(channels);
#pragma omp parallel for schedule(static) if (!omp_in_parallel() && x.size() > 65536)
    for (long ci = 0; ci < cs; ++ci) {
      const auto c = static_cast<std::size_t>(ci);
      T s{0};
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data().data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const T mu = s / static_cast<T>(count);
      T v{0};
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data().data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - mu) * (p[i] - mu);
      }
      const T var = v / static_cast<T>(count);
      mean[c] = mu;
      invstd[c] = T{1} / std::sqrt(var + eps);
      stats.running_mean[c] = (T{1} - momentum) * stats.running_mean[c] + momentum * mu;
      stats.running_var[c] =
          (T{1} - momentum) * stats.running_var[c] + momentum * var * static_cast<T>(count) / static_cast<T>(count - 1);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = stats.running_mean[c];
      invstd[c] = T{1} / std::sqrt(stats.running_var[c] + eps);
    }
  }

  auto out = Tensor<T>::uninitialized(x.shape());
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const T* p = x.data().data() + (n * channels + c) * plane;
      T* q = out.data().data() + (n * channels + c) * plane;
      const T a = gamma[c] * invstd[c];
      const T b = beta[c] - a * mean[c];
      for (std::size_t i = 0; i < plane; ++i) q[i] = a * p[i] + b;
    }

  if (needs_grad({&x, &gamma, &beta})) {
    record(out, "batchnorm2d", {x, gamma, beta},
           [xs = x.storage(), gs = gamma.storage(), bs = beta.storage(), mean = std::move(mean),
            invstd = std::move(invstd), batch, channels, plane, count, mode](std::span<const T> g) {
             for (std::size_t c = 0; c < channels; ++c) {
               T sum_g{0}, sum_gx{0};
               for (std::size_t n = 0; n < batch; ++n) {
                 const std::size_t base = (n * channels + c) * plane;
                 for (std::size_t i = 0; i < plane; ++i) {
                   const T xhat = (xs->data[base + i] - mean[c]) * invstd[c];
                   sum_g += g[base + i];
                   sum_gx += g[base + i] * xhat;
                 }
               }
               if (gs->requires_grad) gs->grad_buffer()[c] += sum_gx;
               if (bs->requires_grad) bs->grad_buffer()[c] += sum_g;
               if (!xs->requires_grad) continue;
               auto gx = xs->grad_buffer();
               const T gam = gs->data[c];
               for (std::size_t n = 0; n < batch; ++n) {
                 const std::size_t base = (n * channels + c) * plane;
                 for (std::size_t i = 0; i < plane; ++i) {
                   if (mode == Mode::train) {
                     const T xhat = (xs->data[base + i] - mean[c]) * invstd[c];
                     const T m = static_cast<T>(count);
                     gx[base + i] += gam * invstd[c] * (g[base + i] - sum_g / m - xhat * sum_gx / m);
                   } else {
                     gx[base + i] += gam * invstd[c] * g[base + i];
                   }
                 }
               }
             }
           });
  }
  return out;
}

#define SETFEAT_INSTANTIATE_OPS(T)                                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                                       \
  template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, Trans, Trans);                                     \
  template Tensor<T> transpose(const Tensor<T>&);                                                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                             \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                                              \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                               \
  template Tensor<T> sum_axis(const Tensor<T>&, std::size_t);                                                      \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                                        \
  template Tensor<T> mean(const Tensor<T>&);                                                                       \
  template Tensor<T> min_axis(const Tensor<T>&, std::size_t);                                                      \
  template Tensor<T> max_axis(const Tensor<T>&, std::size_t);                                                      \
  template Tensor<T> sum_smallest(const Tensor<T>&, std::size_t, std::size_t);                                     \
  template Tensor<T> l2_normalize(const Tensor<T>&, T);                                                            \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                                       \
  template Tensor<T> cross_entropy_logits(const Tensor<T>&, std::span<const std::size_t>);                         \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> maxpool2(const Tensor<T>&);                                                                   \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormStats<T>&, Mode, T, \
                                 T);

SETFEAT_INSTANTIATE_OPS(float)
SETFEAT_INSTANTIATE_OPS(double)

#undef SETFEAT_INSTANTIATE_OPS

}  // namespace setfeat::ops
