#include "setfeat/tensor.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace setfeat {

namespace {
thread_local bool g_grad_enabled = true;

#ifdef __GLIBC__
// Activation buffers are tens of MB and freed every step. Keep them on the
// heap instead of mmap/munmap round trips, which page-fault on every reuse.
const bool g_allocator_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif
}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Precision precision_from_env(Precision fallback) {
  const char* env = std::getenv("SETFEAT_PRECISION");
  if (env == nullptr) return fallback;
  const std::string_view v(env);
  if (v == "f32") return Precision::f32;
  if (v == "f64") return Precision::f64;
  throw ConfigError("SETFEAT_PRECISION must be f32 or f64, got '" + std::string(v) + "'");
}

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : storage_(std::make_shared<TensorStorage<T>>()) {
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  storage_->data.assign(shape_size(shape), fill);
  storage_->shape = std::move(shape);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : storage_(std::make_shared<TensorStorage<T>>()) {
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  if (shape_size(shape) != values.size())
    throw DimensionError("shape " + to_string(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  storage_->shape = std::move(shape);
  storage_->data.assign(values.begin(), values.end());
}

template <class T>
Tensor<T> Tensor<T>::uninitialized(Shape shape) {
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  Tensor out;
  out.storage_ = std::make_shared<TensorStorage<T>>();
  out.storage_->data.resize(shape_size(shape));
  out.storage_->shape = std::move(shape);
  return out;
}

template <class T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  return storage_->shape[axis];
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return storage_->data[0];
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  storage_->requires_grad = on;
  return *this;
}

template <class T>
std::span<const T> Tensor<T>::grad() const {
  if (storage_->grad.empty()) throw ContractError("tensor has no gradient");
  return storage_->grad;
}

template <class T>
void Tensor<T>::zero_grad() {
  if (!storage_->grad.empty()) std::fill(storage_->grad.begin(), storage_->grad.end(), T{0});
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out = uninitialized(storage_->shape);
  std::copy(storage_->data.begin(), storage_->data.end(), out.storage_->data.begin());
  out.storage_->requires_grad = storage_->requires_grad && is_leaf();
  return out;
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out = uninitialized(storage_->shape);
  std::copy(storage_->data.begin(), storage_->data.end(), out.storage_->data.begin());
  return out;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace setfeat
