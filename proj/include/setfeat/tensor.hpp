#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "setfeat/errors.hpp"

namespace setfeat {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string to_string(const Shape& shape);

/// Numeric precision of the engine. Training runs in f32; gradient checks in f64.
enum class Precision { f32, f64 };

/// Reads SETFEAT_PRECISION (f32|f64); returns `fallback` when unset.
Precision precision_from_env(Precision fallback = Precision::f32);
std::string_view to_string(Precision p);

template <class T>
class Tensor;

// Leaves elements uninitialized on resize; op outputs are written in full anyway.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  DefaultInitAllocator() = default;
  template <class U>
  DefaultInitAllocator(const DefaultInitAllocator<U>&) noexcept {}
  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

template <class T>
using Buffer = std::vector<T, DefaultInitAllocator<T>>;

template <class T>
struct TensorStorage;

/// Backward rule of one recorded operation. `apply` receives the gradient of
/// the operation's output and accumulates into the inputs' gradients.
template <class T>
struct GradFn {
  std::string_view op;
  std::vector<Tensor<T>> inputs;
  std::function<void(std::span<const T> grad_out)> apply;
};

template <class T>
struct TensorStorage {
  Shape shape;
  Buffer<T> data;
  Buffer<T> grad;  // empty when absent
  bool requires_grad = false;
  std::shared_ptr<GradFn<T>> grad_fn;

  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T{0});
    return grad;
  }
};

/// Whether operations currently record backward rules (per thread).
bool grad_enabled() noexcept;

/// Disables recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major n-d array with reference semantics. Copies share storage;
/// use `clone()` for a deep copy.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  /// Contents unspecified; for outputs that are overwritten in full.
  static Tensor uninitialized(Shape shape);
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return storage_->data.size(); }

  std::span<T> data() { return storage_->data; }
  std::span<const T> data() const { return storage_->data; }
  T& operator[](std::size_t i) { return storage_->data[i]; }
  const T& operator[](std::size_t i) const { return storage_->data[i]; }
  T item() const;

  bool requires_grad() const { return storage_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !storage_->grad.empty(); }
  std::span<const T> grad() const;
  std::span<T> mutable_grad() { return storage_->grad_buffer(); }
  void zero_grad();

  bool is_leaf() const { return storage_->grad_fn == nullptr; }
  const std::shared_ptr<GradFn<T>>& grad_fn() const { return storage_->grad_fn; }

  Tensor clone() const;
  /// Same values, no gradient history.
  Tensor detach() const;

  TensorStorage<T>* storage() const noexcept { return storage_.get(); }
  bool same_storage(const Tensor& other) const noexcept { return storage_ == other.storage_; }

 private:
  std::shared_ptr<TensorStorage<T>> storage_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace setfeat
