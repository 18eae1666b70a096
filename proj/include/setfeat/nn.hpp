#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "setfeat/ops.hpp"
#include "setfeat/rng.hpp"
#include "setfeat/tensor.hpp"

namespace setfeat {

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Ordered name -> tensor list (parameters or buffers of a model).
template <class T>
struct NamedTensors {
  std::vector<NamedTensor<T>> items;

  void add(std::string name, Tensor<T> tensor) { items.push_back({std::move(name), std::move(tensor)}); }
  std::vector<Tensor<T>> tensors() const;
  std::size_t scalar_count() const;
  const Tensor<T>* find(std::string_view name) const;
};

/// Kaiming-uniform for a ReLU network: U(-b, b) with b = sqrt(6 / fan_in).
template <class T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

template <class T>
struct Conv2d {
  Tensor<T> weight;  // O x C x k x k
  Tensor<T> bias;    // O, or undefined

  static Conv2d make(std::size_t in, std::size_t out, std::size_t kernel, bool with_bias, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return ops::conv2d(x, weight, bias); }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
};

template <class T>
struct BatchNorm2d {
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormStats<T> stats;
  T eps = T(1e-5);
  T momentum = T(0.1);

  static BatchNorm2d make(std::size_t channels);
  /// Train mode updates the shared running statistics.
  Tensor<T> operator()(const Tensor<T>& x, Mode mode) const;
  void collect(const std::string& prefix, NamedTensors<T>& params, NamedTensors<T>& buffers) const;
};

template <class T>
struct Linear {
  Tensor<T> weight;  // O x I
  Tensor<T> bias;    // O

  static Linear make(std::size_t in, std::size_t out, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);
  Tensor<T> operator()(const Tensor<T>& x) const { return ops::linear(x, weight, bias); }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
};

extern template struct NamedTensors<float>;
extern template struct NamedTensors<double>;
extern template struct Conv2d<float>;
extern template struct Conv2d<double>;
extern template struct BatchNorm2d<float>;
extern template struct BatchNorm2d<double>;
extern template struct Linear<float>;
extern template struct Linear<double>;

}  // namespace setfeat
