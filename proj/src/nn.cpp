#include "setfeat/nn.hpp"

#include <cmath>

namespace setfeat {

template <class T>
std::vector<Tensor<T>> NamedTensors<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.tensor);
  return out;
}

template <class T>
std::size_t NamedTensors<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& item : items) n += item.tensor.size();
  return n;
}

template <class T>
const Tensor<T>* NamedTensors<T>::find(std::string_view name) const {
  for (const auto& item : items)
    if (item.name == name) return &item.tensor;
  return nullptr;
}

template <class T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

template <class T>
Conv2d<T> Conv2d<T>::make(std::size_t in, std::size_t out, std::size_t kernel, bool with_bias, Rng& rng) {
  Conv2d c;
  c.weight = kaiming_uniform<T>(Shape{out, in, kernel, kernel}, in * kernel * kernel, rng);
  if (with_bias) c.bias = Tensor<T>(Shape{out}).set_requires_grad(true);
  return c;
}

template <class T>
void Conv2d<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  params.add(prefix + ".weight", weight);
  if (bias.defined()) params.add(prefix + ".bias", bias);
}

template <class T>
BatchNorm2d<T> BatchNorm2d<T>::make(std::size_t channels) {
  BatchNorm2d bn;
  bn.gamma = Tensor<T>(Shape{channels}, T{1}).set_requires_grad(true);
  bn.beta = Tensor<T>(Shape{channels}).set_requires_grad(true);
  bn.stats.running_mean = Tensor<T>(Shape{channels});
  bn.stats.running_var = Tensor<T>(Shape{channels}, T{1});
  return bn;
}

template <class T>
Tensor<T> BatchNorm2d<T>::operator()(const Tensor<T>& x, Mode mode) const {
  BatchNormStats<T> shared = stats;  // handles alias the same storage
  return ops::batchnorm2d(x, gamma, beta, shared, mode, eps, momentum);
}

template <class T>
void BatchNorm2d<T>::collect(const std::string& prefix, NamedTensors<T>& params, NamedTensors<T>& buffers) const {
  params.add(prefix + ".gamma", gamma);
  params.add(prefix + ".beta", beta);
  buffers.add(prefix + ".running_mean", stats.running_mean);
  buffers.add(prefix + ".running_var", stats.running_var);
}

template <class T>
Linear<T> Linear<T>::make(std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = kaiming_uniform<T>(Shape{out, in}, in, rng);
  l.bias = Tensor<T>(Shape{out}).set_requires_grad(true);
  return l;
}

template <class T>
Linear<T> Linear<T>::zeros(std::size_t in, std::size_t out) {
  Linear l;
  l.weight = Tensor<T>(Shape{out, in}).set_requires_grad(true);
  l.bias = Tensor<T>(Shape{out}).set_requires_grad(true);
  return l;
}

template <class T>
void Linear<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  params.add(prefix + ".weight", weight);
  params.add(prefix + ".bias", bias);
}

template struct NamedTensors<float>;
template struct NamedTensors<double>;
template Tensor<float> kaiming_uniform(Shape, std::size_t, Rng&);
template Tensor<double> kaiming_uniform(Shape, std::size_t, Rng&);
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct BatchNorm2d<float>;
template struct BatchNorm2d<double>;
template struct Linear<float>;
template struct Linear<double>;

}  // namespace setfeat
