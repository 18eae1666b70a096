#include "setfeat/optim.hpp"

#include <cmath>
#include <string>

namespace setfeat {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd|adam)");
}

template <class T>
Optimizer<T>::Optimizer(OptimizerConfig config, std::vector<Tensor<T>> params)
    : config_(config), params_(std::move(params)) {
  for (const auto& p : params_) {
    first_.emplace_back(p.size(), T{0});
    second_.emplace_back(config_.kind == OptimizerKind::adam ? p.size() : 0, T{0});
  }
}

template <class T>
void Optimizer<T>::step() {
  for (const auto& p : params_)
    if (!p.has_grad()) throw ContractError("optimizer step: parameter of shape " + to_string(p.shape()) + " has no gradient");
  ++steps_;
  const T lr = static_cast<T>(config_.lr);
  const T wd = static_cast<T>(config_.weight_decay);
  const T mu = static_cast<T>(config_.momentum);
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  const T correct1 = T{1} - static_cast<T>(std::pow(config_.beta1, static_cast<double>(steps_)));
  const T correct2 = T{1} - static_cast<T>(std::pow(config_.beta2, static_cast<double>(steps_)));

  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    auto w = p.data();
    const auto g = p.grad();
    auto& m = first_[k];
    auto& v = second_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T grad = g[i] + wd * w[i];
      if (config_.kind == OptimizerKind::sgd) {
        if (mu == T{0}) {
          w[i] -= lr * grad;
          continue;
        }
        m[i] = mu * m[i] + grad;
        w[i] -= lr * (config_.nesterov ? grad + mu * m[i] : m[i]);
      } else {
        m[i] = b1 * m[i] + (T{1} - b1) * grad;
        v[i] = b2 * v[i] + (T{1} - b2) * grad * grad;
        const T mhat = m[i] / correct1;
        const T vhat = v[i] / correct2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + static_cast<T>(config_.eps));
      }
    }
  }
}

template <class T>
void Optimizer<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace setfeat
