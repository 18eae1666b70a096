#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "setfeat/tensor.hpp"

namespace setfeat {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.01;
  double momentum = 0.0;  // sgd
  bool nesterov = false;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;   // adam
  double eps = 1e-8;      // adam
  double weight_decay = 0.0;
};

/// SGD (optionally Nesterov momentum) or Adam over a fixed parameter list.
/// Weight decay is added to the gradient (L2). Gradients are left untouched.
template <class T>
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Tensor<T>> params);

  void step();
  void zero_grad();

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  std::size_t step_count() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> first_;   // momentum buffer / Adam m
  std::vector<std::vector<T>> second_;  // Adam v
  std::size_t steps_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace setfeat
