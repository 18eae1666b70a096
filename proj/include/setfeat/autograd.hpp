#pragma once

#include <span>
#include <vector>

#include "setfeat/tensor.hpp"

namespace setfeat {

/// Recorded operations reachable from a root, in topological order: every
/// node appears after all of its inputs.
template <class T>
struct Tape {
  std::vector<TensorStorage<T>*> nodes;
};

template <class T>
Tape<T> record_tape(const Tensor<T>& root);

/// Reverse-mode pass from a scalar root. Gradients are accumulated (+=) into
/// every leaf that requires a gradient; call zero_grads between steps.
template <class T>
void backward(const Tensor<T>& root);

template <class T>
void zero_grads(std::span<Tensor<T>> params);

extern template Tape<float> record_tape(const Tensor<float>&);
extern template Tape<double> record_tape(const Tensor<double>&);
extern template void backward(const Tensor<float>&);
extern template void backward(const Tensor<double>&);
extern template void zero_grads(std::span<Tensor<float>>);
extern template void zero_grads(std::span<Tensor<double>>);

}  // namespace setfeat
