#include "setfeat/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace setfeat {

template <class T>
Tape<T> record_tape(const Tensor<T>& root) {
  Tape<T> tape;
  std::unordered_set<TensorStorage<T>*> seen;
  // Iterative post-order DFS; a node is emitted once all its inputs are.
  std::vector<std::pair<TensorStorage<T>*, std::size_t>> stack;
  stack.emplace_back(root.storage(), 0);
  seen.insert(root.storage());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto* fn = node->grad_fn.get();
    if (fn != nullptr && next < fn->inputs.size()) {
      TensorStorage<T>* input = fn->inputs[next++].storage();
      if (input->requires_grad && seen.insert(input).second) stack.emplace_back(input, 0);
      continue;
    }
    tape.nodes.push_back(node);
    stack.pop_back();
  }
  return tape;
}

template <class T>
void backward(const Tensor<T>& root) {
  if (root.size() != 1)
    throw ContractError("backward: root must be a scalar, got shape " + to_string(root.shape()));
  if (!root.requires_grad()) throw ContractError("backward: root is not on the tape");

  Tape<T> tape = record_tape(root);
  for (auto* node : tape.nodes)
    if (node->grad_fn) node->grad.clear();
  root.storage()->grad_buffer()[0] += T{1};

  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
    TensorStorage<T>* node = *it;
    if (!node->grad_fn || node->grad.empty()) continue;
    node->grad_fn->apply(node->grad);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

template <class T>
void zero_grads(std::span<Tensor<T>> params) {
  for (auto& p : params) p.zero_grad();
}

template Tape<float> record_tape(const Tensor<float>&);
template Tape<double> record_tape(const Tensor<double>&);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template void zero_grads(std::span<Tensor<float>>);
template void zero_grads(std::span<Tensor<double>>);

}  // namespace setfeat
