#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "setfeat/tensor.hpp"

namespace setfeat {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool pass = true;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tol = 1e-4;
  /// Check at most this many coordinates across all parameters, drawn at
  /// random (never fewer than 32). Zero checks every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// Compares the reverse-mode gradient of the scalar `f` with central finite
/// differences. Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
/// `f` must read the parameters in place and be deterministic.
GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> params,
                           const GradCheckOptions& options = {});

inline GradCheckReport grad_check(const std::function<Tensor<double>()>& f, Tensor<double>& theta, double step,
                                  double tol) {
  return grad_check(f, std::span<Tensor<double>>(&theta, 1), GradCheckOptions{step, tol, 0, 0});
}

}  // namespace setfeat
