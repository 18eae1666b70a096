#pragma once

#include <string>
#include <vector>

#include "setfeat/grad_check.hpp"

namespace setfeat {

struct NamedGradCheck {
  std::string name;
  double tol = 0.0;
  GradCheckReport report;
};

/// Finite-difference checks of every differentiable building block and of
/// the episode loss of a small two-block, two-mapper model (64-bit).
std::vector<NamedGradCheck> run_gradcheck_suite(std::uint64_t seed = 3);

}  // namespace setfeat
