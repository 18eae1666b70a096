#include "setfeat/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "setfeat/autograd.hpp"
#include "setfeat/rng.hpp"

namespace setfeat {

GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) {
    if (!p.requires_grad()) p.set_requires_grad(true);
    p.zero_grad();
  }
  backward(f());

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].size(); ++i) coords.emplace_back(p, i);
  if (options.max_coords > 0) {
    const std::size_t want = std::max<std::size_t>(options.max_coords, 32);
    if (coords.size() > want) {
      Rng rng(options.seed);
      const auto picks = rng.sample_without_replacement(coords.size(), want);
      std::vector<std::pair<std::size_t, std::size_t>> subset;
      for (auto k : picks) subset.push_back(coords[k]);
      coords = std::move(subset);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (auto [p, i] : coords) {
    auto& theta = params[p];
    const double analytic = theta.has_grad() ? theta.grad()[i] : 0.0;
    const double saved = theta[i];
    theta[i] = saved + options.step;
    const double up = f().item();
    theta[i] = saved - options.step;
    const double down = f().item();
    theta[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (!std::isfinite(rel)) report.max_rel_err = INFINITY;
    report.max_rel_err = std::max(report.max_rel_err, rel);
    ++report.checked;
  }
  report.pass = report.max_rel_err < options.tol;
  return report;
}

}  // namespace setfeat
