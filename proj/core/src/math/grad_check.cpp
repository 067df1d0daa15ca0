#include "imt/math/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imt {

GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss_and_grad,
                           const std::function<double()>& loss, const GradCheckOptions& options) {
  store.zero_grad();
  const double base = loss_and_grad();
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");

  GradCheckReport report;
  for (auto& p : store.params()) {
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), p.name) == options.only.end()) {
      continue;
    }
    GradCheckEntry entry;
    entry.name = p.name;
    const std::size_t n = p.value.size();
    std::size_t stride = 1;
    if (options.max_coords_per_param > 0 && n > options.max_coords_per_param) {
      stride = (n + options.max_coords_per_param - 1) / options.max_coords_per_param;
    }
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = loss();
      p.value[i] = saved - options.step;
      const double down = loss();
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::runtime_error("grad_check: non-finite loss while perturbing " + p.name);
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p.grad[i];
      diff_sq += (analytic - numeric) * (analytic - numeric);
      analytic_sq += analytic * analytic;
      numeric_sq += numeric * numeric;
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic - numeric));
      const double rel =
          std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
      if (rel > entry.max_relative_error || i == 0) {
        entry.max_relative_error = std::max(entry.max_relative_error, rel);
        if (rel >= entry.max_relative_error) {
          entry.analytic_at_worst = analytic;
          entry.numeric_at_worst = numeric;
        }
      }
    }
    entry.norm_relative_error = std::sqrt(diff_sq) / (std::sqrt(analytic_sq) + std::sqrt(numeric_sq) + 1e-8);
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.max_norm_relative_error = std::max(report.max_norm_relative_error, entry.norm_relative_error);
    report.per_parameter.push_back(std::move(entry));
  }
  store.zero_grad();
  return report;
}

}  // namespace imt
