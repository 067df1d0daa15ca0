#pragma once

#include "imt/math/param_store.hpp"

#include <functional>
#include <string>
#include <vector>

namespace imt {

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;  // worst single coordinate
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  double max_abs_error = 0.0;
  // Same formula on the checked coordinates as one vector (Euclidean norms).
  double norm_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_parameter;
  double max_relative_error = 0.0;
  double max_norm_relative_error = 0.0;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Checks at most this many coordinates per parameter (evenly strided); 0 = all.
  std::size_t max_coords_per_param = 0;
  // Restrict to these parameter names; empty = all.
  std::vector<std::string> only;
};

/// Compares analytic gradients against central finite differences.
///
/// `loss_and_grad` must return the loss and accumulate its gradient into the
/// store's grad tensors; `loss` must return the same loss without touching
/// gradients. Relative error is |a - n| / (|a| + |n| + 1e-8).
GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss_and_grad,
                           const std::function<double()>& loss,
                           const GradCheckOptions& options = {});

}  // namespace imt
