#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error, so coordinates whose true
  /// gradient is ~0 are judged by absolute error instead.
  double floor = 1e-6;
  /// Checks at most this many coordinates per input (evenly strided); 0 = all.
  std::size_t max_coords_per_input = 0;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  bool passed = false;
};

using ScalarFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Compares reverse-mode gradients of `f` w.r.t. every input against central
/// differences (f(x+h) − f(x−h)) / 2h. Relative error per coordinate is
/// |analytic − numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult gradcheck(const std::string& name, const ScalarFn& f,
                          std::vector<Tensor<double>> inputs, const GradCheckOptions& options = {});

}  // namespace dagan

namespace dagan {

/// The full finite-difference suite: every differentiable op, SAM, CAM, the
/// generator for all six ablations and the discriminator at a miniature
/// config, and all losses. Deterministic; runs in seconds.
std::vector<GradCheckResult> gradient_suite();

}  // namespace dagan
