#include "dagan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dagan/tape.hpp"

namespace dagan {

GradCheckResult gradcheck(const std::string& name, const ScalarFn& f,
                          std::vector<Tensor<double>> inputs, const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Tensor<double>> watched;
    for (const auto& in : inputs) watched.push_back(tape.watch(in));
    const Tensor<double> root = f(watched);
    const Gradients<double> grads = backward(tape, root);
    for (const auto& w : watched) analytic.push_back(grads.wrt(w));
  }

  NoGradGuard<double> no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t n = inputs[k].size();
    std::size_t stride = 1;
    if (options.max_coords_per_input > 0 && n > options.max_coords_per_input) {
      stride = (n + options.max_coords_per_input - 1) / options.max_coords_per_input;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double original = inputs[k][i];
      auto probe = [&](double value) {
        std::vector<Tensor<double>> shifted = inputs;
        shifted[k].mutable_data()[i] = value;
        return f(shifted).item();
      };
      const double plus = probe(original + options.step);
      const double minus = probe(original - options.step);
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.coords_checked;
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

}  // namespace dagan
