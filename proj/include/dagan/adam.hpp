#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws std::invalid_argument unless lr ≥ 0 and both betas lie in [0, 1).
  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<std::string> names;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t t = 0;

  /// Zero moments mirroring every parameter of `state`.
  template <typename State>
  static AdamState zeros_like(const State& state) {
    AdamState s;
    state.for_each_param([&](const std::string& name, const Tensor<T>& p) {
      s.names.push_back(name);
      s.m.push_back(Tensor<T>::zeros(p.shape()));
      s.v.push_back(Tensor<T>::zeros(p.shape()));
    });
    return s;
  }
};

/// One bias-corrected Adam update of every parameter, in order:
///   m ← β1·m + (1−β1)·g,  v ← β2·v + (1−β2)·g²,
///   p ← p − lr · (m / (1−β1^t)) / (sqrt(v / (1−β2^t)) + eps).
/// Throws ShapeError when counts or shapes disagree.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const AdamConfig& cfg);

}  // namespace dagan
