#pragma once

#include <random>

#include "dagan/tensor.hpp"

namespace dagan::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

/// Values with |x| in [gap, 1], random sign; keeps inputs off the kinks of
/// piecewise-linear ops during finite differencing.
inline Tensor<double> random_away_from_zero(Shape shape, std::uint64_t seed, double gap = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace dagan::testing

namespace dagan::testing {

/// One-hot K×H×W (or N×K×H×W when n > 0) layout with uniformly random labels.
inline Tensor<double> random_layout(std::int64_t k, std::int64_t h, std::int64_t w, std::uint64_t seed,
                                    std::int64_t n = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> label(0, k - 1);
  const std::int64_t batch = n > 0 ? n : 1;
  std::vector<double> v(static_cast<std::size_t>(batch * k * h * w), 0.0);
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t p = 0; p < h * w; ++p) v[static_cast<std::size_t>((b * k + label(rng)) * h * w + p)] = 1.0;
  Shape shape = n > 0 ? Shape{n, k, h, w} : Shape{k, h, w};
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace dagan::testing
