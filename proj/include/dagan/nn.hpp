#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "dagan/ops.hpp"

namespace dagan {

// Spatial ops accept C×H×W or N×C×H×W and return the same rank they were given.

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// floor((in + 2·pad − dilation·(k−1) − 1)/stride) + 1
std::int64_t conv_output_size(std::int64_t in, std::int64_t kernel, const ConvGeometry& g);

template <typename T>
struct Conv2dParams {
  Tensor<T> weight;  // C_out × C_in × k × k
  Tensor<T> bias;    // C_out
  ConvGeometry geometry;

  std::int64_t in_channels() const { return weight.dim(1); }
  std::int64_t out_channels() const { return weight.dim(0); }
  std::int64_t kernel() const { return weight.dim(2); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) const {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <typename T>
struct InstanceNormParams {
  Tensor<T> scale;  // C
  Tensor<T> shift;  // C
  T eps = T(1e-5);

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".scale", scale);
    f(prefix + ".shift", shift);
  }
  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) const {
    f(prefix + ".scale", scale);
    f(prefix + ".shift", shift);
  }
};

/// Cross-correlation plus bias, computed as im2col followed by a GEMM.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvGeometry& geometry);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p) {
  return conv2d(x, p.weight, p.bias, p.geometry);
}

/// Mean over channels: C×H×W → 1×H×W.
template <typename T>
Tensor<T> channel_reduce_mean(const Tensor<T>& x);
/// Max over channels. The gradient goes to the lowest-index maximal channel.
template <typename T>
Tensor<T> channel_reduce_max(const Tensor<T>& x);
/// Mean over the spatial extent: C×H×W → C×1×1.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
/// Source index floor(dst·src/dst_size) per axis.
template <typename T>
Tensor<T> nearest_resize(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);
/// Non-overlapping 2×2 mean pooling (H and W must be even).
template <typename T>
Tensor<T> avg_pool2x2(const Tensor<T>& x);
/// Per-sample, per-channel normalization over H×W followed by scale and shift.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift,
                        T eps);
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const InstanceNormParams<T>& p) {
  return instance_norm(x, p.scale, p.shift, p.eps);
}

/// Deterministic parameter initializer. Draws are consumed in construction
/// order, so the same seed and the same sequence of calls give identical values.
class InitStream {
 public:
  explicit InitStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Uniform in [-bound, bound).
  double uniform(double bound);
  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

/// sqrt(6 / (fan_in + fan_out)) with fan = channels·k·k.
double glorot_bound(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel);

/// Glorot-uniform weights, zero bias.
template <typename T>
Conv2dParams<T> init_conv(InitStream& stream, std::int64_t in_channels, std::int64_t out_channels,
                          std::int64_t kernel, ConvGeometry geometry);
/// Scale 1, shift 0.
template <typename T>
InstanceNormParams<T> init_instance_norm(std::int64_t channels, T eps = T(1e-5));

}  // namespace dagan
