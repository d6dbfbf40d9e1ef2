#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dagan/attention.hpp"

namespace dagan {

/// Which attention heads are active. The six ablation settings:
///   B1 none, B2 SAM, B3 CAM-I, B4 CAM-II, B5 SAM+CAM-I, B6 SAM+CAM-II.
struct AttentionConfig {
  bool sam = true;
  std::optional<CamVariant> cam = CamVariant::CamII;

  static AttentionConfig from_ablation(std::string_view name);
  /// "B1".."B6".
  std::string ablation_name() const;
  bool operator==(const AttentionConfig&) const = default;
};

struct GeneratorConfig {
  std::int64_t num_classes = 5;
  std::int64_t height = 64;
  std::int64_t width = 64;
  /// One width per backbone output F_b^1..F_b^l; the last one is C.
  std::vector<std::int64_t> widths{16, 32, 64, 64};
  AttentionConfig attention;

  int num_scales() const { return static_cast<int>(widths.size()); }
  std::int64_t channels() const { return widths.back(); }
  /// Throws std::invalid_argument on l < 2, non-positive sizes, or a
  /// resolution not divisible by 2^(l−1).
  void validate() const;
};

struct DiscriminatorConfig {
  std::int64_t input_channels = 8;  // K + 3
  int num_scales = 2;
  std::vector<std::int64_t> widths{32, 64, 128};  // one stride-2 conv per entry
  double slope = 0.2;

  void validate() const;
};

/// conv → instance norm → activation.
template <typename T>
struct ConvBlock {
  Conv2dParams<T> conv;
  std::optional<InstanceNormParams<T>> norm;

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    visit(*this, prefix, f);
  }
  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) const {
    visit(*this, prefix, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F& f) {
    self.conv.for_each_param(prefix + ".conv", f);
    if (self.norm) self.norm->for_each_param(prefix + ".norm", f);
  }
};

template <typename T>
struct GeneratorState {
  GeneratorConfig config;
  std::vector<ConvBlock<T>> encoder;  // stride 2, produce F_b^1..F_b^{l−1}
  ConvBlock<T> decoder;               // upsample to H×W, produces F_b^l
  std::optional<SamState<T>> sam;
  std::optional<CamState<T>> cam;
  Conv2dParams<T> out_conv;  // C → 3, followed by tanh

  template <typename F>
  void for_each_param(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    visit(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    for (std::size_t i = 0; i < self.encoder.size(); ++i) {
      self.encoder[i].for_each_param("backbone.enc" + std::to_string(i + 1), f);
    }
    self.decoder.for_each_param("backbone.dec", f);
    if (self.sam) self.sam->for_each_param("sam", f);
    if (self.cam) self.cam->for_each_param("cam", f);
    self.out_conv.for_each_param("out_conv", f);
  }
};

template <typename T>
struct PatchDiscriminator {
  std::vector<ConvBlock<T>> blocks;  // first block has no norm
  Conv2dParams<T> head;              // → 1 logit channel
};

template <typename T>
struct DiscriminatorState {
  DiscriminatorConfig config;
  std::vector<PatchDiscriminator<T>> scales;

  template <typename F>
  void for_each_param(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    visit(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    for (std::size_t s = 0; s < self.scales.size(); ++s) {
      const std::string p = "d" + std::to_string(s);
      for (std::size_t b = 0; b < self.scales[s].blocks.size(); ++b) {
        self.scales[s].blocks[b].for_each_param(p + ".block" + std::to_string(b + 1), f);
      }
      self.scales[s].head.for_each_param(p + ".head", f);
    }
  }
};

template <typename T>
GeneratorState<T> init_generator(const GeneratorConfig& config, std::uint64_t seed);
template <typename T>
DiscriminatorState<T> init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

/// F_b^1..F_b^l: l−1 stride-2 encoder stages, then one nearest-upsampling
/// stage back to the input resolution.
template <typename T>
std::vector<Tensor<T>> backbone_forward(const Tensor<T>& s_onehot, const GeneratorState<T>& g);

template <typename T>
struct GeneratorOutput {
  Tensor<T> image;  // 3×H×W in [−1, 1]
  AttentionOutput<T> attention;
};

template <typename T>
GeneratorOutput<T> generator_forward(const Tensor<T>& s_onehot, const GeneratorState<T>& g);

template <typename T>
struct ScaleOutput {
  Tensor<T> logits;
  std::vector<Tensor<T>> features;
};

/// Runs every scale on concat(label, image); scale k sees the pair mean-pooled k times.
template <typename T>
std::vector<ScaleOutput<T>> discriminator_forward(const Tensor<T>& s_onehot,
                                                  const Tensor<T>& image,
                                                  const DiscriminatorState<T>& d);

template <typename State>
std::int64_t param_count(const State& state) {
  std::int64_t n = 0;
  state.for_each_param([&](const std::string&, const auto& t) { n += static_cast<std::int64_t>(t.size()); });
  return n;
}

struct ParamCounts {
  std::int64_t generator = 0;
  std::int64_t discriminator = 0;
  std::int64_t total() const { return generator + discriminator; }
};

/// Counts for freshly initialized models of the given configuration.
ParamCounts count_params(const GeneratorConfig& g, const DiscriminatorConfig& d);

}  // namespace dagan
