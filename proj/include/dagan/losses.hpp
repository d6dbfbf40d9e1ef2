#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dagan/model.hpp"

namespace dagan {

struct LossWeights {
  double lambda_cgan = 1.0;
  double lambda_f = 10.0;
  double lambda_p = 10.0;

  /// Throws std::invalid_argument on a negative weight.
  void validate() const;
};

enum class AdversarialLoss { Hinge, LeastSquares };

std::string_view to_string(AdversarialLoss kind);
AdversarialLoss parse_adversarial_loss(std::string_view text);

// Multi-scale reductions: each scale's map is averaged over all of its
// elements, then the per-scale values are averaged, so every scale counts
// equally regardless of resolution.

/// mean_s mean(max(0, 1 − real_s) + max(0, 1 + fake_s)).
template <typename T>
Tensor<T> hinge_d_loss(std::span<const Tensor<T>> real_logits, std::span<const Tensor<T>> fake_logits);

/// −mean_s mean(fake_s).
template <typename T>
Tensor<T> hinge_g_loss(std::span<const Tensor<T>> fake_logits);

/// mean_s mean((real_s − 1)² + fake_s²).
template <typename T>
Tensor<T> lsgan_d_loss(std::span<const Tensor<T>> real_logits, std::span<const Tensor<T>> fake_logits);

/// mean_s mean((fake_s − 1)²).
template <typename T>
Tensor<T> lsgan_g_loss(std::span<const Tensor<T>> fake_logits);

template <typename T>
Tensor<T> d_adversarial_loss(AdversarialLoss kind, std::span<const Tensor<T>> real_logits,
                             std::span<const Tensor<T>> fake_logits);
template <typename T>
Tensor<T> g_adversarial_loss(AdversarialLoss kind, std::span<const Tensor<T>> fake_logits);

/// Mean over scales, and over layers within a scale, of mean |fake − real|.
/// Real features are detached here.
template <typename T>
Tensor<T> feature_matching_loss(std::span<const std::vector<Tensor<T>>> real_feats,
                                std::span<const std::vector<Tensor<T>>> fake_feats);

/// Frozen random conv stack standing in for a pretrained perceptual network.
/// Its weights are plain tensors, so they never appear on a tape.
template <typename T>
struct FixedExtractor {
  std::vector<Conv2dParams<T>> layers;  // 3×3 stride 2, leaky relu
  T slope = static_cast<T>(0.2);

  static FixedExtractor make(std::uint64_t seed, std::span<const std::int64_t> widths = default_widths());
  static std::span<const std::int64_t> default_widths();

  /// One map per layer, in order.
  std::vector<Tensor<T>> features(const Tensor<T>& image) const;
  /// Spatial mean of the last level: C (or N×C for a batch).
  Tensor<T> embedding(const Tensor<T>& image) const;
};

/// Mean over the extractor levels of mean |e(fake) − e(real)|.
template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& real_img, const Tensor<T>& fake_img,
                          const FixedExtractor<T>& e);

template <typename T>
struct GeneratorLossTerms {
  Tensor<T> cgan;
  Tensor<T> fm;
  Tensor<T> perc;
};

/// λ_cgan·cgan + λ_f·fm + λ_p·perc.
template <typename T>
Tensor<T> total_generator_loss(const GeneratorLossTerms<T>& terms, const LossWeights& w);

/// Logit maps of every scale, in order.
template <typename T>
std::vector<Tensor<T>> logits_of(const std::vector<ScaleOutput<T>>& outputs);
/// Feature lists of every scale, in order.
template <typename T>
std::vector<std::vector<Tensor<T>>> features_of(const std::vector<ScaleOutput<T>>& outputs);

}  // namespace dagan
