#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dagan/attention.hpp"
#include "dagan/data.hpp"

namespace dagan {

/// K×K pixel counts; rows are ground truth, columns predictions.
struct ConfusionMatrix {
  std::int64_t num_classes = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(std::int64_t k = 0) : num_classes(k), counts(static_cast<std::size_t>(k * k), 0) {}
  std::int64_t& at(std::int64_t gt, std::int64_t pred) {
    return counts[static_cast<std::size_t>(gt * num_classes + pred)];
  }
  std::int64_t at(std::int64_t gt, std::int64_t pred) const {
    return counts[static_cast<std::size_t>(gt * num_classes + pred)];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

/// Pools all pairs into one matrix. Throws std::invalid_argument on empty or
/// mismatched input and on ids ≥ K.
ConfusionMatrix confusion(std::span<const Layout> preds, std::span<const Layout> gts, std::int64_t num_classes);

struct MiouResult {
  double miou = 0;
  /// IoU per class; NaN for classes absent from both predictions and ground truth.
  std::vector<double> per_class;
};

/// Mean IoU over classes with a non-empty union.
MiouResult miou(const ConfusionMatrix& cm);
MiouResult miou(std::span<const Layout> preds, std::span<const Layout> gts, std::int64_t num_classes);

double pixel_acc(const ConfusionMatrix& cm);
double pixel_acc(std::span<const Layout> preds, std::span<const Layout> gts);

struct GaussianStats {
  std::vector<double> mean;
  std::vector<double> cov;  // d×d row-major
  std::int64_t count = 0;

  std::int64_t dim() const { return static_cast<std::int64_t>(mean.size()); }
};

/// Sample mean and unbiased covariance of n×d row-major features; n ≥ 2.
GaussianStats gaussian_stats(std::span<const double> features, std::int64_t n, std::int64_t d);

/// ‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^{1/2}). The cross term uses the
/// symmetric form Σa^{1/2} Σb Σa^{1/2}, which has the same trace. Eigenvalues
/// below −1e-8 (either covariance or the product) are rejected; smaller
/// negatives are clamped to 0, as is the result.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Writes <dir>/sam.pgm (A_s, [0,1] → [0,255]), <dir>/cam_delta.txt (one δ
/// value per line, 6 decimals) and <dir>/cam_delta.pgm (16-px column per
/// channel, 16 rows). Absent maps are skipped. Returns the written paths.
template <typename T>
std::vector<std::filesystem::path> export_attention(const AttentionOutput<T>& attn, const std::filesystem::path& dir);

/// Parses a cam_delta.txt written by export_attention.
std::vector<double> read_delta_text(const std::filesystem::path& path);

}  // namespace dagan
