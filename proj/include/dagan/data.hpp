#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dagan/netpbm.hpp"
#include "dagan/tensor.hpp"

namespace dagan {

/// Procedural shapes world: a background (class 0) with 2–5 axis-aligned
/// rectangles and ellipses, later shapes on top.
struct SceneConfig {
  std::int64_t num_classes = 5;
  std::int64_t height = 64;
  std::int64_t width = 64;
  int min_shapes = 2;
  int max_shapes = 5;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct Layout {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> ids;  // row-major class ids

  Layout() = default;
  Layout(std::int64_t h, std::int64_t w, std::uint8_t fill = 0);

  std::uint8_t at(std::int64_t y, std::int64_t x) const {
    return ids[static_cast<std::size_t>(y * width + x)];
  }
  std::uint8_t& at(std::int64_t y, std::int64_t x) { return ids[static_cast<std::size_t>(y * width + x)]; }
  bool operator==(const Layout&) const = default;
};

/// Deterministic function of (cfg.seed, index). Geometry is integer-only.
Layout generate_layout(const SceneConfig& cfg, std::uint64_t index);

/// Fixed base color of class c in [−1, 1]^3. Classes take RGB-cube points in
/// greedy farthest-point order starting from black.
std::array<double, 3> base_color(std::int64_t c);

/// 0.7 + 0.3·y/H.
double shade(std::int64_t y, std::int64_t height);

/// base_color(class) · shade(y) per pixel, as 3×H×W.
template <typename T>
Tensor<T> render(const Layout& layout);

/// K×H×W; throws std::invalid_argument on an id ≥ K.
template <typename T>
Tensor<T> one_hot(const Layout& layout, std::int64_t num_classes);

/// Channel argmax of a K×H×W tensor; ties go to the lowest index.
template <typename T>
Layout argmax_layout(const Tensor<T>& scores);

/// Nearest shaded class color per pixel; ties go to the lowest class id.
template <typename T>
Layout oracle_segment(const Tensor<T>& image, std::int64_t num_classes);

GrayImage to_pgm(const Layout& layout);
Layout from_pgm(const GrayImage& img);

/// Sample directory layout: <dir>/layouts/NNNNN.pgm and <dir>/images/NNNNN.ppm.
struct DatasetPaths {
  static std::filesystem::path layout(const std::filesystem::path& dir, std::uint64_t index);
  static std::filesystem::path image(const std::filesystem::path& dir, std::uint64_t index);
};

/// Writes scenes [first, first + count) to dir, numbering files from 0.
void write_split(const SceneConfig& cfg, std::uint64_t first, std::uint64_t count,
                 const std::filesystem::path& dir);

/// Sorted file stems of <dir>/layouts/*.pgm.
std::vector<std::filesystem::path> list_layouts(const std::filesystem::path& dir);

}  // namespace dagan
