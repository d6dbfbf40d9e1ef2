#include "dagan/data.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "dagan/random.hpp"

namespace dagan {

void SceneConfig::validate() const {
  if (num_classes < 2 || num_classes > 27) throw std::invalid_argument("num_classes must be in [2, 27]");
  if (height < 8 || width < 8) throw std::invalid_argument("scene must be at least 8x8");
  if (min_shapes < 1 || max_shapes < min_shapes) throw std::invalid_argument("bad shape count range");
}

Layout::Layout(std::int64_t h, std::int64_t w, std::uint8_t fill)
    : height(h), width(w), ids(static_cast<std::size_t>(h * w), fill) {}

Layout generate_layout(const SceneConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, index));
  const std::int64_t h = cfg.height, w = cfg.width;
  Layout layout(h, w);
  const std::int64_t n = uniform_int(rng, cfg.min_shapes, cfg.max_shapes);
  for (std::int64_t s = 0; s < n; ++s) {
    const auto cls = static_cast<std::uint8_t>(uniform_int(rng, 1, cfg.num_classes - 1));
    const bool ellipse = uniform_index(rng, 2) == 1;
    const std::int64_t sh = uniform_int(rng, h / 8, h / 2);
    const std::int64_t sw = uniform_int(rng, w / 8, w / 2);
    const std::int64_t y0 = uniform_int(rng, 0, h - sh);
    const std::int64_t x0 = uniform_int(rng, 0, w - sw);
    for (std::int64_t y = y0; y < y0 + sh; ++y) {
      for (std::int64_t x = x0; x < x0 + sw; ++x) {
        if (ellipse) {
          // Pixel centers in doubled coordinates: inside iff
          // (dx/sw)² + (dy/sh)² ≤ 1 with dx, dy measured from the box center.
          const std::int64_t dx = 2 * (x - x0) + 1 - sw;
          const std::int64_t dy = 2 * (y - y0) + 1 - sh;
          if (dx * dx * sh * sh + dy * dy * sw * sw > sw * sw * sh * sh) continue;
        }
        layout.at(y, x) = cls;
      }
    }
  }
  return layout;
}

namespace {

double dist2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Greedy farthest-point ordering of `candidates`, appended to `palette`.
void extend_palette(std::vector<std::array<double, 3>>& palette, std::vector<std::array<double, 3>> candidates) {
  while (!candidates.empty()) {
    std::size_t best = 0;
    double best_d = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& p : palette) d = std::min(d, dist2(candidates[i], p));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    palette.push_back(candidates[best]);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
  }
}

/// Cube corners first (black, then white, then the rest), then the
/// remaining points of the {−1, 0, 1}³ grid: 27 classes at most.
std::vector<std::array<double, 3>> build_palette() {
  std::vector<std::array<double, 3>> corners, inner;
  for (int r = -1; r <= 1; ++r)
    for (int g = -1; g <= 1; ++g)
      for (int b = -1; b <= 1; ++b) {
        const std::array<double, 3> p{double(r), double(g), double(b)};
        (r != 0 && g != 0 && b != 0 ? corners : inner).push_back(p);
      }
  std::vector<std::array<double, 3>> palette{corners.front()};
  corners.erase(corners.begin());
  extend_palette(palette, corners);
  extend_palette(palette, inner);
  return palette;
}

}  // namespace

std::array<double, 3> base_color(std::int64_t c) {
  static const auto palette = build_palette();
  if (c < 0 || c >= static_cast<std::int64_t>(palette.size())) {
    throw std::invalid_argument("no base color for class " + std::to_string(c));
  }
  return palette[static_cast<std::size_t>(c)];
}

double shade(std::int64_t y, std::int64_t height) {
  return static_cast<double>(7 * height + 3 * y) / static_cast<double>(10 * height);
}

template <typename T>
Tensor<T> render(const Layout& layout) {
  const std::int64_t h = layout.height, w = layout.width, n = h * w;
  std::vector<T> v(static_cast<std::size_t>(3 * n));
  for (std::int64_t y = 0; y < h; ++y) {
    const double s = shade(y, h);
    for (std::int64_t x = 0; x < w; ++x) {
      const auto color = base_color(layout.at(y, x));
      for (std::int64_t c = 0; c < 3; ++c) {
        v[static_cast<std::size_t>(c * n + y * w + x)] = static_cast<T>(color[static_cast<std::size_t>(c)] * s);
      }
    }
  }
  return Tensor<T>({3, h, w}, std::move(v));
}

template <typename T>
Tensor<T> one_hot(const Layout& layout, std::int64_t num_classes) {
  const std::int64_t n = layout.height * layout.width;
  std::vector<T> v(static_cast<std::size_t>(num_classes * n), T(0));
  for (std::int64_t p = 0; p < n; ++p) {
    const std::int64_t c = layout.ids[static_cast<std::size_t>(p)];
    if (c >= num_classes) {
      throw std::invalid_argument("class id " + std::to_string(c) + " out of range for K=" + std::to_string(num_classes));
    }
    v[static_cast<std::size_t>(c * n + p)] = T(1);
  }
  return Tensor<T>({num_classes, layout.height, layout.width}, std::move(v));
}

template <typename T>
Layout argmax_layout(const Tensor<T>& scores) {
  if (scores.rank() != 3) throw ShapeError("argmax_layout: expected K×H×W, got " + to_string(scores.shape()));
  const std::int64_t k = scores.dim(0), h = scores.dim(1), w = scores.dim(2), n = h * w;
  Layout out(h, w);
  const auto d = scores.data();
  for (std::int64_t p = 0; p < n; ++p) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < k; ++c) {
      if (d[static_cast<std::size_t>(c * n + p)] > d[static_cast<std::size_t>(best * n + p)]) best = c;
    }
    out.ids[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

template <typename T>
Layout oracle_segment(const Tensor<T>& image, std::int64_t num_classes) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("oracle_segment: expected 3×H×W, got " + to_string(image.shape()));
  }
  const std::int64_t h = image.dim(1), w = image.dim(2), n = h * w;
  Layout out(h, w);
  const auto d = image.data();
  std::vector<std::array<double, 3>> colors;
  for (std::int64_t c = 0; c < num_classes; ++c) colors.push_back(base_color(c));
  for (std::int64_t y = 0; y < h; ++y) {
    const double s = shade(y, h);
    for (std::int64_t x = 0; x < w; ++x) {
      std::int64_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::int64_t c = 0; c < num_classes; ++c) {
        double dist = 0;
        for (std::int64_t ch = 0; ch < 3; ++ch) {
          const double diff = static_cast<double>(d[static_cast<std::size_t>(ch * n + y * w + x)]) -
                              colors[static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)] * s;
          dist += diff * diff;
        }
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

GrayImage to_pgm(const Layout& layout) { return {layout.width, layout.height, layout.ids}; }

Layout from_pgm(const GrayImage& img) {
  Layout l;
  l.height = img.height;
  l.width = img.width;
  l.ids = img.pixels;
  return l;
}

namespace {

std::string stem(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05llu", static_cast<unsigned long long>(index));
  return buf;
}

}  // namespace

std::filesystem::path DatasetPaths::layout(const std::filesystem::path& dir, std::uint64_t index) {
  return dir / "layouts" / (stem(index) + ".pgm");
}

std::filesystem::path DatasetPaths::image(const std::filesystem::path& dir, std::uint64_t index) {
  return dir / "images" / (stem(index) + ".ppm");
}

void write_split(const SceneConfig& cfg, std::uint64_t first, std::uint64_t count,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "layouts");
  std::filesystem::create_directories(dir / "images");
  for (std::uint64_t i = 0; i < count; ++i) {
    const Layout layout = generate_layout(cfg, first + i);
    write_file(DatasetPaths::layout(dir, i), encode_pgm(to_pgm(layout)));
    write_file(DatasetPaths::image(dir, i), encode_ppm(to_rgb(render<double>(layout))));
  }
}

std::vector<std::filesystem::path> list_layouts(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  const auto sub = dir / "layouts";
  if (!std::filesystem::is_directory(sub)) throw std::runtime_error(sub.string() + " is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(sub)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") out.push_back(entry.path().stem());
  }
  std::sort(out.begin(), out.end());
  return out;
}

#define DAGAN_INSTANTIATE(T)                                            \
  template Tensor<T> render(const Layout&);                             \
  template Tensor<T> one_hot(const Layout&, std::int64_t);              \
  template Layout argmax_layout(const Tensor<T>&);                      \
  template Layout oracle_segment(const Tensor<T>&, std::int64_t);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
