#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

/// Binary PGM (P5) / PPM (P6), maxval 255. The header is written as
/// "<magic>\n<width> <height>\n255\n"; decoding accepts exactly one
/// whitespace byte between header fields and no comments.
class NetpbmError : public std::runtime_error {
 public:
  enum class Kind { MagicMismatch, MalformedHeader, Truncated, TrailingData };
  NetpbmError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct GrayImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB
  bool operator==(const RgbImage&) const = default;
};

std::string encode_pgm(const GrayImage& img);
std::string encode_ppm(const RgbImage& img);
GrayImage decode_pgm(std::string_view bytes);
RgbImage decode_ppm(std::string_view bytes);

/// [−1, 1] → [0, 255], round half up, clamped.
std::uint8_t quantize_signed(double v);
/// [0, 1] → [0, 255], round half up, clamped.
std::uint8_t quantize_unit(double v);
/// [0, 255] → [−1, 1].
double dequantize_signed(std::uint8_t q);

template <typename T>
RgbImage to_rgb(const Tensor<T>& image);  // 3×H×W in [−1, 1]
template <typename T>
Tensor<T> from_rgb(const RgbImage& img);

std::string read_file(const std::filesystem::path& path);
/// Writes the whole buffer or throws naming the path.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dagan
