#include "dagan/netpbm.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

namespace dagan {

namespace {

std::string header(std::string_view magic, std::int64_t w, std::int64_t h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }

struct Header {
  std::int64_t width;
  std::int64_t height;
  std::size_t payload_offset;
};

Header parse_header(std::string_view bytes, std::string_view magic) {
  using K = NetpbmError::Kind;
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
    throw NetpbmError(K::MagicMismatch, "expected " + std::string(magic) + " magic, got '" +
                                            std::string(bytes.substr(0, std::min<std::size_t>(2, bytes.size()))) + "'");
  }
  std::size_t pos = 2;
  auto field = [&](const char* what) {
    if (pos >= bytes.size() || !is_space(bytes[pos])) {
      throw NetpbmError(K::MalformedHeader, std::string("expected single whitespace before ") + what);
    }
    ++pos;
    std::int64_t value = 0;
    const char* begin = bytes.data() + pos;
    const char* end = bytes.data() + bytes.size();
    if (begin == end || *begin < '0' || *begin > '9') {
      throw NetpbmError(K::MalformedHeader, std::string("expected decimal ") + what);
    }
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc()) throw NetpbmError(K::MalformedHeader, std::string("bad ") + what);
    pos += static_cast<std::size_t>(ptr - begin);
    return value;
  };
  const std::int64_t w = field("width");
  const std::int64_t h = field("height");
  const std::int64_t maxval = field("maxval");
  if (w < 1 || h < 1) throw NetpbmError(K::MalformedHeader, "image dimensions must be positive");
  if (maxval != 255) throw NetpbmError(K::MalformedHeader, "maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw NetpbmError(K::MalformedHeader, "expected single whitespace after maxval");
  }
  return {w, h, pos + 1};
}

std::vector<std::uint8_t> payload(std::string_view bytes, const Header& h, std::int64_t channels) {
  const auto need = static_cast<std::size_t>(h.width * h.height * channels);
  const std::size_t have = bytes.size() - h.payload_offset;
  if (have < need) {
    throw NetpbmError(NetpbmError::Kind::Truncated,
                      "payload has " + std::to_string(have) + " bytes, expected " + std::to_string(need));
  }
  if (have > need) {
    throw NetpbmError(NetpbmError::Kind::TrailingData,
                      std::to_string(have - need) + " unexpected bytes after payload");
  }
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.payload_offset);
  return {p, p + need};
}

void check_size(std::int64_t w, std::int64_t h, std::size_t n, std::int64_t channels) {
  if (w < 1 || h < 1 || n != static_cast<std::size_t>(w * h * channels)) {
    throw std::invalid_argument("image buffer does not match " + std::to_string(w) + "x" + std::to_string(h));
  }
}

}  // namespace

std::string encode_pgm(const GrayImage& img) {
  check_size(img.width, img.height, img.pixels.size(), 1);
  std::string out = header("P5", img.width, img.height);
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

std::string encode_ppm(const RgbImage& img) {
  check_size(img.width, img.height, img.pixels.size(), 3);
  std::string out = header("P6", img.width, img.height);
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

GrayImage decode_pgm(std::string_view bytes) {
  const Header h = parse_header(bytes, "P5");
  return {h.width, h.height, payload(bytes, h, 1)};
}

RgbImage decode_ppm(std::string_view bytes) {
  const Header h = parse_header(bytes, "P6");
  return {h.width, h.height, payload(bytes, h, 3)};
}

std::uint8_t quantize_unit(double v) {
  const double q = std::floor(v * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

std::uint8_t quantize_signed(double v) {
  const double q = std::floor((v + 1.0) * 0.5 * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

double dequantize_signed(std::uint8_t q) { return static_cast<double>(q) / 255.0 * 2.0 - 1.0; }

template <typename T>
RgbImage to_rgb(const Tensor<T>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("to_rgb: expected 3×H×W, got " + to_string(image.shape()));
  }
  const std::int64_t h = image.dim(1), w = image.dim(2);
  RgbImage out{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(3 * h * w))};
  const auto d = image.data();
  for (std::int64_t p = 0; p < h * w; ++p)
    for (std::int64_t c = 0; c < 3; ++c)
      out.pixels[static_cast<std::size_t>(3 * p + c)] =
          quantize_signed(static_cast<double>(d[static_cast<std::size_t>(c * h * w + p)]));
  return out;
}

template <typename T>
Tensor<T> from_rgb(const RgbImage& img) {
  check_size(img.width, img.height, img.pixels.size(), 3);
  const std::int64_t n = img.width * img.height;
  std::vector<T> v(static_cast<std::size_t>(3 * n));
  for (std::int64_t p = 0; p < n; ++p)
    for (std::int64_t c = 0; c < 3; ++c)
      v[static_cast<std::size_t>(c * n + p)] =
          static_cast<T>(dequantize_signed(img.pixels[static_cast<std::size_t>(3 * p + c)]));
  return Tensor<T>({3, img.height, img.width}, std::move(v));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("error reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw std::runtime_error("error writing " + path.string());
}

template RgbImage to_rgb(const Tensor<float>&);
template RgbImage to_rgb(const Tensor<double>&);
template Tensor<float> from_rgb(const RgbImage&);
template Tensor<double> from_rgb(const RgbImage&);

}  // namespace dagan
