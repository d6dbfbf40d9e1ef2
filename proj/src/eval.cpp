#include "dagan/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dagan/netpbm.hpp"

namespace dagan {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::int64_t c = 0; c < num_classes; ++c) s += at(c, c);
  return s;
}

ConfusionMatrix confusion(std::span<const Layout> preds, std::span<const Layout> gts, std::int64_t num_classes) {
  if (preds.empty()) throw std::invalid_argument("confusion: empty input");
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(gts.size()) + " ground truths");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].height != gts[i].height || preds[i].width != gts[i].width) {
      throw std::invalid_argument("confusion: sample " + std::to_string(i) + " sizes differ");
    }
    for (std::size_t p = 0; p < preds[i].ids.size(); ++p) {
      const std::int64_t g = gts[i].ids[p], q = preds[i].ids[p];
      if (g >= num_classes || q >= num_classes) throw std::invalid_argument("confusion: class id out of range");
      ++cm.at(g, q);
    }
  }
  return cm;
}

MiouResult miou(const ConfusionMatrix& cm) {
  MiouResult r;
  const std::int64_t k = cm.num_classes;
  double sum = 0;
  int present = 0;
  for (std::int64_t c = 0; c < k; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t uni = row + col - tp;
    if (uni == 0) {
      r.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class.push_back(iou);
    sum += iou;
    ++present;
  }
  r.miou = present ? sum / present : 0.0;
  return r;
}

MiouResult miou(std::span<const Layout> preds, std::span<const Layout> gts, std::int64_t num_classes) {
  return miou(confusion(preds, gts, num_classes));
}

double pixel_acc(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("pixel_acc: no pixels");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double pixel_acc(std::span<const Layout> preds, std::span<const Layout> gts) {
  std::int64_t k = 1;
  for (const auto& l : preds)
    for (auto id : l.ids) k = std::max<std::int64_t>(k, id + 1);
  for (const auto& l : gts)
    for (auto id : l.ids) k = std::max<std::int64_t>(k, id + 1);
  return pixel_acc(confusion(preds, gts, k));
}

GaussianStats gaussian_stats(std::span<const double> features, std::int64_t n, std::int64_t d) {
  if (n < 2) throw std::invalid_argument("gaussian_stats: need at least 2 samples");
  if (static_cast<std::int64_t>(features.size()) != n * d) throw std::invalid_argument("gaussian_stats: size mismatch");
  GaussianStats s;
  s.count = n;
  s.mean.assign(static_cast<std::size_t>(d), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) s.mean[static_cast<std::size_t>(j)] += features[static_cast<std::size_t>(i * d + j)];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  s.cov.assign(static_cast<std::size_t>(d * d), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t a = 0; a < d; ++a) {
      const double da = features[static_cast<std::size_t>(i * d + a)] - s.mean[static_cast<std::size_t>(a)];
      for (std::int64_t b = a; b < d; ++b) {
        const double db = features[static_cast<std::size_t>(i * d + b)] - s.mean[static_cast<std::size_t>(b)];
        s.cov[static_cast<std::size_t>(a * d + b)] += da * db;
      }
    }
  }
  for (std::int64_t a = 0; a < d; ++a)
    for (std::int64_t b = a; b < d; ++b) {
      auto& v = s.cov[static_cast<std::size_t>(a * d + b)];
      v /= static_cast<double>(n - 1);
      s.cov[static_cast<std::size_t>(b * d + a)] = v;
    }
  return s;
}

namespace {

using Mat = Eigen::MatrixXd;

Mat as_matrix(const GaussianStats& s, const char* which) {
  const auto d = s.dim();
  if (static_cast<std::int64_t>(s.cov.size()) != d * d) {
    throw std::invalid_argument(std::string("frechet_distance: covariance of ") + which + " is not d×d");
  }
  Mat m(d, d);
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t j = 0; j < d; ++j) m(i, j) = s.cov[static_cast<std::size_t>(i * d + j)];
  if (d > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument(std::string("frechet_distance: covariance of ") + which + " is not symmetric");
  }
  return 0.5 * (m + m.transpose());
}

/// Eigen-decomposition of a symmetric matrix with PSD checking.
Eigen::SelfAdjointEigenSolver<Mat> psd_eigen(const Mat& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error(std::string("eigendecomposition failed for ") + what);
  if (es.eigenvalues().size() > 0 && es.eigenvalues().minCoeff() < -1e-8) {
    throw std::domain_error(std::string(what) + " is not positive semi-definite (eigenvalue " +
                            std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
  return es;
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("frechet_distance: dimension " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
  }
  const Mat sa = as_matrix(a, "a");
  const Mat sb = as_matrix(b, "b");
  double mean_term = 0;
  for (std::int64_t i = 0; i < a.dim(); ++i) {
    const double d = a.mean[static_cast<std::size_t>(i)] - b.mean[static_cast<std::size_t>(i)];
    mean_term += d * d;
  }
  const auto ea = psd_eigen(sa, "covariance a");
  (void)psd_eigen(sb, "covariance b");
  const Eigen::VectorXd root_vals = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat root_a = ea.eigenvectors() * root_vals.asDiagonal() * ea.eigenvectors().transpose();
  Mat product = root_a * sb * root_a;
  product = 0.5 * (product + product.transpose());
  const auto ep = psd_eigen(product, "covariance product");
  const double cross = ep.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  // Non-negative in exact arithmetic; cancellation can leave a tiny negative.
  return std::max(0.0, mean_term + sa.trace() + sb.trace() - 2.0 * cross);
}

template <typename T>
std::vector<std::filesystem::path> export_attention(const AttentionOutput<T>& attn, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  if (attn.a_s) {
    const Tensor<T>& a = *attn.a_s;
    if (a.rank() != 3 || a.dim(0) != 1) throw ShapeError("export_attention: A_s must be 1×H×W, got " + to_string(a.shape()));
    GrayImage img{a.dim(2), a.dim(1), {}};
    for (T v : a.data()) img.pixels.push_back(quantize_unit(static_cast<double>(v)));
    const auto path = dir / "sam.pgm";
    write_file(path, encode_pgm(img));
    written.push_back(path);
  }
  if (attn.delta) {
    const Tensor<T>& d = *attn.delta;
    if (d.rank() != 3 || d.dim(1) != 1 || d.dim(2) != 1) {
      throw ShapeError("export_attention: δ must be C×1×1, got " + to_string(d.shape()));
    }
    std::string text;
    char buf[64];
    for (T v : d.data()) {
      std::snprintf(buf, sizeof buf, "%.6f\n", static_cast<double>(v));
      text += buf;
    }
    const auto txt = dir / "cam_delta.txt";
    write_file(txt, text);
    written.push_back(txt);
    constexpr std::int64_t bar = 16;
    const std::int64_t c = d.dim(0);
    GrayImage strip{c * bar, bar, std::vector<std::uint8_t>(static_cast<std::size_t>(c * bar * bar))};
    for (std::int64_t y = 0; y < bar; ++y)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t x = 0; x < bar; ++x)
          strip.pixels[static_cast<std::size_t>(y * c * bar + ch * bar + x)] =
              quantize_unit(static_cast<double>(d[static_cast<std::size_t>(ch)]));
    const auto pgm = dir / "cam_delta.pgm";
    write_file(pgm, encode_pgm(strip));
    written.push_back(pgm);
  }
  return written;
}

std::vector<double> read_delta_text(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<double> out;
  for (double v; in >> v;) out.push_back(v);
  if (!in.eof()) throw std::runtime_error("malformed delta file " + path.string());
  return out;
}

template std::vector<std::filesystem::path> export_attention(const AttentionOutput<float>&, const std::filesystem::path&);
template std::vector<std::filesystem::path> export_attention(const AttentionOutput<double>&, const std::filesystem::path&);

}  // namespace dagan
