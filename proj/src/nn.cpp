#include "dagan/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace dagan {

namespace {

struct Nchw {
  std::int64_t n, c, h, w;
  bool batched;
  std::int64_t plane() const { return h * w; }
};

Nchw as_nchw(const Shape& s, std::string_view op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw ShapeError(std::string(op) + ": expected C×H×W or N×C×H×W, got " + to_string(s));
}

Shape make_shape(const Nchw& d) {
  return d.batched ? Shape{d.n, d.c, d.h, d.w} : Shape{d.c, d.h, d.w};
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvPlan {
  Nchw in;
  std::int64_t c_out, k, out_h, out_w;
  ConvGeometry g;
  bool pointwise() const {
    return k == 1 && g.stride == 1 && g.padding == 0;
  }
  std::int64_t col_rows() const { return in.c * k * k; }
  std::int64_t col_cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* x, const ConvPlan& p, T* col) {
  const std::int64_t H = p.in.h, W = p.in.w, OH = p.out_h, OW = p.out_w;
  const std::int64_t s = p.g.stride, pad = p.g.padding, dil = p.g.dilation;
  T* dst = col;
  for (std::int64_t c = 0; c < p.in.c; ++c) {
    const T* plane = x + c * H * W;
    for (std::int64_t ki = 0; ki < p.k; ++ki) {
      for (std::int64_t kj = 0; kj < p.k; ++kj) {
        for (std::int64_t oh = 0; oh < OH; ++oh) {
          const std::int64_t ih = oh * s - pad + ki * dil;
          if (ih < 0 || ih >= H) {
            std::fill_n(dst, OW, T(0));
            dst += OW;
            continue;
          }
          const T* row = plane + ih * W;
          const std::int64_t off = kj * dil - pad;
          if (s == 1) {
            // Valid output columns are [lo, hi); iw = ow + off.
            const std::int64_t lo = std::clamp<std::int64_t>(-off, 0, OW);
            const std::int64_t hi = std::clamp<std::int64_t>(W - off, lo, OW);
            std::fill(dst, dst + lo, T(0));
            std::copy(row + lo + off, row + hi + off, dst + lo);
            std::fill(dst + hi, dst + OW, T(0));
            dst += OW;
            continue;
          }
          for (std::int64_t ow = 0; ow < OW; ++ow) {
            const std::int64_t iw = ow * s + off;
            *dst++ = (iw >= 0 && iw < W) ? row[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvPlan& p, T* dx) {
  const std::int64_t H = p.in.h, W = p.in.w, OH = p.out_h, OW = p.out_w;
  const std::int64_t s = p.g.stride, pad = p.g.padding, dil = p.g.dilation;
  const T* src = col;
  for (std::int64_t c = 0; c < p.in.c; ++c) {
    T* plane = dx + c * H * W;
    for (std::int64_t ki = 0; ki < p.k; ++ki) {
      for (std::int64_t kj = 0; kj < p.k; ++kj) {
        for (std::int64_t oh = 0; oh < OH; ++oh) {
          const std::int64_t ih = oh * s - pad + ki * dil;
          if (ih < 0 || ih >= H) {
            src += OW;
            continue;
          }
          T* row = plane + ih * W;
          const std::int64_t off = kj * dil - pad;
          if (s == 1) {
            const std::int64_t lo = std::clamp<std::int64_t>(-off, 0, OW);
            const std::int64_t hi = std::clamp<std::int64_t>(W - off, lo, OW);
            T* r = row + off;
            for (std::int64_t ow = lo; ow < hi; ++ow) r[ow] += src[ow];
            src += OW;
            continue;
          }
          for (std::int64_t ow = 0; ow < OW; ++ow) {
            const std::int64_t iw = ow * s + off;
            if (iw >= 0 && iw < W) row[iw] += src[ow];
          }
          src += OW;
        }
      }
    }
  }
}

}  // namespace

std::int64_t conv_output_size(std::int64_t in, std::int64_t kernel, const ConvGeometry& g) {
  const std::int64_t span = in + 2 * g.padding - g.dilation * (kernel - 1) - 1;
  if (span < 0) return 0;
  return span / g.stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvGeometry& geometry) {
  const Nchw in = as_nchw(x.shape(), "conv2d");
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be C_out×C_in×k×k, got " + to_string(weight.shape()));
  }
  if (weight.dim(1) != in.c) {
    throw ShapeError("conv2d: channel mismatch, input " + to_string(x.shape()) + " vs weight " +
                     to_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  if (geometry.stride < 1 || geometry.dilation < 1 || geometry.padding < 0) {
    throw ShapeError("conv2d: invalid stride/padding/dilation");
  }
  ConvPlan p{in, weight.dim(0), weight.dim(2), 0, 0, geometry};
  p.out_h = conv_output_size(in.h, p.k, geometry);
  p.out_w = conv_output_size(in.w, p.k, geometry);
  if (p.out_h < 1 || p.out_w < 1) {
    throw ShapeError("conv2d: degenerate output size for input " + to_string(x.shape()) +
                     " and kernel " + std::to_string(p.k));
  }
  const Nchw out_dims{in.n, p.c_out, p.out_h, p.out_w, in.batched};
  const std::int64_t rows = p.col_rows(), cols = p.col_cols();
  const std::int64_t in_stride = in.c * in.plane();
  const std::int64_t out_stride = p.c_out * cols;

  const bool save_cols = !p.pointwise() && detail::needs_grad<T>({&weight});
  std::vector<T> out(static_cast<std::size_t>(in.n * out_stride));
  std::vector<T> saved_cols;
  if (save_cols) saved_cols.resize(static_cast<std::size_t>(in.n * rows * cols));
  std::vector<T> scratch;
  if (!p.pointwise() && !save_cols) scratch.resize(static_cast<std::size_t>(rows * cols));

  ConstMapMat<T> w(weight.data().data(), p.c_out, rows);
  const T* b = bias.data().data();
  for (std::int64_t n = 0; n < in.n; ++n) {
    const T* xs = x.data().data() + n * in_stride;
    const T* col = xs;
    if (!p.pointwise()) {
      T* dst = save_cols ? saved_cols.data() + n * rows * cols : scratch.data();
      im2col(xs, p, dst);
      col = dst;
    }
    MapMat<T> y(out.data() + n * out_stride, p.c_out, cols);
    y.noalias() = w * ConstMapMat<T>(col, rows, cols);
    for (std::int64_t c = 0; c < p.c_out; ++c) y.row(c).array() += b[c];
  }

  BackwardFn<T> back;
  if (detail::needs_grad<T>({&x, &weight, &bias})) {
    back = [x, weight, p, saved = std::move(saved_cols)](std::span<const T> g, GradInputs<T>& gin) {
      const std::int64_t rows = p.col_rows(), cols = p.col_cols();
      const std::int64_t in_stride = p.in.c * p.in.plane();
      const std::int64_t out_stride = p.c_out * cols;
      ConstMapMat<T> w(weight.data().data(), p.c_out, rows);
      std::vector<T> dcol;
      if (!gin[0].empty() && !p.pointwise()) dcol.resize(static_cast<std::size_t>(rows * cols));
      for (std::int64_t n = 0; n < p.in.n; ++n) {
        ConstMapMat<T> dy(g.data() + n * out_stride, p.c_out, cols);
        if (!gin[1].empty()) {
          const T* col = p.pointwise() ? x.data().data() + n * in_stride
                                       : saved.data() + n * rows * cols;
          MapMat<T> dw(gin[1].data(), p.c_out, rows);
          dw.noalias() += dy * ConstMapMat<T>(col, rows, cols).transpose();
        }
        if (!gin[2].empty()) {
          for (std::int64_t c = 0; c < p.c_out; ++c) {
            T acc = 0;
            const T* r = g.data() + n * out_stride + c * cols;
            for (std::int64_t j = 0; j < cols; ++j) acc += r[j];
            gin[2][static_cast<std::size_t>(c)] += acc;
          }
        }
        if (!gin[0].empty()) {
          T* dx = gin[0].data() + n * in_stride;
          if (p.pointwise()) {
            MapMat<T> dxm(dx, rows, cols);
            dxm.noalias() += w.transpose() * dy;
          } else {
            MapMat<T> dc(dcol.data(), rows, cols);
            dc.noalias() = w.transpose() * dy;
            col2im_add(dcol.data(), p, dx);
          }
        }
      }
    };
  }
  return detail::finish<T>("conv2d", make_shape(out_dims), std::move(out), {&x, &weight, &bias},
                           std::move(back));
}

template <typename T>
Tensor<T> channel_reduce_mean(const Tensor<T>& x) {
  const Nchw d = as_nchw(x.shape(), "channel_reduce_mean");
  const std::int64_t hw = d.plane();
  std::vector<T> out(static_cast<std::size_t>(d.n * hw), T(0));
  const T* src = x.data().data();
  const T inv = T(1) / static_cast<T>(d.c);
  for (std::int64_t n = 0; n < d.n; ++n) {
    T* o = out.data() + n * hw;
    for (std::int64_t c = 0; c < d.c; ++c) {
      const T* s = src + (n * d.c + c) * hw;
      for (std::int64_t i = 0; i < hw; ++i) o[i] += s[i];
    }
    for (std::int64_t i = 0; i < hw; ++i) o[i] *= inv;
  }
  BackwardFn<T> back = [d, inv](std::span<const T> g, GradInputs<T>& gin) {
    const std::int64_t hw = d.plane();
    for (std::int64_t n = 0; n < d.n; ++n) {
      for (std::int64_t c = 0; c < d.c; ++c) {
        T* dst = gin[0].data() + (n * d.c + c) * hw;
        const T* s = g.data() + n * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += s[i] * inv;
      }
    }
  };
  return detail::finish<T>("channel_reduce_mean", make_shape({d.n, 1, d.h, d.w, d.batched}),
                           std::move(out), {&x}, std::move(back));
}

template <typename T>
Tensor<T> channel_reduce_max(const Tensor<T>& x) {
  const Nchw d = as_nchw(x.shape(), "channel_reduce_max");
  const std::int64_t hw = d.plane();
  std::vector<T> out(static_cast<std::size_t>(d.n * hw));
  std::vector<std::int32_t> argmax(out.size(), 0);
  const T* src = x.data().data();
  for (std::int64_t n = 0; n < d.n; ++n) {
    T* o = out.data() + n * hw;
    std::int32_t* a = argmax.data() + n * hw;
    std::copy_n(src + n * d.c * hw, hw, o);
    for (std::int64_t c = 1; c < d.c; ++c) {
      const T* s = src + (n * d.c + c) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        if (s[i] > o[i]) {
          o[i] = s[i];
          a[i] = static_cast<std::int32_t>(c);
        }
      }
    }
  }
  BackwardFn<T> back = [d, argmax = std::move(argmax)](std::span<const T> g, GradInputs<T>& gin) {
    const std::int64_t hw = d.plane();
    for (std::int64_t n = 0; n < d.n; ++n) {
      for (std::int64_t i = 0; i < hw; ++i) {
        const std::int64_t c = argmax[static_cast<std::size_t>(n * hw + i)];
        gin[0][static_cast<std::size_t>((n * d.c + c) * hw + i)] += g[static_cast<std::size_t>(n * hw + i)];
      }
    }
  };
  return detail::finish<T>("channel_reduce_max", make_shape({d.n, 1, d.h, d.w, d.batched}),
                           std::move(out), {&x}, std::move(back));
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Nchw d = as_nchw(x.shape(), "global_avg_pool");
  const std::int64_t hw = d.plane();
  const T inv = T(1) / static_cast<T>(hw);
  std::vector<T> out(static_cast<std::size_t>(d.n * d.c));
  const T* src = x.data().data();
  for (std::int64_t i = 0; i < d.n * d.c; ++i) {
    T acc = 0;
    for (std::int64_t j = 0; j < hw; ++j) acc += src[i * hw + j];
    out[static_cast<std::size_t>(i)] = acc * inv;
  }
  BackwardFn<T> back = [d, inv](std::span<const T> g, GradInputs<T>& gin) {
    const std::int64_t hw = d.plane();
    for (std::int64_t i = 0; i < d.n * d.c; ++i) {
      const T share = g[static_cast<std::size_t>(i)] * inv;
      for (std::int64_t j = 0; j < hw; ++j) gin[0][static_cast<std::size_t>(i * hw + j)] += share;
    }
  };
  return detail::finish<T>("global_avg_pool", make_shape({d.n, d.c, 1, 1, d.batched}),
                           std::move(out), {&x}, std::move(back));
}

template <typename T>
Tensor<T> nearest_resize(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  const Nchw d = as_nchw(x.shape(), "nearest_resize");
  if (out_h < 1 || out_w < 1) throw ShapeError("nearest_resize: output size must be >= 1");
  std::vector<std::int64_t> src_index(static_cast<std::size_t>(out_h * out_w));
  for (std::int64_t i = 0; i < out_h; ++i) {
    const std::int64_t si = i * d.h / out_h;
    for (std::int64_t j = 0; j < out_w; ++j) {
      src_index[static_cast<std::size_t>(i * out_w + j)] = si * d.w + j * d.w / out_w;
    }
  }
  const std::int64_t planes = d.n * d.c, in_hw = d.plane(), out_hw = out_h * out_w;
  std::vector<T> out(static_cast<std::size_t>(planes * out_hw));
  const T* src = x.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t i = 0; i < out_hw; ++i) {
      out[static_cast<std::size_t>(p * out_hw + i)] = src[p * in_hw + src_index[static_cast<std::size_t>(i)]];
    }
  }
  BackwardFn<T> back = [planes, in_hw, out_hw, src_index = std::move(src_index)](
                           std::span<const T> g, GradInputs<T>& gin) {
    for (std::int64_t p = 0; p < planes; ++p) {
      for (std::int64_t i = 0; i < out_hw; ++i) {
        gin[0][static_cast<std::size_t>(p * in_hw + src_index[static_cast<std::size_t>(i)])] +=
            g[static_cast<std::size_t>(p * out_hw + i)];
      }
    }
  };
  return detail::finish<T>("nearest_resize", make_shape({d.n, d.c, out_h, out_w, d.batched}),
                           std::move(out), {&x}, std::move(back));
}

template <typename T>
Tensor<T> avg_pool2x2(const Tensor<T>& x) {
  const Nchw d = as_nchw(x.shape(), "avg_pool2x2");
  if (d.h % 2 != 0 || d.w % 2 != 0) {
    throw ShapeError("avg_pool2x2: spatial size must be even, got " + to_string(x.shape()));
  }
  const std::int64_t oh = d.h / 2, ow = d.w / 2, planes = d.n * d.c;
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  const T* src = x.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* s = src + p * d.h * d.w;
    T* o = out.data() + p * oh * ow;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        const T* a = s + 2 * i * d.w + 2 * j;
        o[i * ow + j] = (a[0] + a[1] + a[d.w] + a[d.w + 1]) * T(0.25);
      }
    }
  }
  BackwardFn<T> back = [d, oh, ow, planes](std::span<const T> g, GradInputs<T>& gin) {
    for (std::int64_t p = 0; p < planes; ++p) {
      T* s = gin[0].data() + p * d.h * d.w;
      const T* o = g.data() + p * oh * ow;
      for (std::int64_t i = 0; i < oh; ++i) {
        for (std::int64_t j = 0; j < ow; ++j) {
          const T share = o[i * ow + j] * T(0.25);
          T* a = s + 2 * i * d.w + 2 * j;
          a[0] += share;
          a[1] += share;
          a[d.w] += share;
          a[d.w + 1] += share;
        }
      }
    }
  };
  return detail::finish<T>("avg_pool2x2", make_shape({d.n, d.c, oh, ow, d.batched}),
                           std::move(out), {&x}, std::move(back));
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift,
                        T eps) {
  const Nchw d = as_nchw(x.shape(), "instance_norm");
  if (scale.size() != static_cast<std::size_t>(d.c) || shift.size() != static_cast<std::size_t>(d.c)) {
    throw ShapeError("instance_norm: scale/shift must have " + std::to_string(d.c) + " entries");
  }
  if (!(eps > T(0))) throw std::invalid_argument("instance_norm: eps must be positive");
  const std::int64_t hw = d.plane();
  std::vector<T> out(x.size());
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(static_cast<std::size_t>(d.n * d.c));
  const T* src = x.data().data();
  for (std::int64_t n = 0; n < d.n; ++n) {
    for (std::int64_t c = 0; c < d.c; ++c) {
      const std::int64_t base = (n * d.c + c) * hw;
      T mu = 0;
      for (std::int64_t i = 0; i < hw; ++i) mu += src[base + i];
      mu /= static_cast<T>(hw);
      T var = 0;
      for (std::int64_t i = 0; i < hw; ++i) {
        const T dv = src[base + i] - mu;
        var += dv * dv;
      }
      var /= static_cast<T>(hw);
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(n * d.c + c)] = is;
      const T sc = scale[static_cast<std::size_t>(c)], sh = shift[static_cast<std::size_t>(c)];
      for (std::int64_t i = 0; i < hw; ++i) {
        const T xh = (src[base + i] - mu) * is;
        xhat[static_cast<std::size_t>(base + i)] = xh;
        out[static_cast<std::size_t>(base + i)] = xh * sc + sh;
      }
    }
  }
  BackwardFn<T> back = [d, scale, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                           std::span<const T> g, GradInputs<T>& gin) {
    const std::int64_t hw = d.plane();
    const T inv_hw = T(1) / static_cast<T>(hw);
    for (std::int64_t n = 0; n < d.n; ++n) {
      for (std::int64_t c = 0; c < d.c; ++c) {
        const std::int64_t base = (n * d.c + c) * hw;
        const T* gy = g.data() + base;
        const T* xh = xhat.data() + base;
        T sum_g = 0, sum_gx = 0;
        for (std::int64_t i = 0; i < hw; ++i) {
          sum_g += gy[i];
          sum_gx += gy[i] * xh[i];
        }
        if (!gin[1].empty()) gin[1][static_cast<std::size_t>(c)] += sum_gx;
        if (!gin[2].empty()) gin[2][static_cast<std::size_t>(c)] += sum_g;
        if (!gin[0].empty()) {
          const T sc = scale[static_cast<std::size_t>(c)];
          const T k = sc * inv_std[static_cast<std::size_t>(n * d.c + c)];
          const T mg = sum_g * inv_hw, mgx = sum_gx * inv_hw;
          T* dx = gin[0].data() + base;
          for (std::int64_t i = 0; i < hw; ++i) dx[i] += k * (gy[i] - mg - xh[i] * mgx);
        }
      }
    }
  };
  return detail::finish<T>("instance_norm", x.shape(), std::move(out), {&x, &scale, &shift},
                           std::move(back));
}

double InitStream::uniform(double bound) {
  ++counter_;
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;  // [0,1)
  return (2.0 * u - 1.0) * bound;
}

double glorot_bound(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel) {
  const double fan_in = static_cast<double>(in_channels * kernel * kernel);
  const double fan_out = static_cast<double>(out_channels * kernel * kernel);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Conv2dParams<T> init_conv(InitStream& stream, std::int64_t in_channels, std::int64_t out_channels,
                          std::int64_t kernel, ConvGeometry geometry) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1) {
    throw std::invalid_argument("init_conv: channels and kernel must be positive");
  }
  Conv2dParams<T> p;
  const double bound = glorot_bound(in_channels, out_channels, kernel);
  std::vector<T> w(static_cast<std::size_t>(out_channels * in_channels * kernel * kernel));
  for (auto& v : w) v = static_cast<T>(stream.uniform(bound));
  p.weight = Tensor<T>({out_channels, in_channels, kernel, kernel}, std::move(w));
  p.bias = Tensor<T>::zeros({out_channels});
  p.geometry = geometry;
  return p;
}

template <typename T>
InstanceNormParams<T> init_instance_norm(std::int64_t channels, T eps) {
  return {Tensor<T>::ones({channels}), Tensor<T>::zeros({channels}), eps};
}

#define DAGAN_INSTANTIATE(T)                                                                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
                            const ConvGeometry&);                                                \
  template Tensor<T> channel_reduce_mean(const Tensor<T>&);                                      \
  template Tensor<T> channel_reduce_max(const Tensor<T>&);                                       \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                          \
  template Tensor<T> nearest_resize(const Tensor<T>&, std::int64_t, std::int64_t);               \
  template Tensor<T> avg_pool2x2(const Tensor<T>&);                                              \
  template Tensor<T> instance_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);     \
  template Conv2dParams<T> init_conv(InitStream&, std::int64_t, std::int64_t, std::int64_t,      \
                                     ConvGeometry);                                              \
  template InstanceNormParams<T> init_instance_norm(std::int64_t, T);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
