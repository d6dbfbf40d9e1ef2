#include "dagan/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dagan {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shape mismatch: cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

namespace {

// Strides of `in` laid against `out` (0 on broadcast axes).
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::int64_t> strides(out.size(), 0);
  std::int64_t stride = 1;
  const std::size_t offset = out.size() - in.size();
  for (std::size_t i = in.size(); i-- > 0;) {
    strides[i + offset] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) over the broadcast output in row-major order.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, F&& f) {
  const std::size_t rank = out.size();
  const std::int64_t total = numel(out);
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  // Innermost axis handled as a tight loop.
  const std::int64_t inner = out[rank - 1];
  const std::int64_t ia = sa[rank - 1], ib = sb[rank - 1];
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t ao = 0, bo = 0;
  for (std::int64_t o = 0; o < total; o += inner) {
    for (std::int64_t j = 0; j < inner; ++j) f(o + j, ao + j * ia, bo + j * ib);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      ao += sa[d];
      bo += sb[d];
      if (idx[d] < out[d]) break;
      ao -= sa[d] * out[d];
      bo -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinaryKind { Add, Sub, Mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind, std::string_view name) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  const bool same = a.shape() == b.shape();
  switch (kind) {
    case BinaryKind::Add:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = pa[i] + pb[j]; });
      }
      break;
    case BinaryKind::Sub:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = pa[i] - pb[j]; });
      }
      break;
    case BinaryKind::Mul:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = pa[i] * pb[j]; });
      }
      break;
  }
  BackwardFn<T> back;
  if (detail::needs_grad<T>({&a, &b})) {
    back = [a, b, out_shape, sa, sb, kind, same](std::span<const T> g, GradInputs<T>& gin) {
      const T* pa = a.data().data();
      const T* pb = b.data().data();
      T* ga = gin[0].empty() ? nullptr : gin[0].data();
      T* gb = gin[1].empty() ? nullptr : gin[1].data();
      const T sign_b = kind == BinaryKind::Sub ? T(-1) : T(1);
      if (same) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (kind == BinaryKind::Mul) {
            if (ga) ga[i] += g[i] * pb[i];
            if (gb) gb[i] += g[i] * pa[i];
          } else {
            if (ga) ga[i] += g[i];
            if (gb) gb[i] += sign_b * g[i];
          }
        }
        return;
      }
      for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) {
        if (kind == BinaryKind::Mul) {
          if (ga) ga[i] += g[o] * pb[j];
          if (gb) gb[j] += g[o] * pa[i];
        } else {
          if (ga) ga[i] += g[o];
          if (gb) gb[j] += sign_b * g[o];
        }
      });
    };
  }
  return detail::finish<T>(name, out_shape, std::move(out), {&a, &b}, std::move(back));
}

// Element-wise unary op; `dfdx(x, y)` is the local derivative given input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, std::string_view name, F f, D dfdx) {
  std::vector<T> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  BackwardFn<T> back;
  if (detail::needs_grad<T>({&x})) {
    Tensor<T> y(x.shape(), out);
    back = [x, y, dfdx](std::span<const T> g, GradInputs<T>& gin) {
      const auto in = x.data();
      const auto o = y.data();
      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * dfdx(in[i], o[i]);
    };
  }
  return detail::finish<T>(name, x.shape(), std::move(out), {&x}, std::move(back));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Add, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Sub, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Mul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(
      x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary(
      x, "add_scalar", [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return unary(
      x, "neg", [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary(
      x, "leaky_relu", [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(
      x, "abs", [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  BackwardFn<T> back = [](std::span<const T> g, GradInputs<T>& gin) {
    for (auto& v : gin[0]) v += g[0];
  };
  return detail::finish<T>("sum", Shape{}, {acc}, {&x}, std::move(back));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  const T n = static_cast<T>(x.size());
  BackwardFn<T> back = [n](std::span<const T> g, GradInputs<T>& gin) {
    const T share = g[0] / n;
    for (auto& v : gin[0]) v += share;
  };
  return detail::finish<T>("mean", Shape{}, {acc / n}, {&x}, std::move(back));
}

namespace {

int normalize_axis(int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return a;
}

// (outer, axis, inner) decomposition of a shape around `axis`.
struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
  r.extent = s[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> tensors, int axis) {
  if (tensors.empty()) throw ShapeError("concat of an empty list");
  const Shape& first = tensors[0].shape();
  const int ax = normalize_axis(axis, static_cast<int>(first.size()));
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(ax)] = 0;
  for (const auto& t : tensors) {
    bool ok = t.rank() == static_cast<int>(first.size());
    for (std::size_t d = 0; ok && d < first.size(); ++d) {
      if (static_cast<int>(d) != ax && t.shape()[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: shape " + to_string(t.shape()) + " disagrees with " +
                       to_string(first) + " off axis " + std::to_string(ax));
    }
    out_shape[static_cast<std::size_t>(ax)] += t.shape()[static_cast<std::size_t>(ax)];
  }
  const AxisSplit os = split_at(out_shape, ax);
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& t : tensors) {
    offsets.push_back(offset);
    const AxisSplit ts = split_at(t.shape(), ax);
    const std::int64_t chunk = ts.extent * ts.inner;
    const T* src = t.data().data();
    for (std::int64_t o = 0; o < os.outer; ++o) {
      std::copy_n(src + o * chunk, chunk, out.data() + o * os.extent * os.inner + offset * os.inner);
    }
    offset += ts.extent;
  }
  std::vector<const Tensor<T>*> inputs;
  std::vector<AxisSplit> splits;
  for (const auto& t : tensors) {
    inputs.push_back(&t);
    splits.push_back(split_at(t.shape(), ax));
  }
  BackwardFn<T> back = [os, offsets, splits](std::span<const T> g, GradInputs<T>& gin) {
    for (std::size_t k = 0; k < gin.size(); ++k) {
      if (gin[k].empty()) continue;
      const std::int64_t chunk = splits[k].extent * splits[k].inner;
      for (std::int64_t o = 0; o < os.outer; ++o) {
        const T* src = g.data() + o * os.extent * os.inner + offsets[k] * os.inner;
        T* dst = gin[k].data() + o * chunk;
        for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  };
  return detail::finish<T>("concat", out_shape, std::move(out),
                           std::span<const Tensor<T>* const>(inputs), std::move(back));
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis(axis, x.rank());
  const AxisSplit xs = split_at(x.shape(), ax);
  if (start < 0 || length < 1 || start + length > xs.extent) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range for " + to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(ax)] = length;
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  const T* src = x.data().data();
  for (std::int64_t o = 0; o < xs.outer; ++o) {
    std::copy_n(src + (o * xs.extent + start) * xs.inner, length * xs.inner,
                out.data() + o * length * xs.inner);
  }
  BackwardFn<T> back = [xs, start, length](std::span<const T> g, GradInputs<T>& gin) {
    for (std::int64_t o = 0; o < xs.outer; ++o) {
      T* dst = gin[0].data() + (o * xs.extent + start) * xs.inner;
      const T* s = g.data() + o * length * xs.inner;
      for (std::int64_t i = 0; i < length * xs.inner; ++i) dst[i] += s[i];
    }
  };
  return detail::finish<T>("slice", out_shape, std::move(out), {&x}, std::move(back));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != static_cast<std::int64_t>(x.size())) {
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  BackwardFn<T> back = [](std::span<const T> g, GradInputs<T>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
  };
  return detail::finish<T>("reshape", std::move(shape), std::move(out), {&x}, std::move(back));
}

#define DAGAN_INSTANTIATE(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                     \
  template Tensor<T> neg(const Tensor<T>&);                                               \
  template Tensor<T> sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> tanh(const Tensor<T>&);                                              \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                     \
  template Tensor<T> abs(const Tensor<T>&);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> mean(const Tensor<T>&);                                              \
  template Tensor<T> concat(std::span<const Tensor<T>>, int);                             \
  template Tensor<T> slice(const Tensor<T>&, int, std::int64_t, std::int64_t);            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
