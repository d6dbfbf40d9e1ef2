#pragma once

#include <span>
#include <vector>

#include "dagan/tape.hpp"
#include "dagan/tensor.hpp"

namespace dagan {

/// Numpy-style broadcast of two shapes (trailing alignment, size-1 stretches).
/// Throws ShapeError naming both shapes when incompatible.
Shape broadcast_shape(const Shape& a, const Shape& b);

// Binary element-wise ops with broadcasting. Gradients are summed over the
// broadcast axes of each operand.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// Unary element-wise ops.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> neg(const Tensor<T>& x);
/// Uses the branch form exp(x)/(1+exp(x)) for x < 0 so exp never overflows.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
/// Subgradient 0 at x == 0.
template <typename T>
Tensor<T> abs(const Tensor<T>& x);

// Full reductions to a scalar, accumulated sequentially in row-major order.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> tensors, int axis);
template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> tensors, int axis) {
  std::vector<Tensor<T>> v(tensors);
  return concat<T>(std::span<const Tensor<T>>(v), axis);
}

/// Elements [start, start+length) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

}  // namespace dagan
