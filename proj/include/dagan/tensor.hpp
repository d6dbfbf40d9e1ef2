#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dagan {

using Shape = std::vector<std::int64_t>;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }

std::string to_string(const Shape& shape);
std::int64_t numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a forward operation produces NaN or Inf from finite inputs.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string op, std::size_t index);
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// Handle into a Tape. tape == 0 means "not tracked".
struct NodeRef {
  std::uint64_t tape = 0;
  std::int64_t index = -1;
  explicit operator bool() const { return tape != 0; }
};

/// Dense row-major tensor. Storage is shared and treated as immutable once a
/// tensor has been handed to an operation; mutable_data() copies on write.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T value);
  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const { return shape_; }
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return !data_; }
  static constexpr DType dtype() { return dtype_of<T>(); }

  std::span<const T> data() const {
    return data_ ? std::span<const T>(*data_) : std::span<const T>();
  }
  std::span<T> mutable_data();
  const T& operator[](std::size_t i) const { return (*data_)[i]; }

  /// Value of a single-element tensor.
  T item() const;

  const NodeRef& node() const { return node_; }
  bool tracked() const { return static_cast<bool>(node_); }
  /// Same storage, no autodiff history.
  Tensor detach() const;
  Tensor with_node(NodeRef node) const;

  template <typename U>
  Tensor<U> cast() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  NodeRef node_;
};

/// Bitwise equality of shape and values.
template <typename T>
bool identical(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace dagan
