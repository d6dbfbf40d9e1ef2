#include "dagan/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace dagan {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

NonFiniteError::NonFiniteError(std::string op, std::size_t index)
    : std::runtime_error("non-finite value produced by '" + op + "' at element " +
                         std::to_string(index)),
      op_(std::move(op)) {}

template <typename T>
Tensor<T>::Tensor(Shape shape)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<T>>(static_cast<std::size_t>(numel(shape_)), T(0))) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)) {
  if (static_cast<std::int64_t>(data.size()) != numel(shape_)) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     to_string(shape_));
  }
  data_ = std::make_shared<std::vector<T>>(std::move(data));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  Tensor t(std::move(shape));
  std::fill(t.data_->begin(), t.data_->end(), value);
  return t;
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!data_) return {};
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
  node_ = {};
  return std::span<T>(*data_);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return (*data_)[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor t = *this;
  t.node_ = {};
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::with_node(NodeRef node) const {
  Tensor t = *this;
  t.node_ = node;
  return t;
}

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  std::vector<U> out(size());
  std::transform(data().begin(), data().end(), out.begin(), [](T v) { return static_cast<U>(v); });
  return Tensor<U>(shape_, std::move(out));
}

template <typename T>
bool identical(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<double> Tensor<float>::cast<double>() const;
template Tensor<float> Tensor<double>::cast<float>() const;
template Tensor<float> Tensor<float>::cast<float>() const;
template Tensor<double> Tensor<double>::cast<double>() const;
template bool identical(const Tensor<float>&, const Tensor<float>&);
template bool identical(const Tensor<double>&, const Tensor<double>&);

}  // namespace dagan
