#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

/// Per-input gradient buffers handed to a node's backward function. An empty
/// span means that input does not need a gradient.
template <typename T>
using GradInputs = std::vector<std::span<T>>;

template <typename T>
using BackwardFn = std::function<void(std::span<const T> grad_out, GradInputs<T>& grad_in)>;

/// Append-only record of differentiable operations. Constructing a tape makes
/// it the active tape for the current thread (for its scalar type); the
/// previous tape is restored on destruction.
template <typename T>
class Tape {
 public:
  struct Node {
    std::string_view kind;
    std::vector<std::int64_t> inputs;  // -1 for inputs outside this tape
    std::vector<std::size_t> input_sizes;
    std::size_t size = 0;
    Shape shape;             // leaves only
    BackwardFn<T> backward;  // empty for leaves
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf; the returned tensor shares storage with `value`.
  Tensor<T> watch(const Tensor<T>& value);

  NodeRef record(std::string_view kind, std::span<const Tensor<T>* const> inputs,
                 std::size_t out_size, BackwardFn<T> backward);

  /// Index of `t` in this tape, or -1.
  std::int64_t index_of(const Tensor<T>& t) const;

  std::uint64_t id() const { return id_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  static Tape* active();

 private:
  std::uint64_t id_;
  Tape* previous_;
  std::vector<Node> nodes_;
};

/// Suspends recording for the current thread within its scope.
template <typename T>
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>* saved_;
};

/// Gradients of a scalar root with respect to every watched leaf.
template <typename T>
class Gradients {
 public:
  Gradients() = default;
  Gradients(std::uint64_t tape, std::unordered_map<std::int64_t, Tensor<T>> grads)
      : tape_(tape), grads_(std::move(grads)) {}

  /// dRoot/dX. Leaves the root does not depend on get a zero tensor of X's shape.
  Tensor<T> wrt(const Tensor<T>& x) const;
  bool contains(const Tensor<T>& x) const;
  std::size_t size() const { return grads_.size(); }
  const std::unordered_map<std::int64_t, Tensor<T>>& by_node() const { return grads_; }

 private:
  std::uint64_t tape_ = 0;
  std::unordered_map<std::int64_t, Tensor<T>> grads_;
};

/// Reverse sweep from a scalar root. Each node is visited once in reverse
/// recording order.
template <typename T>
Gradients<T> backward(const Tape<T>& tape, const Tensor<T>& root);

namespace detail {

/// Common tail of every forward op: checks finiteness and records a node when
/// any input is tracked on the active tape.
template <typename T>
Tensor<T> finish(std::string_view op, Shape shape, std::vector<T> data,
                 std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> backward);

template <typename T>
Tensor<T> finish(std::string_view op, Shape shape, std::vector<T> data,
                 std::span<const Tensor<T>* const> inputs, BackwardFn<T> backward);

/// True when a backward closure would ever run for these inputs.
template <typename T>
bool needs_grad(std::initializer_list<const Tensor<T>*> inputs);

template <typename T>
void check_finite(std::string_view op, std::span<const T> values);

}  // namespace detail

}  // namespace dagan
