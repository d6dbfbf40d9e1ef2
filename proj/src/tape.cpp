#include "dagan/tape.hpp"

#include <atomic>
#include <cmath>

namespace dagan {

namespace {

std::atomic<std::uint64_t> next_tape_id{1};

template <typename T>
Tape<T>*& active_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

}  // namespace

template <typename T>
Tape<T>::Tape() : id_(next_tape_id.fetch_add(1)), previous_(active_slot<T>()) {
  active_slot<T>() = this;
}

template <typename T>
Tape<T>::~Tape() {
  active_slot<T>() = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_slot<T>();
}

template <typename T>
Tensor<T> Tape<T>::watch(const Tensor<T>& value) {
  Node node;
  node.kind = "leaf";
  node.size = value.size();
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  return value.with_node({id_, static_cast<std::int64_t>(nodes_.size() - 1)});
}

template <typename T>
std::int64_t Tape<T>::index_of(const Tensor<T>& t) const {
  return t.node().tape == id_ ? t.node().index : -1;
}

template <typename T>
NodeRef Tape<T>::record(std::string_view kind, std::span<const Tensor<T>* const> inputs,
                        std::size_t out_size, BackwardFn<T> backward) {
  Node node;
  node.kind = kind;
  node.size = out_size;
  node.inputs.reserve(inputs.size());
  for (const Tensor<T>* in : inputs) {
    node.inputs.push_back(index_of(*in));
    node.input_sizes.push_back(in->size());
  }
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {id_, static_cast<std::int64_t>(nodes_.size() - 1)};
}

template <typename T>
NoGradGuard<T>::NoGradGuard() : saved_(active_slot<T>()) {
  active_slot<T>() = nullptr;
}

template <typename T>
NoGradGuard<T>::~NoGradGuard() {
  active_slot<T>() = saved_;
}

template <typename T>
Tensor<T> Gradients<T>::wrt(const Tensor<T>& x) const {
  if (x.node().tape == tape_) {
    auto it = grads_.find(x.node().index);
    if (it != grads_.end()) return it->second;
  }
  return Tensor<T>::zeros(x.shape());
}

template <typename T>
bool Gradients<T>::contains(const Tensor<T>& x) const {
  return x.node().tape == tape_ && grads_.count(x.node().index) > 0;
}

template <typename T>
Gradients<T> backward(const Tape<T>& tape, const Tensor<T>& root) {
  if (root.size() != 1) {
    throw ShapeError("backward requires a scalar root, got shape " + to_string(root.shape()));
  }
  const auto& nodes = tape.nodes();
  std::unordered_map<std::int64_t, Tensor<T>> leaves;
  const std::int64_t root_index = tape.index_of(root);
  if (root_index < 0) return Gradients<T>(tape.id(), std::move(leaves));

  std::vector<std::vector<T>> grads(nodes.size());
  grads[static_cast<std::size_t>(root_index)].assign(1, T(1));

  for (std::int64_t i = root_index; i >= 0; --i) {
    auto& g = grads[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    const auto& node = nodes[static_cast<std::size_t>(i)];
    if (!node.backward) {
      leaves.emplace(i, Tensor<T>(node.shape, std::move(g)));
      continue;
    }
    GradInputs<T> grad_in(node.inputs.size());
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::int64_t in = node.inputs[k];
      if (in < 0) continue;
      auto& buf = grads[static_cast<std::size_t>(in)];
      if (buf.empty()) buf.assign(node.input_sizes[k], T(0));
      grad_in[k] = std::span<T>(buf);
    }
    node.backward(std::span<const T>(g), grad_in);
    std::vector<T>().swap(g);
  }
  return Gradients<T>(tape.id(), std::move(leaves));
}

namespace detail {

template <typename T>
void check_finite(std::string_view op, std::span<const T> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw NonFiniteError(std::string(op), i);
  }
}

template <typename T>
bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (!tape) return false;
  for (const Tensor<T>* in : inputs) {
    if (in && tape->index_of(*in) >= 0) return true;
  }
  return false;
}

template <typename T>
Tensor<T> finish(std::string_view op, Shape shape, std::vector<T> data,
                 std::span<const Tensor<T>* const> inputs, BackwardFn<T> backward) {
  check_finite<T>(op, data);
  Tensor<T> out(std::move(shape), std::move(data));
  Tape<T>* tape = Tape<T>::active();
  if (!tape) return out;
  bool any = false;
  for (const Tensor<T>* in : inputs) any = any || tape->index_of(*in) >= 0;
  if (!any) return out;
  return out.with_node(tape->record(op, inputs, out.size(), std::move(backward)));
}

template <typename T>
Tensor<T> finish(std::string_view op, Shape shape, std::vector<T> data,
                 std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> backward) {
  return finish<T>(op, std::move(shape), std::move(data),
                   std::span<const Tensor<T>* const>(inputs.begin(), inputs.size()),
                   std::move(backward));
}

}  // namespace detail

#define DAGAN_INSTANTIATE(T)                                                                      \
  template class Tape<T>;                                                                         \
  template class NoGradGuard<T>;                                                                  \
  template class Gradients<T>;                                                                    \
  template Gradients<T> backward(const Tape<T>&, const Tensor<T>&);                               \
  template void detail::check_finite<T>(std::string_view, std::span<const T>);                    \
  template bool detail::needs_grad<T>(std::initializer_list<const Tensor<T>*>);                   \
  template Tensor<T> detail::finish<T>(std::string_view, Shape, std::vector<T>,                   \
                                       std::span<const Tensor<T>* const>, BackwardFn<T>);         \
  template Tensor<T> detail::finish<T>(std::string_view, Shape, std::vector<T>,                   \
                                       std::initializer_list<const Tensor<T>*>, BackwardFn<T>);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
