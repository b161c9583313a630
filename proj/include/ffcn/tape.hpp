#pragma once

#include "ffcn/param_store.hpp"
#include "ffcn/tensor.hpp"

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ffcn {

template <class S>
class Tape;

/// Handle to a tape node. Cheap to copy; valid for the tape's lifetime.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Tensor<S>& val() const { return tape->node(id).val(); }
  long rows() const { return val().rows(); }
  long cols() const { return val().cols(); }
  const Shape& shape() const { return val().shape; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// valid topological order; backward() walks it once in reverse.
template <class S>
class Tape {
 public:
  struct Node {
    Tensor<S> value;                 // owned, unless ext points at external storage
    const Tensor<S>* ext = nullptr;  // parameter values live in their store
    Tensor<S> grad;                  // lazily allocated
    int param_slot = -1;
    std::function<void(Tape&, Node&)> backprop;

    const Tensor<S>& val() const { return ext ? *ext : value; }
  };

  Var<S> leaf(Tensor<S> v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
  }

  /// Leaf bound to a parameter; its value is read in place and its gradient
  /// flows into the sink slot during backward().
  Var<S> param(const ParameterStore<S>& store, const std::string& path) {
    return param(store, store.slot(path));
  }

  Var<S> param(const ParameterStore<S>& store, int slot) {
    Node n;
    n.ext = &store.entry(slot).value;
    n.param_slot = slot;
    return push(std::move(n));
  }

  Var<S> make(Tensor<S> value, std::function<void(Tape&, Node&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    return push(std::move(n));
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  Tensor<S>& grad_of(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor<S>::zeros(n.val().shape);
    return n.grad;
  }

  /// Backpropagates seed through the graph below `loss` into `sink`.
  /// Every sink slot ends up populated; slots unreachable from the loss are zero.
  void backward(Var<S> loss, GradSink<S>& sink, S seed = S(1)) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
    const Tensor<S>& lv = node(loss.id).val();
    if (lv.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(lv.shape));
    grad_of(loss.id).data[0] += seed;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = node(i);
      if (n.grad.empty()) continue;
      if (n.param_slot >= 0) sink.add(n.param_slot, n.grad);
      if (n.backprop) n.backprop(*this, n);
    }
  }

  /// Convenience: backward against a store's own sink, with all slots populated.
  void backward(Var<S> loss, ParameterStore<S>& store, S seed = S(1)) {
    store.alloc_zero_grads();
    backward(loss, store.grads(), seed);
  }

 private:
  Var<S> push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace ffcn
