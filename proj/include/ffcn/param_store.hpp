#pragma once

#include "ffcn/rng.hpp"
#include "ffcn/tensor.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffcn {

/// Per-parameter gradient accumulators, slot-aligned with a ParameterStore.
/// Buffers are allocated lazily; an empty buffer means "no gradient yet".
template <class S>
class GradSink {
 public:
  GradSink() = default;
  explicit GradSink(std::size_t slots) : grads_(slots) {}

  void reset(std::size_t slots) {
    grads_.assign(slots, Tensor<S>());
  }

  std::size_t slots() const { return grads_.size(); }
  bool allocated(int slot) const { return !grads_[static_cast<std::size_t>(slot)].empty(); }

  Tensor<S>& ensure(int slot, const Shape& shape) {
    Tensor<S>& g = grads_[static_cast<std::size_t>(slot)];
    if (g.empty()) g = Tensor<S>::zeros(shape);
    return g;
  }

  Tensor<S>& at(int slot) { return grads_[static_cast<std::size_t>(slot)]; }
  const Tensor<S>& at(int slot) const { return grads_[static_cast<std::size_t>(slot)]; }

  void add(int slot, const Tensor<S>& g) {
    Tensor<S>& dst = ensure(slot, g.shape);
    dst.vec() += g.vec();
  }

  /// Ordered accumulation of another sink (used for the per-sample reduction).
  void accumulate(const GradSink& other) {
    for (std::size_t i = 0; i < other.grads_.size(); ++i) {
      if (other.grads_[i].empty()) continue;
      add(static_cast<int>(i), other.grads_[i]);
    }
  }

  void clear() {
    for (auto& g : grads_) g = Tensor<S>();
  }

 private:
  std::vector<Tensor<S>> grads_;
};

/// Every trainable array, addressable by a stable dotted path.
/// Entries keep registration order; the path set is fixed after model build.
template <class S>
class ParameterStore {
 public:
  struct Entry {
    std::string path;
    Tensor<S> value;
    Tensor<S> velocity;
  };

  int add(const std::string& path, Tensor<S> value) {
    if (index_.count(path)) throw std::invalid_argument("duplicate parameter path: " + path);
    const int slot = static_cast<int>(entries_.size());
    Entry e;
    e.path = path;
    e.velocity = Tensor<S>::zeros(value.shape);
    e.value = std::move(value);
    entries_.push_back(std::move(e));
    index_[path] = slot;
    grads_.reset(entries_.size());
    return slot;
  }

  bool has(const std::string& path) const { return index_.count(path) != 0; }

  int slot(const std::string& path) const {
    auto it = index_.find(path);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter path: " + path);
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  const Entry& entry(int slot) const { return entries_[static_cast<std::size_t>(slot)]; }
  Entry& entry(int slot) { return entries_[static_cast<std::size_t>(slot)]; }
  const Tensor<S>& value(const std::string& path) const { return entries_[index_at(path)].value; }
  Tensor<S>& value(const std::string& path) { return entries_[index_at(path)].value; }

  GradSink<S>& grads() { return grads_; }
  const GradSink<S>& grads() const { return grads_; }

  long step_count() const { return step_count_; }
  void set_step_count(long n) { step_count_ = n; }

  void alloc_zero_grads() {
    for (std::size_t i = 0; i < entries_.size(); ++i) grads_.ensure(static_cast<int>(i), entries_[i].value.shape);
  }

  void clear_grads() { grads_.clear(); }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.path);
    return out;
  }

 private:
  std::size_t index_at(const std::string& path) const { return static_cast<std::size_t>(slot(path)); }

  std::vector<Entry> entries_;
  std::map<std::string, int> index_;
  GradSink<S> grads_;
  long step_count_ = 0;
};

inline constexpr double kSgdMomentum = 0.9;
inline constexpr double kSgdWeightDecay = 1e-4;

/// One SGD step: v <- 0.9 v + g + 1e-4 w; w <- w - lr v. Grads are cleared.
template <class S>
void sgd_step(ParameterStore<S>& store, S lr) {
  GradSink<S>& sink = store.grads();
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!sink.allocated(static_cast<int>(i)))
      throw std::runtime_error("sgd_step: missing gradient for " + store.entry(static_cast<int>(i)).path);
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(static_cast<int>(i));
    auto v = e.velocity.vec();
    auto w = e.value.vec();
    auto g = sink.at(static_cast<int>(i)).vec();
    v = S(kSgdMomentum) * v + g + S(kSgdWeightDecay) * w;
    w -= lr * v;
  }
  store.clear_grads();
  store.set_step_count(store.step_count() + 1);
}

/// Affine weight init: uniform in +/- sqrt(6 / (fan_in + fan_out)).
template <class S>
Tensor<S> glorot_uniform(long fan_out, long fan_in, Rng& rng) {
  Tensor<S> w(Shape{fan_out, fan_in});
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : w.data) x = static_cast<S>(rng.uniform(-bound, bound));
  return w;
}

}  // namespace ffcn
