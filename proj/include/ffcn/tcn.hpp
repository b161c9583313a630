#pragma once

#include "ffcn/gnn.hpp"
#include "ffcn/mlp.hpp"
#include "ffcn/ops.hpp"

#include <string>

namespace ffcn {

inline constexpr int kTcnLayers = 4;  // dilation factors 1, 2, 3, 4

/// One temporally aggregated graph: row e holds the head-k summary of edge e.
template <class S>
struct AggregatedGraph {
  Kind kind = Kind::verb;
  int head = 0;
  Var<S> values;  // [num_edges x D]
  long num_edges = 0;
};

/// Registers the four dilated residual layers under `prefix`.
/// Layer l: conv.weight [3 x D x D], conv.bias [D], proj.weight [D x D] (the
/// 1x1 convolution), proj.bias [D].
template <class S>
void register_tcn(ParameterStore<S>& store, const std::string& prefix, long D, Rng& rng) {
  for (int l = 0; l < kTcnLayers; ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    Tensor<S> w(Shape{3, D, D});
    const double bound = std::sqrt(6.0 / static_cast<double>(3 * D + D));
    for (auto& x : w.data) x = static_cast<S>(rng.uniform(-bound, bound));
    store.add(base + ".conv.weight", std::move(w));
    store.add(base + ".conv.bias", Tensor<S>::zeros(Shape{D}));
    store.add(base + ".proj.weight", glorot_uniform<S>(D, D, rng));
    store.add(base + ".proj.bias", Tensor<S>::zeros(Shape{D}));
  }
}

/// Four dilated residual layers over each edge's T-length feature sequence:
///   a = relu(conv_d(h)); h <- h + a proj^T + proj_bias
/// All edge rows share the same layer parameters.
template <class S>
EdgeFeatureBlock<S> tcn_forward(Tape<S>& tape, const ParameterStore<S>& store, const std::string& prefix,
                                EdgeFeatureBlock<S> block) {
  Var<S> h = block.values;
  for (int l = 0; l < kTcnLayers; ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    Var<S> conv = conv1d_dilated(h, tape.param(store, base + ".conv.weight"),
                                 tape.param(store, base + ".conv.bias"), block.frames, l + 1);
    Var<S> a = relu(conv);
    Var<S> proj = affine(a, tape.param(store, base + ".proj.weight"), tape.param(store, base + ".proj.bias"));
    h = add(h, proj);
  }
  block.values = h;
  return block;
}

/// Collapses each edge's T frame vectors into one summary vector with the
/// head-k MLP: concatenate over time (T*D input), then map to D.
template <class S>
AggregatedGraph<S> temporal_aggregate(Tape<S>& tape, const ParameterStore<S>& store,
                                      const std::string& head_prefix, const EdgeFeatureBlock<S>& block,
                                      int head, int n_max) {
  if (head < 0 || head >= n_max)
    throw std::invalid_argument("temporal_aggregate: head " + std::to_string(head) + " out of range (n_max " +
                                std::to_string(n_max) + ")");
  const long D = block.values.cols();
  // edge-major rows are contiguous per edge, so the reshape IS the time concat
  Var<S> flat = reshape(block.values, Shape{block.num_edges, block.frames * D});
  Var<S> q = mlp_forward(tape, store, head_prefix + ".h" + std::to_string(head), flat);
  return {block.kind, head, q, block.num_edges};
}

}  // namespace ffcn
