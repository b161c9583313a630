#pragma once

#include "ffcn/tcn.hpp"

#include <string>

namespace ffcn {

/// One verb/preposition/noun representation extracted from a video.
template <class S>
struct ComponentFeature {
  Kind kind = Kind::verb;
  int index = 0;  // head index for verbs/preps, object slot index for nouns
  Var<S> vec;     // [1 x D]
};

/// Registers L graph-convolution layers under `prefix`: per layer a trainable
/// adjacency `adj` [N_e x N_e] (uniform 1/N_e plus sigma=1e-3 noise) and a
/// weight [D x D].
template <class S>
void register_gcn(ParameterStore<S>& store, const std::string& prefix, long num_edges, long D, int layers,
                  Rng& rng) {
  for (int l = 0; l < layers; ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    Tensor<S> adj(Shape{num_edges, num_edges});
    const double uniform = 1.0 / static_cast<double>(num_edges);
    for (auto& x : adj.data) x = static_cast<S>(uniform + rng.normal(0.0, 1e-3));
    store.add(base + ".adj", std::move(adj));
    store.add(base + ".weight", glorot_uniform<S>(D, D, rng));
  }
}

/// Z = A Q W + Q, with both A and W trainable.
template <class S>
Var<S> gcn_layer(Tape<S>& tape, const ParameterStore<S>& store, const std::string& layer_base, Var<S> q) {
  Var<S> a = tape.param(store, layer_base + ".adj");
  Var<S> w = tape.param(store, layer_base + ".weight");
  return add(matmul(matmul(a, q), w), q);
}

/// L stacked graph convolutions followed by average pooling over edge rows.
template <class S>
ComponentFeature<S> spatial_decompose(Tape<S>& tape, const ParameterStore<S>& store, const std::string& prefix,
                                      const AggregatedGraph<S>& g, int layers) {
  Var<S> q = g.values;
  for (int l = 0; l < layers; ++l) q = gcn_layer(tape, store, prefix + ".l" + std::to_string(l), q);
  return {g.kind, g.head, mean_rows_sorted(q)};
}

/// Fuses an object slot's per-frame appearance vectors into one noun feature.
/// Frames where the slot is absent contribute zero vectors to the fusion MLP.
template <class S>
ComponentFeature<S> noun_encode(Tape<S>& tape, const ParameterStore<S>& store, const VideoSample& sample,
                                int slot, int noun_index) {
  if (sample.roles[static_cast<std::size_t>(slot)] != Role::object)
    throw std::invalid_argument("noun_encode: slot " + std::to_string(slot) + " is not an object");
  Tensor<S> app(Shape{static_cast<long>(sample.T), static_cast<long>(sample.A)});
  std::vector<S> mask(static_cast<std::size_t>(sample.T), S(0));
  for (int t = 0; t < sample.T; ++t) {
    if (!sample.is_present(t, slot)) continue;
    mask[static_cast<std::size_t>(t)] = S(1);
    const double* a = sample.appearance_at(slot, t);
    for (int k = 0; k < sample.A; ++k) app(t, k) = static_cast<S>(a[k]);
  }
  Var<S> frames = mlp_forward(tape, store, "noun.frame", tape.leaf(std::move(app)));
  Var<S> masked = mask_rows(frames, std::move(mask));
  Var<S> flat = reshape(masked, Shape{1, static_cast<long>(sample.T) * masked.cols()});
  Var<S> fused = mlp_forward(tape, store, "noun.fuse", flat);
  return {Kind::noun, noun_index, fused};
}

}  // namespace ffcn
