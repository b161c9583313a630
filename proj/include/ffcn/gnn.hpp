#pragma once

#include "ffcn/graph_build.hpp"
#include "ffcn/mlp.hpp"
#include "ffcn/ops.hpp"

#include <string>
#include <vector>

namespace ffcn {

/// Refined per-edge feature sequences for one disentangled graph.
/// values is edge-major: row e*frames + t.
template <class S>
struct EdgeFeatureBlock {
  Kind kind = Kind::verb;
  Var<S> values;
  long num_edges = 0;
  long frames = 0;
};

/// Shared embedding MLP applied independently to every (frame, slot) row.
template <class S>
Var<S> init_embed(Tape<S>& tape, const ParameterStore<S>& store, const std::string& prefix, Var<S> nodes) {
  if (nodes.cols() != 4)
    throw std::invalid_argument("init_embed: node features must have 4 components, got " +
                                shape_str(nodes.shape()));
  return mlp_forward(tape, store, prefix + ".ini_mlp", nodes);
}

template <class S>
struct MessageStepOut {
  Var<S> edge_feats;  // frame-major: row t*E + e
  Var<S> node_feats;  // frame-major: row t*N + n
};

/// One round of joint edge/node refinement:
/// per edge (i, j): f_ij = edge_mlp([h_i, h_j]);
/// per node i: h'_i = node_mlp(sum over f_ij for all j adjacent to i).
/// The per-node sum is order-canonical, so relabeling slots cannot change it.
template <class S>
MessageStepOut<S> message_step(Tape<S>& tape, const ParameterStore<S>& store, const std::string& prefix,
                               Var<S> h, const EdgeSet& edges, long T, long N) {
  if (edges.pairs.empty()) throw std::invalid_argument("message_step: empty edge set");
  const long E = static_cast<long>(edges.pairs.size());
  std::vector<int> src_rows, dst_rows, node_group;
  src_rows.reserve(static_cast<std::size_t>(T * E));
  dst_rows.reserve(static_cast<std::size_t>(T * E));
  node_group.reserve(static_cast<std::size_t>(T * E));
  for (long t = 0; t < T; ++t)
    for (long e = 0; e < E; ++e) {
      const auto [i, j] = edges.pairs[static_cast<std::size_t>(e)];
      src_rows.push_back(static_cast<int>(t * N + i));
      dst_rows.push_back(static_cast<int>(t * N + j));
      node_group.push_back(static_cast<int>(t * N + i));
    }
  Var<S> hi = gather_rows(h, src_rows);
  Var<S> hj = gather_rows(h, dst_rows);
  Var<S> f = mlp_forward(tape, store, prefix + ".edge_mlp", concat_cols<S>({hi, hj}));
  Var<S> sums = scatter_sum_sorted(f, node_group, T * N);
  Var<S> h2 = mlp_forward(tape, store, prefix + ".node_mlp", sums);
  return {f, h2};
}

/// S rounds of message passing over `edges`; returns the final edge features
/// rearranged edge-major as an EdgeFeatureBlock.
template <class S>
EdgeFeatureBlock<S> refine(Tape<S>& tape, const ParameterStore<S>& store, const std::string& prefix,
                           Var<S> nodes, const EdgeSet& edges, long T, long N, int steps) {
  if (steps < 1) throw std::invalid_argument("refine: steps must be >= 1");
  Var<S> h = init_embed(tape, store, prefix, nodes);
  Var<S> f{};
  for (int s = 0; s < steps; ++s) {
    auto out = message_step(tape, store, prefix, h, edges, T, N);
    f = out.edge_feats;
    h = out.node_feats;
  }
  const long E = static_cast<long>(edges.pairs.size());
  std::vector<int> to_edge_major;
  to_edge_major.reserve(static_cast<std::size_t>(E * T));
  for (long e = 0; e < E; ++e)
    for (long t = 0; t < T; ++t) to_edge_major.push_back(static_cast<int>(t * E + e));
  return {edges.kind, gather_rows(f, to_edge_major), E, T};
}

/// Extracts the rows of `sub` out of a refined superset block.
template <class S>
EdgeFeatureBlock<S> route_block(Tape<S>& tape, const EdgeFeatureBlock<S>& full, const EdgeSet& full_set,
                                const EdgeSet& sub) {
  (void)tape;
  const std::vector<int> pos = edge_positions(full_set, sub);
  std::vector<int> rows;
  rows.reserve(pos.size() * static_cast<std::size_t>(full.frames));
  for (int p : pos)
    for (long t = 0; t < full.frames; ++t) rows.push_back(static_cast<int>(p * full.frames + t));
  return {sub.kind, gather_rows(full.values, rows), static_cast<long>(sub.pairs.size()), full.frames};
}

/// Zeroes every edge row that touches a slot absent in all frames, so padded
/// slots cannot leak MLP bias terms into downstream aggregation.
template <class S>
EdgeFeatureBlock<S> mask_absent_edges(const VideoSample& sample, EdgeFeatureBlock<S> block,
                                      const EdgeSet& edges) {
  std::vector<bool> absent(static_cast<std::size_t>(sample.N));
  bool any = false;
  for (int n = 0; n < sample.N; ++n) {
    absent[static_cast<std::size_t>(n)] = sample.fully_absent(n);
    any = any || absent[static_cast<std::size_t>(n)];
  }
  if (!any) return block;
  std::vector<S> mask(static_cast<std::size_t>(block.num_edges * block.frames), S(1));
  for (long e = 0; e < block.num_edges; ++e) {
    const auto [i, j] = edges.pairs[static_cast<std::size_t>(e)];
    if (!absent[static_cast<std::size_t>(i)] && !absent[static_cast<std::size_t>(j)]) continue;
    for (long t = 0; t < block.frames; ++t) mask[static_cast<std::size_t>(e * block.frames + t)] = S(0);
  }
  block.values = mask_rows(block.values, std::move(mask));
  return block;
}

}  // namespace ffcn
