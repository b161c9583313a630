#pragma once

#include "ffcn/data_types.hpp"
#include "ffcn/tensor.hpp"

#include <stdexcept>
#include <vector>

namespace ffcn {

/// Packs (cx, cy, w, h) per slot per frame; absent slots stay zero rows.
/// Output is frame-major: row t*N + n.
template <class S>
Tensor<S> build_node_features(const VideoSample& sample) {
  Tensor<S> out(Shape{static_cast<long>(sample.T) * sample.N, 4});
  for (int t = 0; t < sample.T; ++t)
    for (int n = 0; n < sample.N; ++n) {
      if (!sample.is_present(t, n)) continue;
      const auto& b = sample.box(t, n);
      const long r = static_cast<long>(t) * sample.N + n;
      out(r, 0) = static_cast<S>(b.cx);
      out(r, 1) = static_cast<S>(b.cy);
      out(r, 2) = static_cast<S>(b.w);
      out(r, 3) = static_cast<S>(b.h);
    }
  return out;
}

/// Splits the instance graph into its verb (hand-object) and preposition
/// (object-object) edge sets. Both directions of every pair are kept since
/// edge features concatenate endpoint states in order. Pairs are enumerated
/// lexicographically.
inline std::pair<EdgeSet, EdgeSet> build_edge_sets(const std::vector<Role>& roles) {
  int hands = 0, objects = 0;
  for (Role r : roles) (r == Role::hand ? hands : objects)++;
  if (hands == 0) throw std::invalid_argument("build_edge_sets: no hand slot");
  if (objects == 0) throw std::invalid_argument("build_edge_sets: no object slot");
  EdgeSet verb{Kind::verb, {}};
  EdgeSet prep{Kind::prep, {}};
  const int n = static_cast<int>(roles.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool hi = roles[static_cast<std::size_t>(i)] == Role::hand;
      const bool hj = roles[static_cast<std::size_t>(j)] == Role::hand;
      if (hi != hj)
        verb.pairs.emplace_back(i, j);
      else if (!hi && !hj)
        prep.pairs.emplace_back(i, j);
      // hand-hand pairs carry neither verb nor preposition semantics
    }
  return {std::move(verb), std::move(prep)};
}

/// Union of the verb and preposition sets, in lexicographic pair order.
/// This is the graph message passing runs on before the split.
inline EdgeSet union_edge_set(const std::vector<Role>& roles) {
  auto [verb, prep] = build_edge_sets(roles);
  EdgeSet u{Kind::verb, {}};
  const int n = static_cast<int>(roles.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool hi = roles[static_cast<std::size_t>(i)] == Role::hand;
      const bool hj = roles[static_cast<std::size_t>(j)] == Role::hand;
      if (hi && hj) continue;
      u.pairs.emplace_back(i, j);
    }
  return u;
}

/// Positions of `subset` pairs inside `super` (for routing refined edge rows).
inline std::vector<int> edge_positions(const EdgeSet& super, const EdgeSet& subset) {
  std::vector<int> pos;
  pos.reserve(subset.pairs.size());
  for (const auto& p : subset.pairs) {
    int found = -1;
    for (std::size_t i = 0; i < super.pairs.size(); ++i)
      if (super.pairs[i] == p) {
        found = static_cast<int>(i);
        break;
      }
    if (found < 0) throw std::invalid_argument("edge_positions: pair missing from superset");
    pos.push_back(found);
  }
  return pos;
}

}  // namespace ffcn
