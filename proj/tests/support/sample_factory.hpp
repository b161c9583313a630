#pragma once

// Hand-built VideoSamples for unit tests: valid by construction, fully
// present unless a test pokes holes, with boxes inside the legal range.

#include "ffcn/data_types.hpp"
#include "ffcn/rng.hpp"

#include <string>

namespace ffcn::testing {

inline VideoSample random_sample(int T, int N, int A, Rng& rng, int label = 0) {
  VideoSample s;
  s.id = "test_" + std::to_string(rng.below(1 << 20));
  s.T = T;
  s.N = N;
  s.A = A;
  s.roles.assign(static_cast<std::size_t>(N), Role::object);
  s.roles[0] = Role::hand;
  s.boxes.resize(static_cast<std::size_t>(T * N));
  s.present.assign(static_cast<std::size_t>(T * N), 1);
  s.appearance.resize(static_cast<std::size_t>(N) * static_cast<std::size_t>(T) * static_cast<std::size_t>(A));
  for (auto& a : s.appearance) a = rng.uniform(-1, 1);
  for (auto& b : s.boxes) b = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)};
  s.label = label;
  s.desc.verbs = {0};
  s.desc.nouns = {0};
  s.desc.order = {{Kind::verb, 0}, {Kind::noun, 0}};
  return s;
}

/// Swaps the trajectories and appearance of two object slots in place.
inline void swap_object_slots(VideoSample& s, int a, int b) {
  for (int t = 0; t < s.T; ++t) {
    std::swap(s.box(t, a), s.box(t, b));
    std::swap(s.present[static_cast<std::size_t>(t * s.N + a)], s.present[static_cast<std::size_t>(t * s.N + b)]);
  }
  for (int t = 0; t < s.T; ++t)
    for (int k = 0; k < s.A; ++k) std::swap(s.appearance_at(a, t)[k], s.appearance_at(b, t)[k]);
}

/// Marks a slot absent in every frame (zero boxes, present=false).
inline void clear_slot(VideoSample& s, int slot) {
  for (int t = 0; t < s.T; ++t) {
    s.box(t, slot) = {};
    s.present[static_cast<std::size_t>(t * s.N + slot)] = 0;
  }
}

}  // namespace ffcn::testing
