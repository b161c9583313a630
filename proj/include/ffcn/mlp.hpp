#pragma once

#include "ffcn/ops.hpp"
#include "ffcn/param_store.hpp"

#include <string>
#include <vector>

namespace ffcn {

/// Layer widths of an MLP: in -> hidden... -> out, rectifier between layers,
/// final layer affine only. An empty hidden list is a single affine map.
struct MlpSpec {
  long in = 0;
  std::vector<long> hidden;
  long out = 0;

  std::vector<std::pair<long, long>> layer_dims() const {
    std::vector<std::pair<long, long>> dims;
    long prev = in;
    for (long h : hidden) {
      dims.emplace_back(h, prev);
      prev = h;
    }
    dims.emplace_back(out, prev);
    return dims;
  }
};

/// Registers `<prefix>.<i>.weight` / `<prefix>.<i>.bias` for each layer.
template <class S>
void register_mlp(ParameterStore<S>& store, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  const auto dims = spec.layer_dims();
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto [out_dim, in_dim] = dims[i];
    store.add(prefix + "." + std::to_string(i) + ".weight", glorot_uniform<S>(out_dim, in_dim, rng));
    store.add(prefix + "." + std::to_string(i) + ".bias", Tensor<S>::zeros(Shape{out_dim}));
  }
}

template <class S>
int mlp_num_layers(const ParameterStore<S>& store, const std::string& prefix) {
  int n = 0;
  while (store.has(prefix + "." + std::to_string(n) + ".weight")) ++n;
  return n;
}

/// Runs x through the MLP registered under `prefix`. x is [rows x in].
template <class S>
Var<S> mlp_forward(Tape<S>& tape, const ParameterStore<S>& store, const std::string& prefix, Var<S> x) {
  const int layers = mlp_num_layers(store, prefix);
  if (layers == 0) throw std::invalid_argument("mlp_forward: unknown layer path: " + prefix);
  Var<S> h = x;
  for (int i = 0; i < layers; ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    Var<S> w = tape.param(store, base + ".weight");
    Var<S> b = tape.param(store, base + ".bias");
    h = affine(h, w, b);
    if (i + 1 < layers) h = relu(h);
  }
  return h;
}

}  // namespace ffcn
