#pragma once

#include "ffcn/spatial.hpp"

#include <numeric>
#include <string>
#include <vector>

namespace ffcn {

/// Everything the network's shape depends on. Kept separate from the run
/// config so checkpoints and tests can rebuild a model without a full config.
struct ArchConfig {
  long T = 16;
  long N = 4;
  long A = 16;
  long D = 128;
  int num_hands = 1;
  int gnn_steps = 2;
  int gcn_layers = 2;
  int n_max_verb = 2;
  int n_max_prep = 2;
  int n_max_noun = 2;
  long num_classes = 40;
  std::vector<long> hidden_ini = {};   // empty means {D}
  std::vector<long> hidden_edge = {};  // empty means {D}
  std::vector<long> hidden_node = {};  // empty means {D}
  std::vector<long> hidden_head = {};  // aggregation MLP: affine by default
  std::vector<long> hidden_fc;         // empty means {2D}
  bool fc_default = true;
  bool separate_refiners = false;
  bool per_head_tcn = false;

  std::vector<Role> canonical_roles() const {
    std::vector<Role> roles(static_cast<std::size_t>(N), Role::object);
    for (int h = 0; h < num_hands; ++h) roles[static_cast<std::size_t>(h)] = Role::hand;
    return roles;
  }

  int n_max(Kind k) const {
    switch (k) {
      case Kind::verb: return n_max_verb;
      case Kind::prep: return n_max_prep;
      case Kind::noun: return n_max_noun;
    }
    return 0;
  }

  int object_slot(int noun_index) const { return num_hands + noun_index; }

  void validate() const {
    if (T < 1 || N < 2 || A < 1 || D < 1 || num_classes < 2)
      throw std::invalid_argument("arch config: non-positive extent");
    if (num_hands < 1 || num_hands >= N) throw std::invalid_argument("arch config: bad hand count");
    if (n_max_verb < 1 || n_max_noun < 1 || n_max_prep < 0)
      throw std::invalid_argument("arch config: bad component counts");
    if (n_max_noun > N - num_hands)
      throw std::invalid_argument("arch config: more noun slots than object slots");
    for (int k : {n_max_verb, n_max_prep, n_max_noun})
      for (int c = 1; c <= k; ++c)
        if (D % c != 0)
          throw std::invalid_argument("arch config: D=" + std::to_string(D) +
                                      " not divisible by component count " + std::to_string(c));
  }
};

namespace detail {

inline std::vector<long> or_default(const std::vector<long>& v, std::vector<long> def) {
  return v.empty() ? def : v;
}

inline std::string kind_prefix(Kind k) { return kind_name(k); }

}  // namespace detail

template <class S>
struct ModelGraphs {
  EdgeSet verb;
  EdgeSet prep;
  EdgeSet all;  // union the full-graph refiner runs on
};

template <class S>
ModelGraphs<S> model_edge_sets(const ArchConfig& cfg) {
  const auto roles = cfg.canonical_roles();
  auto [verb, prep] = build_edge_sets(roles);
  return {std::move(verb), std::move(prep), union_edge_set(roles)};
}

/// Registers every trainable array of the network in a fixed order.
template <class S>
void build_parameters(ParameterStore<S>& store, const ArchConfig& cfg, Rng& rng) {
  cfg.validate();
  const long D = cfg.D;
  const auto graphs = model_edge_sets<S>(cfg);

  const MlpSpec ini{4, detail::or_default(cfg.hidden_ini, {D}), D};
  const MlpSpec edge{2 * D, detail::or_default(cfg.hidden_edge, {D}), D};
  const MlpSpec node{D, detail::or_default(cfg.hidden_node, {D}), D};
  if (cfg.separate_refiners) {
    for (const char* p : {"gnn_verb", "gnn_prep"}) {
      register_mlp(store, std::string(p) + ".ini_mlp", ini, rng);
      register_mlp(store, std::string(p) + ".edge_mlp", edge, rng);
      register_mlp(store, std::string(p) + ".node_mlp", node, rng);
    }
  } else {
    register_mlp(store, "gnn.ini_mlp", ini, rng);
    register_mlp(store, "gnn.edge_mlp", edge, rng);
    register_mlp(store, "gnn.node_mlp", node, rng);
  }

  for (Kind k : {Kind::verb, Kind::prep}) {
    const std::string kp = detail::kind_prefix(k);
    const int heads = cfg.n_max(k);
    if (cfg.per_head_tcn) {
      for (int h = 0; h < heads; ++h) register_tcn(store, "tcn." + kp + ".h" + std::to_string(h), D, rng);
    } else {
      register_tcn(store, "tcn." + kp, D, rng);
    }
    const MlpSpec head_spec{cfg.T * D, cfg.hidden_head, D};
    const long ne = static_cast<long>((k == Kind::verb ? graphs.verb : graphs.prep).pairs.size());
    for (int h = 0; h < heads; ++h) {
      register_mlp(store, "agg." + kp + ".h" + std::to_string(h), head_spec, rng);
      register_gcn(store, "gcn." + kp + ".h" + std::to_string(h), ne, D, cfg.gcn_layers, rng);
    }
  }

  register_mlp(store, "noun.frame", MlpSpec{cfg.A, {}, D}, rng);
  register_mlp(store, "noun.fuse", MlpSpec{cfg.T * D, {}, D}, rng);

  for (Kind k : {Kind::verb, Kind::prep, Kind::noun}) {
    for (int c = 1; c <= cfg.n_max(k); ++c)
      register_mlp(store, "comp.reduce." + std::string(detail::kind_prefix(k)) + ".c" + std::to_string(c),
                   MlpSpec{D, {}, D / c}, rng);
  }
  store.add("comp.null_prep", glorot_uniform<S>(1, D, rng));

  const std::vector<long> fc = cfg.hidden_fc.empty() && cfg.fc_default ? std::vector<long>{2 * D} : cfg.hidden_fc;
  register_mlp(store, "clf", MlpSpec{3 * D, fc, cfg.num_classes}, rng);
}

/// Reduces each component feature to D/count, concatenates the pieces in
/// description order, and fills an absent preposition block with the learned
/// null-component embedding. The result is always exactly 3*D wide.
template <class S>
Var<S> assemble_representation(Tape<S>& tape, const ParameterStore<S>& store, const ArchConfig& cfg,
                               const std::vector<Var<S>>& verb_feats, const std::vector<Var<S>>& prep_feats,
                               const std::vector<Var<S>>& noun_feats, const ActionDescription& desc) {
  const auto check = [&](Kind k, std::size_t have) {
    const int need = desc.count(k);
    if (need > static_cast<int>(have) || need > cfg.n_max(k))
      throw std::invalid_argument(std::string("assemble_representation: description needs ") +
                                  std::to_string(need) + " " + kind_name(k) + " feature(s), have " +
                                  std::to_string(have));
  };
  check(Kind::verb, verb_feats.size());
  check(Kind::prep, prep_feats.size());
  check(Kind::noun, noun_feats.size());
  if (desc.verbs.empty() || desc.nouns.empty())
    throw std::invalid_argument("assemble_representation: description must have >= 1 verb and >= 1 noun");

  std::vector<Var<S>> pieces;
  for (const auto& item : desc.order) {
    const int count = desc.count(item.kind);
    const Var<S>& feat = item.kind == Kind::verb   ? verb_feats[static_cast<std::size_t>(item.index)]
                         : item.kind == Kind::prep ? prep_feats[static_cast<std::size_t>(item.index)]
                                                   : noun_feats[static_cast<std::size_t>(item.index)];
    const std::string prefix =
        "comp.reduce." + std::string(detail::kind_prefix(item.kind)) + ".c" + std::to_string(count);
    pieces.push_back(mlp_forward(tape, store, prefix, feat));
  }
  if (desc.preps.empty()) pieces.push_back(tape.param(store, "comp.null_prep"));
  Var<S> rep = concat_cols(pieces);
  if (rep.cols() != 3 * cfg.D)
    throw std::logic_error("assemble_representation: assembled width " + std::to_string(rep.cols()) +
                           " != 3*D");
  return rep;
}

/// Shared fully connected stack plus linear classifier. Both the decomposition
/// and composition branches call this with the same parameter paths.
template <class S>
Var<S> classify(Tape<S>& tape, const ParameterStore<S>& store, Var<S> rep) {
  return mlp_forward(tape, store, "clf", rep);
}

template <class S>
struct DecompOutput {
  std::vector<ComponentFeature<S>> verb_heads;
  std::vector<ComponentFeature<S>> prep_heads;
  std::vector<ComponentFeature<S>> noun_slots;
  Var<S> rep;
  Var<S> logits;
};

/// Full decomposition branch on one sample: graph refinement, temporal and
/// spatial decomposition per head, noun fusion, assembly, classification.
/// All heads are computed; the description decides which ones reach `rep`.
template <class S>
DecompOutput<S> forward_decomposition(Tape<S>& tape, const ParameterStore<S>& store, const ArchConfig& cfg,
                                      const ModelGraphs<S>& graphs, const VideoSample& sample) {
  DecompOutput<S> out;
  Var<S> nodes = tape.leaf(build_node_features<S>(sample));

  EdgeFeatureBlock<S> verb_block, prep_block;
  if (cfg.separate_refiners) {
    verb_block = refine(tape, store, "gnn_verb", nodes, graphs.verb, cfg.T, cfg.N, cfg.gnn_steps);
    prep_block = refine(tape, store, "gnn_prep", nodes, graphs.prep, cfg.T, cfg.N, cfg.gnn_steps);
  } else {
    EdgeFeatureBlock<S> full = refine(tape, store, "gnn", nodes, graphs.all, cfg.T, cfg.N, cfg.gnn_steps);
    verb_block = route_block(tape, full, graphs.all, graphs.verb);
    prep_block = route_block(tape, full, graphs.all, graphs.prep);
  }
  verb_block = mask_absent_edges(sample, std::move(verb_block), graphs.verb);
  prep_block = mask_absent_edges(sample, std::move(prep_block), graphs.prep);

  for (Kind k : {Kind::verb, Kind::prep}) {
    const std::string kp = detail::kind_prefix(k);
    const EdgeFeatureBlock<S>& block = k == Kind::verb ? verb_block : prep_block;
    auto& heads = k == Kind::verb ? out.verb_heads : out.prep_heads;
    EdgeFeatureBlock<S> shared;
    if (!cfg.per_head_tcn) shared = tcn_forward(tape, store, "tcn." + kp, block);
    for (int h = 0; h < cfg.n_max(k); ++h) {
      const EdgeFeatureBlock<S> refined =
          cfg.per_head_tcn ? tcn_forward(tape, store, "tcn." + kp + ".h" + std::to_string(h), block) : shared;
      AggregatedGraph<S> agg = temporal_aggregate(tape, store, "agg." + kp, refined, h, cfg.n_max(k));
      heads.push_back(spatial_decompose(tape, store, "gcn." + kp + ".h" + std::to_string(h), agg, cfg.gcn_layers));
    }
  }

  for (int k = 0; k < cfg.n_max_noun; ++k)
    out.noun_slots.push_back(noun_encode(tape, store, sample, cfg.object_slot(k), k));

  std::vector<Var<S>> verbs, preps, nouns;
  for (const auto& c : out.verb_heads) verbs.push_back(c.vec);
  for (const auto& c : out.prep_heads) preps.push_back(c.vec);
  for (const auto& c : out.noun_slots) nouns.push_back(c.vec);
  out.rep = assemble_representation(tape, store, cfg, verbs, preps, nouns, sample.desc);
  out.logits = classify(tape, store, out.rep);
  return out;
}

}  // namespace ffcn
