#pragma once

#include "ffcn/feature_bank.hpp"
#include "ffcn/run_config.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace ffcn {

struct GradAuditGroup {
  std::string module;
  double max_rel_error = 0;
  long scalars = 0;
};

struct GradAuditReport {
  std::vector<GradAuditGroup> groups;
  double max_rel_error = 0;
  double tolerance = 1e-4;
  bool passed = false;
};

namespace audit_detail {

inline VideoSample audit_sample(const ArchConfig& cfg, int label, int n_v, int n_p, int n_n, Rng& rng) {
  VideoSample s;
  s.id = "audit_" + std::to_string(label);
  s.T = static_cast<int>(cfg.T);
  s.N = static_cast<int>(cfg.N);
  s.A = static_cast<int>(cfg.A);
  s.roles.assign(static_cast<std::size_t>(s.N), Role::object);
  s.roles[0] = Role::hand;
  s.boxes.resize(static_cast<std::size_t>(s.T * s.N));
  s.present.assign(static_cast<std::size_t>(s.T * s.N), 1);
  s.appearance.resize(static_cast<std::size_t>(s.N) * static_cast<std::size_t>(s.T) * static_cast<std::size_t>(s.A));
  for (auto& b : s.boxes) b = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)};
  for (auto& a : s.appearance) a = rng.uniform(-1, 1);
  s.label = label;
  for (int i = 0; i < n_v; ++i) s.desc.verbs.push_back(i);
  for (int i = 0; i < n_p; ++i) s.desc.preps.push_back(i);
  for (int i = 0; i < n_n; ++i) s.desc.nouns.push_back(i);
  for (int i = 0; i < n_v; ++i) s.desc.order.push_back({Kind::verb, i});
  for (int i = 0; i < n_p; ++i) s.desc.order.push_back({Kind::prep, i});
  for (int i = 0; i < n_n; ++i) s.desc.order.push_back({Kind::noun, i});
  return s;
}

inline std::string module_of(const std::string& path) { return path.substr(0, path.find('.')); }

}  // namespace audit_detail

/// Central-difference audit of every parameter scalar on a tiny model.
/// The loss covers both branches: decomposition cross entropy over samples
/// whose descriptions hit every reducer and head, plus composed samples
/// assembled from fixed banked vectors. Parameters are jittered to a generic
/// point first, keeping rectifier pre-activations off their kinks where
/// central differences and subgradients legitimately disagree.
/// `corrupt_path` (a test fixture) scales that path's analytic gradient to
/// prove the audit catches a broken backward rule.
inline GradAuditReport run_grad_audit(const ArchConfig& arch_in, std::uint64_t seed, double lambda = 0.1,
                                      double eps = 1e-5, double tolerance = 1e-4,
                                      const std::string& corrupt_path = "") {
  ArchConfig arch = arch_in;
  arch.validate();

  ParameterStore<double> store;
  Rng init_rng(derive_seed(seed, "audit-init"));
  build_parameters(store, arch, init_rng);
  Rng jitter(derive_seed(seed, "audit-jitter"));
  for (std::size_t i = 0; i < store.size(); ++i)
    for (auto& v : store.entry(static_cast<int>(i)).value.data) v += jitter.uniform(-0.05, 0.05);

  const auto graphs = model_edge_sets<double>(arch);
  Rng data_rng(derive_seed(seed, "audit-data"));
  std::vector<VideoSample> samples;
  samples.push_back(audit_detail::audit_sample(arch, 0, arch.n_max_verb, arch.n_max_prep, arch.n_max_noun, data_rng));
  samples.push_back(audit_detail::audit_sample(arch, 1, 1, 0, 1, data_rng));
  if (arch.n_max_prep >= 1 && arch.num_classes > 2)
    samples.push_back(audit_detail::audit_sample(arch, 2, 1, 1, 1, data_rng));

  // fixed banked vectors (constants of the loss) and fixed draw selections
  FeatureBank<double> bank(4, arch.n_max_verb, std::max(1, arch.n_max_prep), arch.n_max_noun);
  for (int k = 0; k < arch.n_max_verb; ++k) {
    Tensor<double> v(Shape{1, arch.D});
    for (auto& x : v.data) x = data_rng.uniform(-1, 1);
    bank.push(Kind::verb, k, v, "bank");
  }
  for (int k = 0; k < arch.n_max_prep; ++k) {
    Tensor<double> v(Shape{1, arch.D});
    for (auto& x : v.data) x = data_rng.uniform(-1, 1);
    bank.push(Kind::prep, k, v, "bank");
  }
  for (int k = 0; k < arch.n_max_noun; ++k) {
    Tensor<double> v(Shape{1, arch.D});
    for (auto& x : v.data) x = data_rng.uniform(-1, 1);
    bank.push(Kind::noun, k, v, "bank");
  }
  Rng draw_rng(derive_seed(seed, "audit-draw"));
  std::vector<ComposedSelection<double>> selections;
  for (const auto& s : samples) {
    auto sel = draw_selection<double>(bank, s.label, s.desc, draw_rng);
    if (sel) selections.push_back(*sel);
  }

  auto loss_value = [&](GradSink<double>* sink) {
    Tape<double> tape;
    std::vector<Var<double>> real, composed;
    for (const auto& s : samples) {
      auto out = forward_decomposition(tape, store, arch, graphs, s);
      real.push_back(softmax_cross_entropy(out.logits, s.label));
    }
    for (const auto& sel : selections) {
      auto c = assemble_composed(tape, store, arch, sel);
      composed.push_back(softmax_cross_entropy(classify(tape, store, c.rep), c.label));
    }
    auto loss = total_loss<double>(tape, real, composed, lambda);
    if (sink) tape.backward(loss, *sink, 1.0);
    return loss.val().item();
  };

  store.alloc_zero_grads();
  loss_value(&store.grads());
  if (!corrupt_path.empty())
    for (auto& g : store.grads().at(store.slot(corrupt_path)).data) g = g * 1.5 + 0.01;

  GradAuditReport report;
  report.tolerance = tolerance;
  std::map<std::string, GradAuditGroup> groups;
  for (std::size_t slot = 0; slot < store.size(); ++slot) {
    auto& entry = store.entry(static_cast<int>(slot));
    auto& group = groups[audit_detail::module_of(entry.path)];
    group.module = audit_detail::module_of(entry.path);
    for (std::size_t i = 0; i < entry.value.data.size(); ++i) {
      const double old = entry.value.data[i];
      entry.value.data[i] = old + eps;
      const double up = loss_value(nullptr);
      entry.value.data[i] = old - eps;
      const double down = loss_value(nullptr);
      entry.value.data[i] = old;
      const double fd = (up - down) / (2 * eps);
      const double an = store.grads().at(static_cast<int>(slot)).data[i];
      const double err = std::abs(an - fd) / std::max(1.0, std::abs(an));
      group.max_rel_error = std::max(group.max_rel_error, err);
      group.scalars++;
    }
  }
  for (auto& [name, g] : groups) {
    report.max_rel_error = std::max(report.max_rel_error, g.max_rel_error);
    report.groups.push_back(g);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

/// The tiny default audit model.
inline ArchConfig audit_arch(const RunConfig& cfg) {
  ArchConfig a = cfg.arch_config(4);
  a.T = 4;
  a.N = 3;
  a.A = 4;
  a.D = 8;
  a.hidden_ini = {8};
  a.hidden_edge = {8};
  a.hidden_node = {8};
  a.hidden_head = {};
  a.hidden_fc = {8};
  a.n_max_noun = std::min(a.n_max_noun, static_cast<int>(a.N) - a.num_hands);
  return a;
}

}  // namespace ffcn
