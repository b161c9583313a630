#pragma once

// Brute-force nearest-prototype classifier over the generative parameters.
// It scores every class template against the observed tracklets: hand motion
// against the template's canonical primitive trajectory (in per-frame
// deltas), object pairs against the preposition geometry the generator
// enforces, and slot appearance against the noun prototypes. Its accuracy is
// the dataset's separability floor, independent of any learned model.

#include "ffcn/synth.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace ffcn {

namespace oracle_detail {

using synth_detail::Track;

/// Per-slot track with absent frames filled by linear interpolation.
inline Track interpolate_track(const VideoSample& s, int slot) {
  Track tr(s.T);
  std::vector<int> present;
  for (int t = 0; t < s.T; ++t)
    if (s.is_present(t, slot)) present.push_back(t);
  auto fill = [&](auto get, std::vector<double>& out) {
    if (present.empty()) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    for (int t = 0; t < s.T; ++t) {
      auto it = std::lower_bound(present.begin(), present.end(), t);
      if (it == present.begin()) {
        out[static_cast<std::size_t>(t)] = get(*present.begin());
      } else if (it == present.end()) {
        out[static_cast<std::size_t>(t)] = get(present.back());
      } else if (*it == t) {
        out[static_cast<std::size_t>(t)] = get(t);
      } else {
        const int hi = *it, lo = *(it - 1);
        const double w = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
        out[static_cast<std::size_t>(t)] = (1 - w) * get(lo) + w * get(hi);
      }
    }
  };
  fill([&](int t) { return s.box(t, slot).cx; }, tr.cx);
  fill([&](int t) { return s.box(t, slot).cy; }, tr.cy);
  fill([&](int t) { return s.box(t, slot).w; }, tr.w);
  fill([&](int t) { return s.box(t, slot).h; }, tr.h);
  return tr;
}

inline double delta_distance(const Track& a, const Track& b) {
  double acc = 0;
  for (std::size_t t = 1; t < a.cx.size(); ++t) {
    const double dcx = (a.cx[t] - a.cx[t - 1]) - (b.cx[t] - b.cx[t - 1]);
    const double dcy = (a.cy[t] - a.cy[t - 1]) - (b.cy[t] - b.cy[t - 1]);
    const double dw = (a.w[t] - a.w[t - 1]) - (b.w[t] - b.w[t - 1]);
    const double dh = (a.h[t] - a.h[t - 1]) - (b.h[t] - b.h[t - 1]);
    acc += dcx * dcx + dcy * dcy + dw * dw + dh * dh;
  }
  return acc;
}

/// Canonical motion prototypes for a template: mid-range magnitude, all
/// per-segment sign combinations enumerated.
inline double verb_cost(const ClassTemplate& tpl, const Track& observed, int T) {
  const int n_v = static_cast<int>(tpl.desc.verbs.size());
  double best = std::numeric_limits<double>::infinity();
  for (int combo = 0; combo < (1 << n_v); ++combo) {
    std::vector<synth_detail::VerbParams> params(static_cast<std::size_t>(n_v));
    for (int v = 0; v < n_v; ++v) {
      params[static_cast<std::size_t>(v)].magnitude = 0.26;
      params[static_cast<std::size_t>(v)].sign = (combo >> v) & 1 ? -1.0 : 1.0;
    }
    // base pose at the observed starting point; deltas cancel the base anyway
    Track proto = synth_detail::hand_track(tpl, T, observed.cx[0], observed.cy[0], observed.w[0],
                                           observed.h[0], params);
    best = std::min(best, delta_distance(observed, proto));
  }
  return best;
}

struct PairGeometry {
  double d_start, d_end;          // center distances
  double inside_start, inside_end;  // containment score, < 1 means inside target
  double gap_onto;                // source-bottom-to-target-top misalignment
  double dx_end, dy_end;
  double lateral_residual;        // |dx_end| vs side-by-side distance
  double wg;
};

inline PairGeometry pair_geometry(const Track& src, const Track& tgt, int T) {
  auto avg = [&](const std::vector<double>& v, int a, int b) {
    double acc = 0;
    for (int t = a; t < b; ++t) acc += v[static_cast<std::size_t>(t)];
    return acc / std::max(1, b - a);
  };
  const int w = std::min(3, T);
  PairGeometry g{};
  const double scx0 = avg(src.cx, 0, w), scy0 = avg(src.cy, 0, w);
  const double scx1 = avg(src.cx, T - w, T), scy1 = avg(src.cy, T - w, T);
  const double gcx0 = avg(tgt.cx, 0, w), gcy0 = avg(tgt.cy, 0, w);
  const double gcx1 = avg(tgt.cx, T - w, T), gcy1 = avg(tgt.cy, T - w, T);
  const double ws = avg(src.w, 0, T), hs = avg(src.h, 0, T);
  g.wg = avg(tgt.w, 0, T);
  const double hg = avg(tgt.h, 0, T);
  g.d_start = std::hypot(scx0 - gcx0, scy0 - gcy0);
  g.d_end = std::hypot(scx1 - gcx1, scy1 - gcy1);
  g.inside_start = std::max(std::abs(scx0 - gcx0) / (0.5 * g.wg), std::abs(scy0 - gcy0) / (0.5 * hg));
  g.inside_end = std::max(std::abs(scx1 - gcx1) / (0.5 * g.wg), std::abs(scy1 - gcy1) / (0.5 * hg));
  g.dx_end = scx1 - gcx1;
  g.dy_end = scy1 - gcy1;
  g.gap_onto = std::abs((scy1 + 0.5 * hs) - (gcy1 - 0.5 * hg));
  g.lateral_residual = std::abs(std::abs(g.dx_end) - ((ws + g.wg) * 0.5 + 0.03));
  return g;
}

inline double relu(double x) { return x > 0 ? x : 0; }
inline double sq(double x) { return x * x; }

inline double prep_cost(PrepKind p, const PairGeometry& g) {
  switch (p) {
    case PrepKind::into:
      return sq(relu(g.inside_end - 0.7)) + sq(relu(1.3 - g.inside_start));
    case PrepKind::onto:
      return sq(g.gap_onto / 0.1) + 0.5 * sq(g.dx_end / (0.5 * g.wg)) + sq(relu(1.3 - g.inside_start));
    case PrepKind::next_to:
      return sq(g.lateral_residual / 0.08) + sq(g.dy_end / 0.08) + sq(relu(0.35 - g.d_start));
    case PrepKind::out_of:
      return sq(relu(g.inside_start - 0.7)) + sq(relu(1.3 - g.inside_end));
  }
  return 0;
}

inline double best_prep_fit(const VocabSpec& vocab, const PairGeometry& g) {
  double best = std::numeric_limits<double>::infinity();
  for (PrepKind p : vocab.preps) best = std::min(best, prep_cost(p, g));
  return best;
}

}  // namespace ffcn::oracle_detail

/// Scores `sample` against every class template and returns the argmin class
/// (lowest id wins ties). Noun identity terms are skipped for noun-varying
/// (compositional) datasets.
inline int oracle_classify(const VideoSample& sample, const DatasetMeta& meta) {
  using namespace oracle_detail;
  const int T = sample.T;
  const Track hand = interpolate_track(sample, 0);
  std::vector<Track> objects;
  for (int o = 1; o < sample.N; ++o) objects.push_back(interpolate_track(sample, o));

  const int max_pairs = static_cast<int>(objects.size()) - 1;
  std::vector<PairGeometry> pair_geo;
  for (int j = 0; j < max_pairs; ++j)
    pair_geo.push_back(pair_geometry(objects[static_cast<std::size_t>(j)], objects[static_cast<std::size_t>(j + 1)], T));

  // mean appearance and best-prototype match per object slot
  const int A = sample.A;
  std::vector<std::vector<double>> mean_app(objects.size(), std::vector<double>(static_cast<std::size_t>(A), 0.0));
  std::vector<double> app_norm(objects.size(), 0.0);
  std::vector<double> best_proto_cos(objects.size(), 0.0);
  for (std::size_t o = 0; o < objects.size(); ++o) {
    int count = 0;
    for (int t = 0; t < T; ++t) {
      if (!sample.is_present(t, static_cast<int>(o) + 1)) continue;
      const double* a = sample.appearance_at(static_cast<int>(o) + 1, t);
      for (int k = 0; k < A; ++k) mean_app[o][static_cast<std::size_t>(k)] += a[k];
      ++count;
    }
    for (auto& v : mean_app[o]) v /= std::max(1, count);
    for (double v : mean_app[o]) app_norm[o] += v * v;
    app_norm[o] = std::sqrt(std::max(app_norm[o], 1e-12));
    for (int p = 0; p < meta.vocab.num_nouns(); ++p) {
      double dot = 0;
      for (int k = 0; k < A; ++k) dot += mean_app[o][static_cast<std::size_t>(k)] * meta.vocab.noun_prototypes(p, k);
      best_proto_cos[o] = std::max(best_proto_cos[o], dot / app_norm[o]);
    }
  }
  auto noun_cos = [&](std::size_t o, int noun_id) {
    double dot = 0;
    for (int k = 0; k < A; ++k) dot += mean_app[o][static_cast<std::size_t>(k)] * meta.vocab.noun_prototypes(noun_id, k);
    return dot / app_norm[o];
  };

  const bool noun_terms = meta.mode != "compositional";
  constexpr double w_prep = 0.02, w_noun = 0.5;

  int best_class = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& tpl : meta.classes) {
    double cost = verb_cost(tpl, hand, T);
    const int n_p = static_cast<int>(tpl.desc.preps.size());
    for (int j = 0; j < max_pairs; ++j) {
      if (j < n_p)
        cost += w_prep * prep_cost(static_cast<PrepKind>(tpl.desc.preps[static_cast<std::size_t>(j)]),
                                   pair_geo[static_cast<std::size_t>(j)]);
      else
        cost += w_prep * sq(relu(1.0 - best_prep_fit(meta.vocab, pair_geo[static_cast<std::size_t>(j)])));
    }
    if (noun_terms) {
      const int n_n = static_cast<int>(tpl.desc.nouns.size());
      for (std::size_t o = 0; o < objects.size() && o < static_cast<std::size_t>(meta.n_max_noun); ++o) {
        if (static_cast<int>(o) < n_n)
          cost += w_noun * (1.0 - noun_cos(o, tpl.desc.nouns[o]));
        else
          cost += w_noun * sq(relu(best_proto_cos[o] - 0.7));
      }
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_class = tpl.id;
    }
  }
  return best_class;
}

inline double oracle_accuracy(const Dataset& ds, const std::string& manifest) {
  const auto& ids = ds.manifest(manifest);
  if (ids.empty()) return 0.0;
  long correct = 0;
  for (const auto& id : ids) {
    const auto& s = ds.sample(id);
    if (oracle_classify(s, ds.meta) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

}  // namespace ffcn
