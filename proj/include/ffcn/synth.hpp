#pragma once

#include "ffcn/data_types.hpp"
#include "ffcn/rng.hpp"
#include "ffcn/tensor.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffcn {

// ---------------------------------------------------------------------------
// vocabulary
// ---------------------------------------------------------------------------

enum class VerbKind : int { lift = 0, drop = 1, push = 2, rotate = 3, shake = 4, toss = 5 };
enum class PrepKind : int { into = 0, onto = 1, next_to = 2, out_of = 3 };

inline const char* verb_name(VerbKind v) {
  static const char* names[] = {"lift", "drop", "push", "rotate", "shake", "toss"};
  return names[static_cast<int>(v)];
}
inline const char* prep_name(PrepKind p) {
  static const char* names[] = {"into", "onto", "next_to", "out_of"};
  return names[static_cast<int>(p)];
}

/// Motion-primitive / relative-configuration / appearance-prototype vocabulary.
struct VocabSpec {
  std::vector<VerbKind> verbs;
  std::vector<PrepKind> preps;
  Tensor<double> noun_prototypes;  // [num_nouns x A], unit rows, pairwise angle >= 30 degrees

  int num_verbs() const { return static_cast<int>(verbs.size()); }
  int num_preps() const { return static_cast<int>(preps.size()); }
  int num_nouns() const { return static_cast<int>(noun_prototypes.rows()); }
};

struct GenConfig {
  int T = 16;
  int N = 4;  // 1 hand + 3 objects
  int A = 16;
  int num_verbs = 6;
  int num_preps = 4;
  int num_nouns = 8;
  double box_noise = 0.012;
  double app_noise = 0.08;
  double p_miss = 0.05;
};

inline VocabSpec build_vocab(const GenConfig& cfg, std::uint64_t seed) {
  if (cfg.num_verbs < 1 || cfg.num_verbs > 6 || cfg.num_preps < 1 || cfg.num_preps > 4)
    throw std::invalid_argument("build_vocab: primitive counts out of range");
  VocabSpec v;
  for (int i = 0; i < cfg.num_verbs; ++i) v.verbs.push_back(static_cast<VerbKind>(i));
  for (int i = 0; i < cfg.num_preps; ++i) v.preps.push_back(static_cast<PrepKind>(i));

  // unit prototypes with pairwise cosine <= cos(30 deg), by rejection
  Rng rng(derive_seed(seed, "vocab"));
  const double max_cos = std::cos(30.0 * M_PI / 180.0);
  v.noun_prototypes = Tensor<double>(Shape{cfg.num_nouns, cfg.A});
  for (int n = 0; n < cfg.num_nouns; ++n) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("build_vocab: prototype sampling stuck");
      std::vector<double> cand(static_cast<std::size_t>(cfg.A));
      double norm = 0;
      for (auto& x : cand) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (auto& x : cand) x /= norm;
      bool ok = true;
      for (int m = 0; m < n && ok; ++m) {
        double dot = 0;
        for (int a = 0; a < cfg.A; ++a) dot += cand[static_cast<std::size_t>(a)] * v.noun_prototypes(m, a);
        ok = std::abs(dot) <= max_cos;
      }
      if (ok) {
        for (int a = 0; a < cfg.A; ++a) v.noun_prototypes(n, a) = cand[static_cast<std::size_t>(a)];
        break;
      }
    }
  }
  return v;
}

/// Single-verb x single-prep x single-noun combinations expressible before
/// class selection.
inline long raw_template_count(const VocabSpec& v) {
  return static_cast<long>(v.num_verbs()) * v.num_preps() * v.num_nouns();
}

// ---------------------------------------------------------------------------
// class templates
// ---------------------------------------------------------------------------

struct ClassTemplate {
  int id = -1;
  ActionDescription desc;                       // canonical description
  std::vector<std::pair<int, int>> segments;    // per-verb frame interval [a, b)
};

namespace synth_detail {

inline std::vector<std::pair<int, int>> make_segments(int T, int n_verbs, Rng& rng) {
  const int margin = T >= 12 ? 1 : 0;
  const int lo = margin, hi = T - margin;
  std::vector<std::pair<int, int>> segs;
  if (n_verbs == 1) {
    segs.push_back({lo, hi});
  } else {
    const int mid = (lo + hi) / 2;
    const int jitter = T >= 12 ? rng.below_int(3) - 1 : 0;
    segs.push_back({lo, mid + jitter});
    segs.push_back({mid + jitter, hi});
  }
  int covered = 0;
  for (auto [a, b] : segs) covered += b - a;
  if (covered * 5 < T * 4) throw std::logic_error("segment plan covers less than 80% of frames");
  return segs;
}

/// Draws `count` distinct ids, preferring the least-used ones (random ties),
/// so every vocabulary id ends up shared across classes.
inline std::vector<int> pick_ids(int count, std::vector<int>& usage, Rng& rng) {
  const int vocab = static_cast<int>(usage.size());
  std::vector<std::pair<std::uint64_t, int>> keyed(static_cast<std::size_t>(vocab));
  for (int i = 0; i < vocab; ++i)
    keyed[static_cast<std::size_t>(i)] = {(static_cast<std::uint64_t>(usage[static_cast<std::size_t>(i)]) << 32) |
                                              (rng.next_u64() & 0xffffffffULL),
                                          i};
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(keyed[static_cast<std::size_t>(i)].second);
    usage[static_cast<std::size_t>(keyed[static_cast<std::size_t>(i)].second)]++;
  }
  return out;
}

inline std::vector<OrderItem> interleave_order(int n_v, int n_p, int n_n, Rng& rng) {
  // verbs stay in temporal order; nouns and preps slot in after them
  std::vector<OrderItem> order;
  int p = 0, n = 0;
  for (int v = 0; v < n_v; ++v) {
    order.push_back({Kind::verb, v});
    if (n < n_n && (v == n_v - 1 || rng.bernoulli(0.7))) order.push_back({Kind::noun, n++});
    if (p < n_p && (v == n_v - 1 || rng.bernoulli(0.5))) order.push_back({Kind::prep, p++});
  }
  while (n < n_n) order.push_back({Kind::noun, n++});
  while (p < n_p) order.push_back({Kind::prep, p++});
  return order;
}

inline std::string desc_signature(const ActionDescription& d) {
  std::string s = "v";
  for (int v : d.verbs) s += std::to_string(v) + ",";
  s += "|p";
  for (int p : d.preps) s += std::to_string(p) + ",";
  s += "|n";
  for (int n : d.nouns) s += std::to_string(n) + ",";
  s += "|o";
  for (const auto& o : d.order) s += std::to_string(static_cast<int>(o.kind)) + std::to_string(o.index);
  return s;
}

/// Loose upper bound on the number of distinct descriptions expressible.
inline double expressible_bound(const VocabSpec& v, int max_objects) {
  auto perm = [](int n, int k) {
    double r = 1;
    for (int i = 0; i < k; ++i) r *= n - i;
    return r;
  };
  double total = 0;
  for (int nv = 1; nv <= 2; ++nv)
    for (int np = 0; np <= 2; ++np)
      for (int nn = 1; nn <= 2; ++nn) {
        if (nn > max_objects || (np >= 1 && np + 1 > max_objects)) continue;
        if (nv > v.num_verbs() || np > v.num_preps() || nn > v.num_nouns()) continue;
        total += perm(v.num_verbs(), nv) * perm(v.num_preps(), np) * perm(v.num_nouns(), nn) * 8.0;
      }
  return total;
}

}  // namespace synth_detail

/// Builds `num_classes` distinct class templates with 1-2 verbs, 0-2
/// prepositions, and 1-2 nouns, such that every vocabulary id appears in at
/// least two classes (tail classes stay composable from the rest).
inline std::vector<ClassTemplate> build_classes(const VocabSpec& vocab, int num_classes,
                                                std::uint64_t seed, int T, int max_objects = 3) {
  if (num_classes < 1) throw std::invalid_argument("build_classes: need at least one class");
  if (static_cast<double>(num_classes) > synth_detail::expressible_bound(vocab, max_objects))
    throw std::invalid_argument("build_classes: more classes requested than expressible descriptions");
  const int min_per_id = num_classes >= 2 * (vocab.num_verbs() + vocab.num_preps() + vocab.num_nouns()) / 3 ? 2 : 1;

  for (int round = 0; round < 64; ++round) {
    Rng rng(derive_seed(seed, "classes", static_cast<std::uint64_t>(round)));
    std::vector<ClassTemplate> classes;
    std::set<std::string> seen;
    std::vector<int> verb_usage(static_cast<std::size_t>(vocab.num_verbs()), 0);
    std::vector<int> prep_usage(static_cast<std::size_t>(vocab.num_preps()), 0);
    std::vector<int> noun_usage(static_cast<std::size_t>(vocab.num_nouns()), 0);
    int guard = 0;
    while (static_cast<int>(classes.size()) < num_classes && guard++ < num_classes * 200) {
      const int n_v = 1 + rng.below_int(2);
      const int n_p = std::min(max_objects - 1, rng.below_int(4) == 0 ? 0 : 1 + rng.below_int(2));
      const int n_n = 1 + rng.below_int(std::min(2, max_objects));
      if (n_v > vocab.num_verbs() || n_p > vocab.num_preps() || n_n > vocab.num_nouns()) continue;
      auto vu = verb_usage;
      auto pu = prep_usage;
      auto nu = noun_usage;
      ClassTemplate c;
      c.desc.verbs = synth_detail::pick_ids(n_v, vu, rng);
      c.desc.preps = n_p > 0 ? synth_detail::pick_ids(n_p, pu, rng) : std::vector<int>{};
      c.desc.nouns = synth_detail::pick_ids(n_n, nu, rng);
      c.desc.order = synth_detail::interleave_order(n_v, n_p, n_n, rng);
      const std::string sig = synth_detail::desc_signature(c.desc);
      if (seen.count(sig)) continue;
      seen.insert(sig);
      verb_usage = std::move(vu);
      prep_usage = std::move(pu);
      noun_usage = std::move(nu);
      c.id = static_cast<int>(classes.size());
      c.segments = synth_detail::make_segments(T, n_v, rng);
      classes.push_back(std::move(c));
    }
    if (static_cast<int>(classes.size()) < num_classes) continue;

    // coverage: every id in >= min_per_id classes, plus at least one
    // zero-preposition class so the null-embedding path trains
    std::vector<int> vc(static_cast<std::size_t>(vocab.num_verbs())),
        pc(static_cast<std::size_t>(vocab.num_preps())), nc(static_cast<std::size_t>(vocab.num_nouns()));
    int zero_prep = 0;
    for (const auto& c : classes) {
      for (int v : c.desc.verbs) vc[static_cast<std::size_t>(v)]++;
      for (int p : c.desc.preps) pc[static_cast<std::size_t>(p)]++;
      for (int n : c.desc.nouns) nc[static_cast<std::size_t>(n)]++;
      if (c.desc.preps.empty()) ++zero_prep;
    }
    const auto covered = [&](const std::vector<int>& xs) {
      return std::all_of(xs.begin(), xs.end(), [&](int x) { return x >= min_per_id; });
    };
    if (covered(vc) && covered(pc) && covered(nc) && (zero_prep >= 1 || num_classes < 6)) return classes;
  }
  throw std::runtime_error("build_classes: could not satisfy the shared-component constraint");
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

namespace synth_detail {

struct Track {
  std::vector<double> cx, cy, w, h;
  explicit Track(int T) : cx(static_cast<std::size_t>(T)), cy(cx.size()), w(cx.size()), h(cx.size()) {}
};

struct VerbParams {
  double magnitude = 0.26;
  double sign = 1.0;
};

/// Applies one verb primitive over frames [a, b) of a hand track, starting
/// from the track state at frame a. Frames outside segments hold position.
inline void apply_verb(Track& tr, VerbKind verb, int a, int b, const VerbParams& p) {
  const int len = b - a;
  if (len < 2) return;
  const double cx0 = tr.cx[static_cast<std::size_t>(a)], cy0 = tr.cy[static_cast<std::size_t>(a)];
  const double w0 = tr.w[static_cast<std::size_t>(a)], h0 = tr.h[static_cast<std::size_t>(a)];
  for (int t = a; t < b; ++t) {
    const double tau = static_cast<double>(t - a) / static_cast<double>(len - 1);
    double cx = cx0, cy = cy0, w = w0, h = h0;
    switch (verb) {
      case VerbKind::lift: cy = cy0 - p.magnitude * tau; break;
      case VerbKind::drop: cy = cy0 + p.magnitude * tau; break;
      case VerbKind::push: cx = cx0 + p.sign * p.magnitude * tau; break;
      case VerbKind::rotate: {
        const double osc = std::sin(2.0 * M_PI * 2.0 * tau);
        w = w0 * (1.0 + 0.45 * osc);
        h = h0 * (1.0 - 0.45 * osc);
        break;
      }
      case VerbKind::shake: {
        const double amp = 0.28 * p.magnitude;
        cx = cx0 + p.sign * ((t - a) % 2 == 0 ? amp : -amp) * (t == b - 1 ? 0.0 : 1.0);
        break;
      }
      case VerbKind::toss: {
        const double v = 2.8 * p.magnitude, g = 6.2 * p.magnitude;
        cy = cy0 - v * tau + 0.5 * g * tau * tau;
        cx = cx0 + p.sign * 0.4 * p.magnitude * tau;
        break;
      }
    }
    tr.cx[static_cast<std::size_t>(t)] = cx;
    tr.cy[static_cast<std::size_t>(t)] = cy;
    tr.w[static_cast<std::size_t>(t)] = w;
    tr.h[static_cast<std::size_t>(t)] = h;
  }
  // frames after the segment hold the final state
  for (int t = b; t < static_cast<int>(tr.cx.size()); ++t) {
    tr.cx[static_cast<std::size_t>(t)] = tr.cx[static_cast<std::size_t>(b - 1)];
    tr.cy[static_cast<std::size_t>(t)] = tr.cy[static_cast<std::size_t>(b - 1)];
    tr.w[static_cast<std::size_t>(t)] = tr.w[static_cast<std::size_t>(b - 1)];
    tr.h[static_cast<std::size_t>(t)] = tr.h[static_cast<std::size_t>(b - 1)];
  }
}

/// Canonical hand track for a template: base pose at the box center, fixed
/// mid-range magnitudes, positive signs. This is the oracle's verb prototype.
inline Track hand_track(const ClassTemplate& tpl, int T, double base_cx, double base_cy, double base_w,
                        double base_h, const std::vector<VerbParams>& params) {
  Track tr(T);
  std::fill(tr.cx.begin(), tr.cx.end(), base_cx);
  std::fill(tr.cy.begin(), tr.cy.end(), base_cy);
  std::fill(tr.w.begin(), tr.w.end(), base_w);
  std::fill(tr.h.begin(), tr.h.end(), base_h);
  for (std::size_t v = 0; v < tpl.desc.verbs.size(); ++v) {
    const auto [a, b] = tpl.segments[v];
    apply_verb(tr, static_cast<VerbKind>(tpl.desc.verbs[v]), a, b, params[v]);
  }
  return tr;
}

struct ObjectPlacement {
  double start_cx, start_cy, end_cx, end_cy, w, h;
};

/// End-first placement of object slots so chained prepositions nest properly.
/// Prep j constrains source slot 1+j against target slot 2+j.
inline std::vector<ObjectPlacement> place_objects(const ActionDescription& desc, int num_objects, Rng& rng) {
  std::vector<ObjectPlacement> obj(static_cast<std::size_t>(num_objects));
  const int n_p = static_cast<int>(desc.preps.size());
  // default: static distractors
  for (auto& o : obj) {
    o.w = rng.uniform(0.08, 0.16);
    o.h = rng.uniform(0.08, 0.16);
    o.start_cx = o.end_cx = rng.uniform(0.15, 0.85);
    o.start_cy = o.end_cy = rng.uniform(0.15, 0.85);
  }
  // targets of "into" need room to contain their source
  for (int j = 0; j < n_p; ++j) {
    if (static_cast<PrepKind>(desc.preps[static_cast<std::size_t>(j)]) == PrepKind::into ||
        static_cast<PrepKind>(desc.preps[static_cast<std::size_t>(j)]) == PrepKind::out_of) {
      auto& tgt = obj[static_cast<std::size_t>(j + 1)];
      tgt.w = rng.uniform(0.26, 0.36);
      tgt.h = rng.uniform(0.26, 0.36);
      auto& src = obj[static_cast<std::size_t>(j)];
      src.w = rng.uniform(0.06, 0.10);
      src.h = rng.uniform(0.06, 0.10);
    }
  }
  // place sources working backwards so a moving target (the source of a later
  // preposition) already has both poses; start configurations bind against
  // the target's START pose, end configurations against its END pose
  for (int j = n_p - 1; j >= 0; --j) {
    auto& src = obj[static_cast<std::size_t>(j)];
    const auto& tgt = obj[static_cast<std::size_t>(j + 1)];
    const PrepKind prep = static_cast<PrepKind>(desc.preps[static_cast<std::size_t>(j)]);
    const double angle = rng.uniform(0, 2 * M_PI);
    const double radius = rng.uniform(0.36, 0.48);
    const double far_start_cx = tgt.start_cx + radius * std::cos(angle);
    const double far_start_cy = tgt.start_cy + radius * std::sin(angle);
    const double far_end_cx = tgt.end_cx + radius * std::cos(angle);
    const double far_end_cy = tgt.end_cy + radius * std::sin(angle);
    switch (prep) {
      case PrepKind::into:
        src.end_cx = tgt.end_cx + rng.uniform(-0.2, 0.2) * tgt.w * 0.5;
        src.end_cy = tgt.end_cy + rng.uniform(-0.2, 0.2) * tgt.h * 0.5;
        src.start_cx = far_start_cx;
        src.start_cy = far_start_cy;
        break;
      case PrepKind::onto:
        src.end_cx = tgt.end_cx + rng.uniform(-0.15, 0.15) * tgt.w;
        src.end_cy = tgt.end_cy - (tgt.h + src.h) * 0.5;
        src.start_cx = far_start_cx;
        src.start_cy = far_start_cy;
        break;
      case PrepKind::next_to:
        src.end_cx = tgt.end_cx + (rng.bernoulli(0.5) ? 1 : -1) * ((tgt.w + src.w) * 0.5 + 0.03);
        src.end_cy = tgt.end_cy + rng.uniform(-0.03, 0.03);
        src.start_cx = far_start_cx;
        src.start_cy = far_start_cy;
        break;
      case PrepKind::out_of:
        src.start_cx = tgt.start_cx + rng.uniform(-0.2, 0.2) * tgt.w * 0.5;
        src.start_cy = tgt.start_cy + rng.uniform(-0.2, 0.2) * tgt.h * 0.5;
        src.end_cx = far_end_cx;
        src.end_cy = far_end_cy;
        break;
    }
  }
  return obj;
}

inline double clamp_coord(double v) { return std::clamp(v, -0.45, 1.45); }

}  // namespace synth_detail

/// Renders one sample from a class template. `nouns` assigns a noun id per
/// object slot that carries a description noun (defaults to the canonical
/// ids). Every random quantity derives from `seed`; `noise` scales the box
/// and appearance noise, with 0 giving the clean deterministic trajectory.
inline VideoSample render_sample(const ClassTemplate& tpl, const VocabSpec& vocab, const GenConfig& cfg,
                                 std::vector<int> nouns, double noise, std::uint64_t seed,
                                 const std::string& id) {
  using namespace synth_detail;
  if (nouns.empty()) nouns = tpl.desc.nouns;
  if (nouns.size() != tpl.desc.nouns.size())
    throw std::invalid_argument("render_sample: noun assignment arity mismatch");
  Rng rng(seed);
  const int T = cfg.T, N = cfg.N, A = cfg.A;
  const int num_objects = N - 1;

  VideoSample s;
  s.id = id;
  s.T = T;
  s.N = N;
  s.A = A;
  s.roles.assign(static_cast<std::size_t>(N), Role::object);
  s.roles[0] = Role::hand;
  s.boxes.resize(static_cast<std::size_t>(T * N));
  s.present.assign(static_cast<std::size_t>(T * N), 1);
  s.appearance.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(T) * static_cast<std::size_t>(A), 0.0);
  s.label = tpl.id;
  s.desc = tpl.desc;
  s.desc.nouns = nouns;

  // hand: verb primitives over the template's segments
  std::vector<VerbParams> params(tpl.desc.verbs.size());
  for (auto& p : params) {
    p.magnitude = rng.uniform(0.20, 0.32);
    p.sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  }
  const double hb_cx = rng.uniform(0.38, 0.62), hb_cy = rng.uniform(0.40, 0.60);
  const double hb_w = rng.uniform(0.08, 0.14), hb_h = rng.uniform(0.08, 0.14);
  Track hand = hand_track(tpl, T, hb_cx, hb_cy, hb_w, hb_h, params);

  // objects: linear start->end motion satisfying the preposition plan
  auto placements = place_objects(s.desc, num_objects, rng);
  std::vector<Track> objects;
  const int move_a = std::min(2, T / 4), move_b = std::max(T - 2, T * 3 / 4);
  for (int o = 0; o < num_objects; ++o) {
    Track tr(T);
    const auto& p = placements[static_cast<std::size_t>(o)];
    for (int t = 0; t < T; ++t) {
      double tau = 0.0;
      if (t >= move_b)
        tau = 1.0;
      else if (t > move_a)
        tau = static_cast<double>(t - move_a) / static_cast<double>(move_b - move_a);
      tr.cx[static_cast<std::size_t>(t)] = p.start_cx + (p.end_cx - p.start_cx) * tau;
      tr.cy[static_cast<std::size_t>(t)] = p.start_cy + (p.end_cy - p.start_cy) * tau;
      tr.w[static_cast<std::size_t>(t)] = p.w;
      tr.h[static_cast<std::size_t>(t)] = p.h;
    }
    objects.push_back(std::move(tr));
  }

  // measurement noise, presence dropout, appearance
  Rng noise_rng(derive_seed(seed, "noise"));
  Rng miss_rng(derive_seed(seed, "miss"));
  Rng app_rng(derive_seed(seed, "appearance"));
  const double sigma = cfg.box_noise * noise;
  for (int t = 0; t < T; ++t) {
    for (int n = 0; n < N; ++n) {
      const Track& tr = n == 0 ? hand : objects[static_cast<std::size_t>(n - 1)];
      BBoxFeature b;
      b.cx = clamp_coord(tr.cx[static_cast<std::size_t>(t)] + noise_rng.normal(0, sigma));
      b.cy = clamp_coord(tr.cy[static_cast<std::size_t>(t)] + noise_rng.normal(0, sigma));
      b.w = std::clamp(tr.w[static_cast<std::size_t>(t)] + noise_rng.normal(0, sigma), 0.01, 1.45);
      b.h = std::clamp(tr.h[static_cast<std::size_t>(t)] + noise_rng.normal(0, sigma), 0.01, 1.45);
      if (miss_rng.bernoulli(cfg.p_miss)) {
        s.present[static_cast<std::size_t>(t * N + n)] = 0;
        continue;  // absent: zero box, zero appearance
      }
      s.box(t, n) = b;
    }
  }

  // appearance: description slots carry their noun prototype; extra object
  // slots are anonymous clutter with a random unit-vector appearance
  for (int o = 0; o < num_objects; ++o) {
    std::vector<double> base(static_cast<std::size_t>(A));
    if (o < static_cast<int>(nouns.size())) {
      const int noun = nouns[static_cast<std::size_t>(o)];
      for (int a = 0; a < A; ++a) base[static_cast<std::size_t>(a)] = vocab.noun_prototypes(noun, a);
    } else {
      double norm = 0;
      for (auto& x : base) {
        x = app_rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (auto& x : base) x /= norm;
    }
    for (int t = 0; t < T; ++t) {
      // draw noise regardless of presence so dropout does not shift the stream
      std::vector<double> vec(static_cast<std::size_t>(A));
      for (int a = 0; a < A; ++a)
        vec[static_cast<std::size_t>(a)] = base[static_cast<std::size_t>(a)] + app_rng.normal(0, cfg.app_noise * noise);
      if (!s.is_present(t, o + 1)) continue;
      double* dst = s.appearance_at(o + 1, t);
      for (int a = 0; a < A; ++a) dst[static_cast<std::size_t>(a)] = vec[static_cast<std::size_t>(a)];
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// datasets & splits
// ---------------------------------------------------------------------------

struct SplitConfig {
  int num_classes = 40;
  int lt_head = 200;        // long-tail head class train count
  int lt_tail = 10;         // long-tail tail class train count
  int lt_tail_classes = 20; // classes counted as tail (composition targets)
  int val_per_class = 20;
  int comp_train_per_class = 60;
  int fs_base_classes = 30;
  int fs_base_per_class = 64;
  int fs_novel_val = 20;
};

struct DatasetMeta {
  std::string mode;  // longtail | compositional | fewshot
  GenConfig gen;
  SplitConfig split;
  std::uint64_t seed = 0;
  VocabSpec vocab;
  std::vector<ClassTemplate> classes;
  int n_max_verb = 1, n_max_prep = 0, n_max_noun = 1;
  std::vector<int> tail_ids;               // longtail / compositional composition targets
  std::vector<int> base_ids, novel_ids;    // fewshot
  std::vector<int> train_counts;           // per class (primary train split)

  const ClassTemplate& class_of(int id) const { return classes[static_cast<std::size_t>(id)]; }
  std::vector<ActionDescription> class_descriptions() const {
    std::vector<ActionDescription> d;
    for (const auto& c : classes) d.push_back(c.desc);
    return d;
  }
};

struct Dataset {
  DatasetMeta meta;
  std::vector<VideoSample> samples;
  std::map<std::string, std::vector<std::string>> manifests;
  std::map<std::string, int> index;

  const VideoSample& sample(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) throw std::invalid_argument("dataset: unknown sample id " + id);
    return samples[static_cast<std::size_t>(it->second)];
  }
  const std::vector<std::string>& manifest(const std::string& name) const {
    auto it = manifests.find(name);
    if (it == manifests.end()) throw std::invalid_argument("dataset: unknown manifest " + name);
    return it->second;
  }
  void add_sample(VideoSample s) {
    index[s.id] = static_cast<int>(samples.size());
    samples.push_back(std::move(s));
  }
};

namespace synth_detail {

inline void compute_n_max(DatasetMeta& meta) {
  meta.n_max_verb = 1;
  meta.n_max_prep = 0;
  meta.n_max_noun = 1;
  for (const auto& c : meta.classes) {
    meta.n_max_verb = std::max(meta.n_max_verb, static_cast<int>(c.desc.verbs.size()));
    meta.n_max_prep = std::max(meta.n_max_prep, static_cast<int>(c.desc.preps.size()));
    meta.n_max_noun = std::max(meta.n_max_noun, static_cast<int>(c.desc.nouns.size()));
  }
}

/// Every component id of every class in `needy` must appear in some class of
/// `providers`; otherwise the composition branch could never source features.
inline bool composable_from(const std::vector<ClassTemplate>& classes, const std::vector<int>& needy,
                            const std::vector<int>& providers) {
  std::set<std::pair<int, int>> available;
  for (int p : providers) {
    const auto& d = classes[static_cast<std::size_t>(p)].desc;
    for (int v : d.verbs) available.insert({0, v});
    for (int q : d.preps) available.insert({1, q});
    for (int n : d.nouns) available.insert({2, n});
  }
  for (int c : needy) {
    const auto& d = classes[static_cast<std::size_t>(c)].desc;
    for (int v : d.verbs)
      if (!available.count({0, v})) return false;
    for (int q : d.preps)
      if (!available.count({1, q})) return false;
    for (int n : d.nouns)
      if (!available.count({2, n})) return false;
  }
  return true;
}

inline std::uint64_t sample_seed(std::uint64_t dataset_seed, const std::string& id) {
  return derive_seed(dataset_seed, "sample:" + id);
}

}  // namespace synth_detail

/// Long-tail split: train counts follow a power law from lt_head down to
/// lt_tail over a seeded class permutation; validation is balanced.
inline Dataset make_longtail_dataset(const GenConfig& gen, const SplitConfig& split, std::uint64_t seed) {
  Dataset ds;
  ds.meta.mode = "longtail";
  ds.meta.gen = gen;
  ds.meta.split = split;
  ds.meta.seed = seed;
  ds.meta.vocab = build_vocab(gen, seed);
  ds.meta.classes = build_classes(ds.meta.vocab, split.num_classes, seed, gen.T, gen.N - 1);
  synth_detail::compute_n_max(ds.meta);

  const int C = split.num_classes;
  const double alpha = std::log(static_cast<double>(split.lt_head) / split.lt_tail) /
                       std::log(static_cast<double>(std::max(2, C)));
  std::vector<int> rank(static_cast<std::size_t>(C));
  for (int i = 0; i < C; ++i) rank[static_cast<std::size_t>(i)] = i;

  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(seed, "longtail-perm", static_cast<std::uint64_t>(attempt)));
    rng.shuffle(rank);
    std::vector<int> counts(static_cast<std::size_t>(C));
    for (int i = 0; i < C; ++i) {
      const double c = split.lt_head * std::pow(static_cast<double>(i + 1), -alpha);
      counts[static_cast<std::size_t>(rank[static_cast<std::size_t>(i)])] =
          std::max(split.lt_tail, static_cast<int>(std::lround(c)));
    }
    std::vector<int> by_count(static_cast<std::size_t>(C));
    for (int i = 0; i < C; ++i) by_count[static_cast<std::size_t>(i)] = i;
    std::sort(by_count.begin(), by_count.end(), [&](int a, int b) {
      return counts[static_cast<std::size_t>(a)] != counts[static_cast<std::size_t>(b)]
                 ? counts[static_cast<std::size_t>(a)] < counts[static_cast<std::size_t>(b)]
                 : a < b;
    });
    std::vector<int> tail(by_count.begin(), by_count.begin() + split.lt_tail_classes);
    std::vector<int> head(by_count.begin() + split.lt_tail_classes, by_count.end());
    std::sort(tail.begin(), tail.end());
    if (!synth_detail::composable_from(ds.meta.classes, tail, head)) continue;

    ds.meta.tail_ids = tail;
    ds.meta.train_counts = counts;
    for (int c = 0; c < C; ++c) {
      const auto& tpl = ds.meta.classes[static_cast<std::size_t>(c)];
      for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "lt_tr_c%02d_%04d", c, i);
        ds.manifests["train"].push_back(id);
        ds.add_sample(render_sample(tpl, ds.meta.vocab, gen, {}, 1.0, synth_detail::sample_seed(seed, id), id));
      }
      for (int i = 0; i < split.val_per_class; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "lt_va_c%02d_%04d", c, i);
        ds.manifests["val"].push_back(id);
        ds.add_sample(render_sample(tpl, ds.meta.vocab, gen, {}, 1.0, synth_detail::sample_seed(seed, id), id));
      }
    }
    return ds;
  }
  throw std::runtime_error("make_longtail_dataset: no tail selection is composable from the head");
}

/// Object-independent split: classes are shared between train and val but the
/// (verb-set, noun-set) combinations are disjoint. Noun sets are partitioned
/// within groups of classes sharing the same verb-id set.
inline Dataset make_compositional_dataset(const GenConfig& gen, const SplitConfig& split, std::uint64_t seed) {
  Dataset ds;
  ds.meta.mode = "compositional";
  ds.meta.gen = gen;
  ds.meta.split = split;
  ds.meta.seed = seed;
  ds.meta.vocab = build_vocab(gen, seed);
  ds.meta.classes = build_classes(ds.meta.vocab, split.num_classes, seed, gen.T, gen.N - 1);
  synth_detail::compute_n_max(ds.meta);

  // enumerate unordered noun sets per arity
  const int V = ds.meta.vocab.num_nouns();
  std::vector<std::vector<int>> sets1, sets2;
  for (int a = 0; a < V; ++a) sets1.push_back({a});
  for (int a = 0; a < V; ++a)
    for (int b = a + 1; b < V; ++b) sets2.push_back({a, b});

  // per verb-set group and arity, split noun sets 70/30 into train/val pools
  std::map<std::string, std::array<std::pair<std::vector<std::vector<int>>, std::vector<std::vector<int>>>, 3>>
      pools;
  auto group_key = [&](const ActionDescription& d) {
    std::vector<int> v = d.verbs;
    std::sort(v.begin(), v.end());
    std::string k;
    for (int x : v) k += std::to_string(x) + ",";
    return k;
  };
  Rng pool_rng(derive_seed(seed, "comp-pools"));
  for (const auto& c : ds.meta.classes) {
    const std::string key = group_key(c.desc);
    if (pools.count(key)) continue;
    auto& entry = pools[key];
    for (int arity : {1, 2}) {
      auto all = arity == 1 ? sets1 : sets2;
      pool_rng.shuffle(all);
      const std::size_t n_train = std::max<std::size_t>(1, all.size() * 7 / 10);
      entry[static_cast<std::size_t>(arity)] = {
          std::vector<std::vector<int>>(all.begin(), all.begin() + static_cast<long>(n_train)),
          std::vector<std::vector<int>>(all.begin() + static_cast<long>(n_train), all.end())};
    }
  }

  ds.meta.train_counts.assign(static_cast<std::size_t>(split.num_classes), split.comp_train_per_class);
  for (int c = 0; c < split.num_classes; ++c) ds.meta.tail_ids.push_back(c);  // compose for all classes

  Rng draw_rng(derive_seed(seed, "comp-draw"));
  for (int c = 0; c < split.num_classes; ++c) {
    auto& tpl = ds.meta.classes[static_cast<std::size_t>(c)];
    const int arity = static_cast<int>(tpl.desc.nouns.size());
    auto& [train_pool, val_pool] = pools[group_key(tpl.desc)][static_cast<std::size_t>(arity)];
    if (train_pool.empty() || val_pool.empty())
      throw std::runtime_error("make_compositional_dataset: noun pool exhausted");
    // canonical nouns come from the train pool so composition stays sourceable
    tpl.desc.nouns = train_pool[0];

    auto draw_from = [&](const std::vector<std::vector<int>>& pool) {
      std::vector<int> set = pool[static_cast<std::size_t>(draw_rng.below(pool.size()))];
      draw_rng.shuffle(set);
      return set;
    };
    for (int i = 0; i < split.comp_train_per_class; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "cp_tr_c%02d_%04d", c, i);
      ds.manifests["train"].push_back(id);
      // the first training sample carries the canonical nouns so the
      // composition branch can always source this class's components
      const std::vector<int> nouns = i == 0 ? tpl.desc.nouns : draw_from(train_pool);
      ds.add_sample(render_sample(tpl, ds.meta.vocab, gen, nouns, 1.0,
                                  synth_detail::sample_seed(seed, id), id));
    }
    for (int i = 0; i < split.val_per_class; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "cp_va_c%02d_%04d", c, i);
      ds.manifests["val"].push_back(id);
      ds.add_sample(render_sample(tpl, ds.meta.vocab, gen, draw_from(val_pool), 1.0,
                                  synth_detail::sample_seed(seed, id), id));
    }
  }
  return ds;
}

/// Few-shot split: base classes with full-size training pools, novel classes
/// with k in {5, 10} training samples each, all sharing one vocabulary.
inline Dataset make_fewshot_dataset(const GenConfig& gen, const SplitConfig& split, std::uint64_t seed) {
  Dataset ds;
  ds.meta.mode = "fewshot";
  ds.meta.gen = gen;
  ds.meta.split = split;
  ds.meta.seed = seed;
  ds.meta.vocab = build_vocab(gen, seed);
  ds.meta.classes = build_classes(ds.meta.vocab, split.num_classes, seed, gen.T, gen.N - 1);
  synth_detail::compute_n_max(ds.meta);

  const int C = split.num_classes;
  if (split.fs_base_classes >= C)
    throw std::invalid_argument("make_fewshot_dataset: no classes left for the novel set");
  std::vector<int> ids(static_cast<std::size_t>(C));
  for (int i = 0; i < C; ++i) ids[static_cast<std::size_t>(i)] = i;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(seed, "fewshot-perm", static_cast<std::uint64_t>(attempt)));
    rng.shuffle(ids);
    std::vector<int> base(ids.begin(), ids.begin() + split.fs_base_classes);
    std::vector<int> novel(ids.begin() + split.fs_base_classes, ids.end());
    std::sort(base.begin(), base.end());
    std::sort(novel.begin(), novel.end());
    if (!synth_detail::composable_from(ds.meta.classes, novel, base)) continue;
    ds.meta.base_ids = base;
    ds.meta.novel_ids = novel;
    break;
  }
  if (ds.meta.base_ids.empty())
    throw std::runtime_error("make_fewshot_dataset: novel classes are not composable from the base set");

  ds.meta.train_counts.assign(static_cast<std::size_t>(C), 0);
  auto render_many = [&](int cls, const char* tag, int count, const std::string& manifest) {
    const auto& tpl = ds.meta.classes[static_cast<std::size_t>(cls)];
    for (int i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "fs_%s_c%02d_%04d", tag, cls, i);
      ds.manifests[manifest].push_back(id);
      ds.add_sample(render_sample(tpl, ds.meta.vocab, gen, {}, 1.0, synth_detail::sample_seed(seed, id), id));
    }
  };
  for (int c : ds.meta.base_ids) {
    render_many(c, "btr", split.fs_base_per_class, "base_train");
    render_many(c, "bva", split.val_per_class, "base_val");
    ds.meta.train_counts[static_cast<std::size_t>(c)] = split.fs_base_per_class;
  }
  for (int c : ds.meta.novel_ids) {
    render_many(c, "ntr", 10, "novel_train_k10");
    // 5-shot uses the first five of the 10-shot pool
    const auto& ten = ds.manifests["novel_train_k10"];
    for (std::size_t i = ten.size() - 10; i < ten.size() - 5; ++i)
      ds.manifests["novel_train_k5"].push_back(ten[i]);
    render_many(c, "nva", split.fs_novel_val, "novel_val");
  }
  return ds;
}

inline Dataset build_dataset(const GenConfig& gen, const SplitConfig& split, const std::string& mode,
                             std::uint64_t seed) {
  if (mode == "longtail") return make_longtail_dataset(gen, split, seed);
  if (mode == "compositional") return make_compositional_dataset(gen, split, seed);
  if (mode == "fewshot") return make_fewshot_dataset(gen, split, seed);
  throw std::invalid_argument("build_dataset: unknown mode " + mode);
}

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
  nlohmann::json j;
  j["mode"] = m.mode;
  j["seed"] = m.seed;
  j["gen"] = {{"T", m.gen.T},
              {"N", m.gen.N},
              {"A", m.gen.A},
              {"num_verbs", m.gen.num_verbs},
              {"num_preps", m.gen.num_preps},
              {"num_nouns", m.gen.num_nouns},
              {"box_noise", m.gen.box_noise},
              {"app_noise", m.gen.app_noise},
              {"p_miss", m.gen.p_miss}};
  j["split"] = {{"num_classes", m.split.num_classes},
                {"lt_head", m.split.lt_head},
                {"lt_tail", m.split.lt_tail},
                {"lt_tail_classes", m.split.lt_tail_classes},
                {"val_per_class", m.split.val_per_class},
                {"comp_train_per_class", m.split.comp_train_per_class},
                {"fs_base_classes", m.split.fs_base_classes},
                {"fs_base_per_class", m.split.fs_base_per_class},
                {"fs_novel_val", m.split.fs_novel_val}};
  std::vector<std::string> verbs, preps;
  for (VerbKind v : m.vocab.verbs) verbs.push_back(verb_name(v));
  for (PrepKind p : m.vocab.preps) preps.push_back(prep_name(p));
  j["vocab"] = {{"verbs", verbs}, {"preps", preps}, {"noun_prototypes", m.vocab.noun_prototypes.data},
                {"A", m.vocab.noun_prototypes.cols()}};
  auto classes = nlohmann::json::array();
  for (const auto& c : m.classes) {
    nlohmann::json cj;
    cj["id"] = c.id;
    cj["description"] = description_to_json(c.desc);
    auto segs = nlohmann::json::array();
    for (auto [a, b] : c.segments) segs.push_back({a, b});
    cj["segments"] = std::move(segs);
    classes.push_back(std::move(cj));
  }
  j["classes"] = std::move(classes);
  j["n_max"] = {{"verb", m.n_max_verb}, {"prep", m.n_max_prep}, {"noun", m.n_max_noun}};
  j["tail_ids"] = m.tail_ids;
  j["base_ids"] = m.base_ids;
  j["novel_ids"] = m.novel_ids;
  j["train_counts"] = m.train_counts;
  return j;
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.mode = j.at("mode").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& g = j.at("gen");
  m.gen.T = g.at("T").get<int>();
  m.gen.N = g.at("N").get<int>();
  m.gen.A = g.at("A").get<int>();
  m.gen.num_verbs = g.at("num_verbs").get<int>();
  m.gen.num_preps = g.at("num_preps").get<int>();
  m.gen.num_nouns = g.at("num_nouns").get<int>();
  m.gen.box_noise = g.at("box_noise").get<double>();
  m.gen.app_noise = g.at("app_noise").get<double>();
  m.gen.p_miss = g.at("p_miss").get<double>();
  const auto& sp = j.at("split");
  m.split.num_classes = sp.at("num_classes").get<int>();
  m.split.lt_head = sp.at("lt_head").get<int>();
  m.split.lt_tail = sp.at("lt_tail").get<int>();
  m.split.lt_tail_classes = sp.at("lt_tail_classes").get<int>();
  m.split.val_per_class = sp.at("val_per_class").get<int>();
  m.split.comp_train_per_class = sp.at("comp_train_per_class").get<int>();
  m.split.fs_base_classes = sp.at("fs_base_classes").get<int>();
  m.split.fs_base_per_class = sp.at("fs_base_per_class").get<int>();
  m.split.fs_novel_val = sp.at("fs_novel_val").get<int>();
  const auto& vj = j.at("vocab");
  for (const auto& s : vj.at("verbs")) {
    const std::string name = s.get<std::string>();
    for (int i = 0; i < 6; ++i)
      if (name == verb_name(static_cast<VerbKind>(i))) m.vocab.verbs.push_back(static_cast<VerbKind>(i));
  }
  for (const auto& s : vj.at("preps")) {
    const std::string name = s.get<std::string>();
    for (int i = 0; i < 4; ++i)
      if (name == prep_name(static_cast<PrepKind>(i))) m.vocab.preps.push_back(static_cast<PrepKind>(i));
  }
  const long A = vj.at("A").get<long>();
  std::vector<double> proto = vj.at("noun_prototypes").get<std::vector<double>>();
  const long rows = static_cast<long>(proto.size()) / A;
  m.vocab.noun_prototypes = Tensor<double>(Shape{rows, A}, std::move(proto));
  for (const auto& cj : j.at("classes")) {
    ClassTemplate c;
    c.id = cj.at("id").get<int>();
    c.desc = description_from_json(cj.at("description"));
    for (const auto& s : cj.at("segments")) c.segments.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    m.classes.push_back(std::move(c));
  }
  m.n_max_verb = j.at("n_max").at("verb").get<int>();
  m.n_max_prep = j.at("n_max").at("prep").get<int>();
  m.n_max_noun = j.at("n_max").at("noun").get<int>();
  m.tail_ids = j.at("tail_ids").get<std::vector<int>>();
  m.base_ids = j.at("base_ids").get<std::vector<int>>();
  m.novel_ids = j.at("novel_ids").get<std::vector<int>>();
  m.train_counts = j.at("train_counts").get<std::vector<int>>();
  return m;
}

/// Writes meta.json, samples.jsonl (one record per line), and one
/// manifest_<name>.txt id list per split.
inline void write_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "meta.json");
    os << meta_to_json(ds.meta).dump(2) << "\n";
    if (!os) throw std::runtime_error("write_dataset: cannot write meta.json");
  }
  {
    std::ofstream os(fs::path(dir) / "samples.jsonl");
    for (const auto& s : ds.samples) os << sample_to_json(s).dump() << "\n";
    if (!os) throw std::runtime_error("write_dataset: cannot write samples.jsonl");
  }
  for (const auto& [name, ids] : ds.manifests) {
    std::ofstream os(fs::path(dir) / ("manifest_" + name + ".txt"));
    for (const auto& id : ids) os << id << "\n";
    if (!os) throw std::runtime_error("write_dataset: cannot write manifest " + name);
  }
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  {
    std::ifstream is(fs::path(dir) / "meta.json");
    if (!is) throw std::runtime_error("load_dataset: missing meta.json in " + dir);
    nlohmann::json j;
    is >> j;
    ds.meta = meta_from_json(j);
  }
  {
    std::ifstream is(fs::path(dir) / "samples.jsonl");
    if (!is) throw std::runtime_error("load_dataset: missing samples.jsonl in " + dir);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      VideoSample s = sample_from_json(nlohmann::json::parse(line));
      validate_sample(s, ds.meta.gen.T);
      ds.add_sample(std::move(s));
    }
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("manifest_", 0) != 0) continue;
    std::ifstream is(entry.path());
    std::string id;
    auto& list = ds.manifests[name.substr(9, name.size() - 13)];
    while (std::getline(is, id))
      if (!id.empty()) list.push_back(id);
  }
  return ds;
}

}  // namespace ffcn
