#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffcn/gnn.hpp"
#include "ffcn/graph_build.hpp"

#include "support/oracles.hpp"
#include "support/sample_factory.hpp"

#include <algorithm>
#include <set>

using namespace ffcn;

namespace {

void register_refiner(ParameterStore<double>& store, const std::string& prefix, long D, Rng& rng) {
  register_mlp(store, prefix + ".ini_mlp", MlpSpec{4, {D}, D}, rng);
  register_mlp(store, prefix + ".edge_mlp", MlpSpec{2 * D, {D}, D}, rng);
  register_mlp(store, prefix + ".node_mlp", MlpSpec{D, {D}, D}, rng);
}

std::vector<Role> roles_1hand(int n) {
  std::vector<Role> r(static_cast<std::size_t>(n), Role::object);
  r[0] = Role::hand;
  return r;
}

}  // namespace

TEST_CASE("build_node_features: absence, direct packing, copy oracle") {
  Rng rng(5);
  auto s = testing::random_sample(2, 2, 4, rng);

  SUBCASE("all slots absent gives the all-zero tensor") {
    testing::clear_slot(s, 0);
    testing::clear_slot(s, 1);
    auto t = build_node_features<double>(s);
    for (double v : t.data) CHECK(v == 0.0);
  }

  SUBCASE("hand row is the direct packing of its box") {
    for (int t = 0; t < 2; ++t) s.box(t, 0) = {0.5, 0.5, 0.1, 0.1};
    auto t = build_node_features<double>(s);
    for (int f = 0; f < 2; ++f) {
      const long r = f * 2 + 0;
      CHECK(t(r, 0) == 0.5);
      CHECK(t(r, 1) == 0.5);
      CHECK(t(r, 2) == 0.1);
      CHECK(t(r, 3) == 0.1);
    }
  }

  SUBCASE("random sample equals field-by-field copy") {
    auto t = build_node_features<double>(s);
    for (int f = 0; f < s.T; ++f)
      for (int n = 0; n < s.N; ++n) {
        const auto& b = s.box(f, n);
        const long r = f * s.N + n;
        CHECK(t(r, 0) == b.cx);
        CHECK(t(r, 1) == b.cy);
        CHECK(t(r, 2) == b.w);
        CHECK(t(r, 3) == b.h);
      }
  }
}

TEST_CASE("build_edge_sets: small enumerations") {
  auto [v2, p2] = build_edge_sets(roles_1hand(2));
  CHECK(v2.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
  CHECK(p2.pairs.empty());

  auto [v3, p3] = build_edge_sets(roles_1hand(3));
  CHECK(v3.pairs.size() == 4);
  CHECK(p3.pairs == std::vector<std::pair<int, int>>{{1, 2}, {2, 1}});

  auto [v4, p4] = build_edge_sets(roles_1hand(4));
  CHECK(v4.pairs.size() == 6);
  CHECK(p4.pairs.size() == 6);
}

TEST_CASE("build_edge_sets: closed-form cardinalities for N in [2, 8]") {
  for (int n = 2; n <= 8; ++n) {
    auto [v, p] = build_edge_sets(roles_1hand(n));
    CHECK(static_cast<int>(v.pairs.size()) == 2 * (n - 1));
    CHECK(static_cast<int>(p.pairs.size()) == (n - 1) * (n - 2));
    std::set<std::pair<int, int>> seen;
    for (auto pr : v.pairs) {
      CHECK(pr.first != pr.second);
      seen.insert(pr);
    }
    for (auto pr : p.pairs) {
      CHECK(pr.first != pr.second);
      CHECK(!seen.count(pr));
    }
  }
}

TEST_CASE("build_edge_sets: role errors") {
  CHECK_THROWS_AS(build_edge_sets({Role::object, Role::object}), std::invalid_argument);
  CHECK_THROWS_AS(build_edge_sets({Role::hand, Role::hand}), std::invalid_argument);
}

TEST_CASE("build_edge_sets: object relabeling maps edge sets to their pi-image") {
  const auto roles = roles_1hand(5);
  auto [v, p] = build_edge_sets(roles);
  // pi over object slots 1..4
  auto pi = [](int i) { return i == 0 ? 0 : 1 + ((i - 1) + 2) % 4; };
  auto image = [&](const EdgeSet& e) {
    std::set<std::pair<int, int>> s;
    for (auto [i, j] : e.pairs) s.insert({pi(i), pi(j)});
    return s;
  };
  auto as_set = [](const EdgeSet& e) {
    return std::set<std::pair<int, int>>(e.pairs.begin(), e.pairs.end());
  };
  CHECK(image(v) == as_set(v));
  CHECK(image(p) == as_set(p));
}

TEST_CASE("validate_sample catches invariant violations") {
  Rng rng(6);
  auto good = testing::random_sample(4, 3, 2, rng);
  validate_sample(good, 4);

  auto bad_t = good;
  CHECK_THROWS_AS(validate_sample(bad_t, 8), std::invalid_argument);

  auto bad_box = good;
  bad_box.box(0, 1).cx = 2.0;
  CHECK_THROWS_AS(validate_sample(bad_box, 4), std::invalid_argument);

  auto bad_absent = good;
  bad_absent.present[1] = 0;  // box stays nonzero
  CHECK_THROWS_AS(validate_sample(bad_absent, 4), std::invalid_argument);

  auto bad_order = good;
  bad_order.desc.order.pop_back();
  CHECK_THROWS_AS(validate_sample(bad_order, 4), std::invalid_argument);
}

TEST_CASE("init_embed: function of the input row only") {
  Rng rng(17);
  ParameterStore<double> store;
  register_refiner(store, "gnn", 6, rng);
  Tape<double> tape;
  Tensor<double> nodes(Shape{4, 4});
  for (long c = 0; c < 4; ++c) {
    nodes(0, c) = nodes(2, c) = 0.3 + 0.1 * static_cast<double>(c);
    nodes(1, c) = nodes(3, c) = 0.7 - 0.1 * static_cast<double>(c);
  }
  auto h = init_embed(tape, store, "gnn", tape.leaf(nodes));
  for (long c = 0; c < 6; ++c) {
    CHECK(h.val()(0, c) == h.val()(2, c));
    CHECK(h.val()(1, c) == h.val()(3, c));
  }
}

TEST_CASE("init_embed: zero weights and biases give zero embeddings") {
  ParameterStore<double> store;
  store.add("gnn.ini_mlp.0.weight", Tensor<double>::zeros({6, 4}));
  store.add("gnn.ini_mlp.0.bias", Tensor<double>::zeros({6}));
  Tape<double> tape;
  Rng rng(2);
  Tensor<double> nodes(Shape{8, 4});
  for (auto& v : nodes.data) v = rng.uniform(0, 1);
  auto h = init_embed(tape, store, "gnn", tape.leaf(nodes));
  for (double v : h.val().data) CHECK(v == 0.0);
}

TEST_CASE("init_embed: random case matches per-row mlp oracle") {
  Rng rng(19);
  ParameterStore<double> store;
  register_refiner(store, "gnn", 5, rng);
  Tape<double> tape;
  Tensor<double> nodes(Shape{6, 4});
  for (auto& v : nodes.data) v = rng.uniform(-1, 1);
  auto h = init_embed(tape, store, "gnn", tape.leaf(nodes));
  std::vector<std::pair<Tensor<double>, Tensor<double>>> layers = {
      {store.value("gnn.ini_mlp.0.weight"), store.value("gnn.ini_mlp.0.bias")},
      {store.value("gnn.ini_mlp.1.weight"), store.value("gnn.ini_mlp.1.bias")}};
  for (long r = 0; r < 6; ++r) {
    std::vector<double> row(nodes.data.begin() + r * 4, nodes.data.begin() + (r + 1) * 4);
    auto expect = oracle::mlp_row_recompute(layers, row);
    for (long c = 0; c < 5; ++c)
      CHECK(h.val()(r, c) == doctest::Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-12));
  }
}

TEST_CASE("message_step: two-node graph, node updates use the single incident edge") {
  Rng rng(31);
  ParameterStore<double> store;
  const long D = 4;
  register_refiner(store, "gnn", D, rng);
  Tape<double> tape;
  const long T = 2, N = 2;
  Tensor<double> h0(Shape{T * N, D});
  for (auto& v : h0.data) v = rng.uniform(-1, 1);
  EdgeSet edges{Kind::verb, {{0, 1}, {1, 0}}};
  auto hv = tape.leaf(h0);
  auto out = message_step(tape, store, "gnn", hv, edges, T, N);

  // edge rows are frame-major: (t, e); node 0's sum at frame t is exactly f_{01}
  std::vector<std::pair<Tensor<double>, Tensor<double>>> node_layers = {
      {store.value("gnn.node_mlp.0.weight"), store.value("gnn.node_mlp.0.bias")},
      {store.value("gnn.node_mlp.1.weight"), store.value("gnn.node_mlp.1.bias")}};
  for (long t = 0; t < T; ++t) {
    const auto f01 = out.edge_feats.val().mat().row(t * 2 + 0);
    std::vector<double> fin(f01.data(), f01.data() + D);
    auto expect = oracle::mlp_row_recompute(node_layers, fin);
    for (long c = 0; c < D; ++c)
      CHECK(out.node_feats.val()(t * N + 0, c) == doctest::Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-12));
  }
}

TEST_CASE("message_step: identical endpoints give symmetric edge features") {
  Rng rng(37);
  ParameterStore<double> store;
  register_refiner(store, "gnn", 4, rng);
  Tape<double> tape;
  Tensor<double> h0(Shape{3, 4});
  for (long c = 0; c < 4; ++c) h0(1, c) = h0(2, c) = 0.25 * static_cast<double>(c);
  EdgeSet edges{Kind::prep, {{1, 2}, {2, 1}}};
  auto out = message_step(tape, store, "gnn", tape.leaf(h0), edges, 1, 3);
  for (long c = 0; c < 4; ++c) CHECK(out.edge_feats.val()(0, c) == out.edge_feats.val()(1, c));
}

TEST_CASE("message_step: random 3-node case matches the double-loop recurrence") {
  Rng rng(41);
  ParameterStore<double> store;
  const long D = 3;
  register_refiner(store, "gnn", D, rng);
  const long T = 2, N = 3;
  Tensor<double> h0(Shape{T * N, D});
  for (auto& v : h0.data) v = rng.uniform(-1, 1);
  EdgeSet edges = union_edge_set(roles_1hand(3));

  Tape<double> tape;
  auto out = message_step(tape, store, "gnn", tape.leaf(h0), edges, T, N);

  std::vector<std::pair<Tensor<double>, Tensor<double>>> edge_layers = {
      {store.value("gnn.edge_mlp.0.weight"), store.value("gnn.edge_mlp.0.bias")},
      {store.value("gnn.edge_mlp.1.weight"), store.value("gnn.edge_mlp.1.bias")}};
  std::vector<std::pair<Tensor<double>, Tensor<double>>> node_layers = {
      {store.value("gnn.node_mlp.0.weight"), store.value("gnn.node_mlp.0.bias")},
      {store.value("gnn.node_mlp.1.weight"), store.value("gnn.node_mlp.1.bias")}};

  for (long t = 0; t < T; ++t) {
    // brute-force edge features
    std::vector<std::vector<double>> f(edges.pairs.size());
    for (std::size_t e = 0; e < edges.pairs.size(); ++e) {
      const auto [i, j] = edges.pairs[e];
      std::vector<double> cat;
      for (long c = 0; c < D; ++c) cat.push_back(h0(t * N + i, c));
      for (long c = 0; c < D; ++c) cat.push_back(h0(t * N + j, c));
      f[e] = oracle::mlp_row_recompute(edge_layers, cat);
      for (long c = 0; c < D; ++c)
        CHECK(out.edge_feats.val()(t * static_cast<long>(edges.pairs.size()) + static_cast<long>(e), c) ==
              doctest::Approx(f[e][static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
    // brute-force node updates: sum over f_ij with first index i
    for (long i = 0; i < N; ++i) {
      std::vector<double> sum(static_cast<std::size_t>(D), 0.0);
      for (std::size_t e = 0; e < edges.pairs.size(); ++e)
        if (edges.pairs[e].first == i)
          for (long c = 0; c < D; ++c) sum[static_cast<std::size_t>(c)] += f[e][static_cast<std::size_t>(c)];
      auto expect = oracle::mlp_row_recompute(node_layers, sum);
      for (long c = 0; c < D; ++c)
        CHECK(out.node_feats.val()(t * N + i, c) == doctest::Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("message_step rejects an empty edge set") {
  Rng rng(1);
  ParameterStore<double> store;
  register_refiner(store, "gnn", 4, rng);
  Tape<double> tape;
  EdgeSet empty{Kind::prep, {}};
  CHECK_THROWS_AS(message_step(tape, store, "gnn", tape.leaf(Tensor<double>::zeros({2, 4})), empty, 1, 2),
                  std::invalid_argument);
}

TEST_CASE("refine: S=1 equals a single message step") {
  Rng rng(43);
  ParameterStore<double> store;
  const long D = 4, T = 3, N = 3;
  register_refiner(store, "gnn", D, rng);
  auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
  Tensor<double> nodes = build_node_features<double>(s);
  EdgeSet edges = union_edge_set(s.roles);

  Tape<double> t1;
  auto block = refine(t1, store, "gnn", t1.leaf(nodes), edges, T, N, 1);

  Tape<double> t2;
  auto h = init_embed(t2, store, "gnn", t2.leaf(nodes));
  auto one = message_step(t2, store, "gnn", h, edges, T, N);

  const long E = static_cast<long>(edges.pairs.size());
  for (long e = 0; e < E; ++e)
    for (long t = 0; t < T; ++t)
      for (long c = 0; c < D; ++c)
        CHECK(block.values.val()(e * T + t, c) == one.edge_feats.val()(t * E + e, c));
}

TEST_CASE("refine: verb block shape for one hand plus two objects is [4 x T x D]") {
  Rng rng(47);
  ParameterStore<double> store;
  const long D = 4, T = 5, N = 3;
  register_refiner(store, "gnn", D, rng);
  auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
  auto [verb, prep] = build_edge_sets(s.roles);
  Tape<double> tape;
  auto full = refine(tape, store, "gnn", tape.leaf(build_node_features<double>(s)), union_edge_set(s.roles), T, N, 2);
  auto vb = route_block(tape, full, union_edge_set(s.roles), verb);
  CHECK(vb.num_edges == 4);
  CHECK(vb.frames == T);
  CHECK(vb.values.shape() == Shape{4 * T, D});
}

TEST_CASE("refine: exactly equivariant to object-slot permutations") {
  Rng rng(53);
  ParameterStore<double> store;
  const long D = 6, T = 4, N = 4;
  register_refiner(store, "gnn", D, rng);
  EdgeSet edges = union_edge_set(roles_1hand(static_cast<int>(N)));

  for (int trial = 0; trial < 20; ++trial) {
    auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
    auto sp = s;
    // swap(1,2) then swap(2,3) sends slot 1 -> 3, 2 -> 1, 3 -> 2
    testing::swap_object_slots(sp, 1, 2);
    testing::swap_object_slots(sp, 2, 3);
    auto pi = [](int i) { return i == 0 ? 0 : 1 + ((i + 1) % 3); };

    Tape<double> ta, tb;
    auto fa = refine(ta, store, "gnn", ta.leaf(build_node_features<double>(s)), edges, T, N, 2);
    auto fb = refine(tb, store, "gnn", tb.leaf(build_node_features<double>(sp)), edges, T, N, 2);

    for (std::size_t e = 0; e < edges.pairs.size(); ++e) {
      const auto [i, j] = edges.pairs[e];
      const std::pair<int, int> mapped{pi(i), pi(j)};
      const auto it = std::find(edges.pairs.begin(), edges.pairs.end(), mapped);
      REQUIRE(it != edges.pairs.end());
      const long ep = static_cast<long>(it - edges.pairs.begin());
      for (long t = 0; t < T; ++t)
        for (long c = 0; c < D; ++c)
          CHECK(fa.values.val()(static_cast<long>(e) * T + t, c) == fb.values.val()(ep * T + t, c));
    }
  }
}

TEST_CASE("refine: perturbing one frame only changes that frame's columns") {
  Rng rng(59);
  ParameterStore<double> store;
  const long D = 4, T = 4, N = 3;
  register_refiner(store, "gnn", D, rng);
  auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
  EdgeSet edges = union_edge_set(s.roles);

  Tape<double> ta;
  auto base = refine(ta, store, "gnn", ta.leaf(build_node_features<double>(s)), edges, T, N, 2);

  auto sp = s;
  sp.box(2, 1).cx += 0.05;
  Tape<double> tb;
  auto bumped = refine(tb, store, "gnn", tb.leaf(build_node_features<double>(sp)), edges, T, N, 2);

  for (long e = 0; e < base.num_edges; ++e)
    for (long t = 0; t < T; ++t) {
      bool same = true;
      for (long c = 0; c < D; ++c) same = same && base.values.val()(e * T + t, c) == bumped.values.val()(e * T + t, c);
      if (t != 2) CHECK(same);
    }
}

TEST_CASE("mask_absent_edges zeroes rows touching a never-present slot") {
  Rng rng(61);
  ParameterStore<double> store;
  const long D = 4, T = 3, N = 4;
  register_refiner(store, "gnn", D, rng);
  auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
  testing::clear_slot(s, 2);
  auto [verb, prep] = build_edge_sets(s.roles);
  Tape<double> tape;
  auto full = refine(tape, store, "gnn", tape.leaf(build_node_features<double>(s)), union_edge_set(s.roles), T, N, 2);
  auto vb = mask_absent_edges(s, route_block(tape, full, union_edge_set(s.roles), verb), verb);
  for (std::size_t e = 0; e < verb.pairs.size(); ++e) {
    const auto [i, j] = verb.pairs[e];
    const bool touches = i == 2 || j == 2;
    for (long t = 0; t < T; ++t)
      for (long c = 0; c < D; ++c) {
        const double v = vb.values.val()(static_cast<long>(e) * T + t, c);
        if (touches) CHECK(v == 0.0);
      }
  }
}

TEST_CASE("separate refiners keep gradients apart") {
  Rng rng(67);
  ParameterStore<double> store;
  const long D = 4, T = 2, N = 3;
  register_refiner(store, "gnn_verb", D, rng);
  register_refiner(store, "gnn_prep", D, rng);
  auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
  auto [verb, prep] = build_edge_sets(s.roles);

  Tape<double> tape;
  auto nodes = tape.leaf(build_node_features<double>(s));
  auto vb = refine(tape, store, "gnn_verb", nodes, verb, T, N, 2);
  auto loss = sum_all(mul(vb.values, vb.values));
  tape.backward(loss, store);

  bool verb_nonzero = false;
  for (const auto& path : store.paths()) {
    const auto& g = store.grads().at(store.slot(path));
    double mag = 0;
    for (double v : g.data) mag += std::abs(v);
    if (path.rfind("gnn_prep", 0) == 0) CHECK(mag == 0.0);
    if (path.rfind("gnn_verb", 0) == 0) verb_nonzero = verb_nonzero || mag > 0;
  }
  CHECK(verb_nonzero);
}

TEST_CASE("refine gradients agree with finite differences") {
  Rng rng(71);
  ParameterStore<double> store;
  const long D = 3, T = 2, N = 3;
  register_refiner(store, "gnn", D, rng);
  auto s = testing::random_sample(static_cast<int>(T), static_cast<int>(N), 2, rng);
  EdgeSet edges = union_edge_set(s.roles);

  auto run = [&](GradSink<double>* sink) {
    Tape<double> tape;
    auto block = refine(tape, store, "gnn", tape.leaf(build_node_features<double>(s)), edges, T, N, 2);
    auto loss = sum_all(mul(block.values, block.values));
    if (sink) tape.backward(loss, *sink);
    return loss.val().item();
  };
  store.alloc_zero_grads();
  run(&store.grads());
  CHECK(oracle::max_grad_rel_error<double>(store, store.grads(), [&] { return run(nullptr); }) < 1e-4);
}
