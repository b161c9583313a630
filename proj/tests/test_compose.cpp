#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffcn/feature_bank.hpp"

#include "support/oracles.hpp"
#include "support/sample_factory.hpp"

#include <set>

using namespace ffcn;

namespace {

ArchConfig reducer_arch(long D) {
  ArchConfig a;
  a.T = 2;
  a.N = 3;
  a.A = 2;
  a.D = D;
  a.n_max_verb = 2;
  a.n_max_prep = 2;
  a.n_max_noun = 2;
  a.num_classes = 4;
  return a;
}

/// Registers only what assemble/classify need.
void register_composer(ParameterStore<double>& store, const ArchConfig& cfg, Rng& rng) {
  for (Kind k : {Kind::verb, Kind::prep, Kind::noun})
    for (int c = 1; c <= cfg.n_max(k); ++c)
      register_mlp(store, "comp.reduce." + std::string(kind_name(k)) + ".c" + std::to_string(c),
                   MlpSpec{cfg.D, {}, cfg.D / c}, rng);
  store.add("comp.null_prep", glorot_uniform<double>(1, cfg.D, rng));
  register_mlp(store, "clf", MlpSpec{3 * cfg.D, {}, cfg.num_classes}, rng);
}

Tensor<double> random_row(long d, Rng& rng) {
  Tensor<double> t(Shape{1, d});
  for (auto& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

}  // namespace

TEST_CASE("assemble_representation: single components give three full-width blocks") {
  Rng rng(3);
  ArchConfig cfg = reducer_arch(6);
  ParameterStore<double> store;
  register_composer(store, cfg, rng);
  ActionDescription d;
  d.verbs = {0};
  d.preps = {1};
  d.nouns = {2};
  d.order = {{Kind::verb, 0}, {Kind::prep, 0}, {Kind::noun, 0}};

  Tape<double> tape;
  std::vector<Var<double>> v{tape.leaf(random_row(6, rng))}, p{tape.leaf(random_row(6, rng))},
      n{tape.leaf(random_row(6, rng))};
  auto rep = assemble_representation(tape, store, cfg, v, p, n, d);
  CHECK(rep.shape() == Shape{1, 18});

  // each block is that component's count-1 reducer output
  auto expect_block = [&](Kind k, Var<double> feat, long offset) {
    Tape<double> t2;
    auto piece = mlp_forward(t2, store, "comp.reduce." + std::string(kind_name(k)) + ".c1",
                             t2.leaf(feat.val()));
    for (long c = 0; c < 6; ++c) CHECK(rep.val()(0, offset + c) == piece.val()(0, c));
  };
  expect_block(Kind::verb, v[0], 0);
  expect_block(Kind::prep, p[0], 6);
  expect_block(Kind::noun, n[0], 12);
}

TEST_CASE("assemble_representation: dimension rule for n_v=2, n_p=2, n_n=1 at D=128") {
  Rng rng(5);
  ArchConfig cfg = reducer_arch(128);
  ParameterStore<double> store;
  register_composer(store, cfg, rng);
  ActionDescription d;
  d.verbs = {0, 1};
  d.preps = {0, 1};
  d.nouns = {0};
  d.order = {{Kind::verb, 0}, {Kind::prep, 0}, {Kind::verb, 1}, {Kind::prep, 1}, {Kind::noun, 0}};

  Tape<double> tape;
  std::vector<Var<double>> v{tape.leaf(random_row(128, rng)), tape.leaf(random_row(128, rng))};
  std::vector<Var<double>> p{tape.leaf(random_row(128, rng)), tape.leaf(random_row(128, rng))};
  std::vector<Var<double>> n{tape.leaf(random_row(128, rng))};
  auto rep = assemble_representation(tape, store, cfg, v, p, n, d);
  CHECK(rep.shape() == Shape{1, 384});

  // blocks of 64 + 64 for verbs, 64 + 64 for preps, 128 for the noun,
  // laid out in description order v0 p0 v1 p1 n0
  Tape<double> t2;
  auto v0 = mlp_forward(t2, store, "comp.reduce.verb.c2", t2.leaf(v[0].val()));
  auto p1 = mlp_forward(t2, store, "comp.reduce.prep.c2", t2.leaf(p[1].val()));
  auto n0 = mlp_forward(t2, store, "comp.reduce.noun.c1", t2.leaf(n[0].val()));
  CHECK(v0.cols() == 64);
  CHECK(p1.cols() == 64);
  CHECK(n0.cols() == 128);
  for (long c = 0; c < 64; ++c) CHECK(rep.val()(0, c) == v0.val()(0, c));
  for (long c = 0; c < 64; ++c) CHECK(rep.val()(0, 192 + c) == p1.val()(0, c));
  for (long c = 0; c < 128; ++c) CHECK(rep.val()(0, 256 + c) == n0.val()(0, c));
}

TEST_CASE("assemble_representation: zero reducers leave only the null-prep block") {
  Rng rng(7);
  ArchConfig cfg = reducer_arch(4);
  ParameterStore<double> store;
  register_composer(store, cfg, rng);
  for (const auto& path : store.paths())
    if (path.rfind("comp.reduce", 0) == 0)
      for (auto& x : store.value(path).data) x = 0.0;

  ActionDescription d;
  d.verbs = {0};
  d.nouns = {1};
  d.order = {{Kind::verb, 0}, {Kind::noun, 0}};

  Tape<double> tape;
  std::vector<Var<double>> v{tape.leaf(random_row(4, rng))}, p{}, n{tape.leaf(random_row(4, rng))};
  auto rep = assemble_representation(tape, store, cfg, v, p, n, d);
  REQUIRE(rep.cols() == 12);
  const auto& null_embed = store.value("comp.null_prep");
  for (long c = 0; c < 8; ++c) CHECK(rep.val()(0, c) == 0.0);
  for (long c = 0; c < 4; ++c) CHECK(rep.val()(0, 8 + c) == null_embed(0, c));
}

TEST_CASE("assemble_representation: component/description count mismatch is an error") {
  Rng rng(9);
  ArchConfig cfg = reducer_arch(4);
  ParameterStore<double> store;
  register_composer(store, cfg, rng);
  ActionDescription d;
  d.verbs = {0, 1};
  d.nouns = {0};
  d.order = {{Kind::verb, 0}, {Kind::verb, 1}, {Kind::noun, 0}};
  Tape<double> tape;
  std::vector<Var<double>> one{tape.leaf(random_row(4, rng))};
  CHECK_THROWS_AS(assemble_representation(tape, store, cfg, one, {}, one, d), std::invalid_argument);
}

TEST_CASE("classify: shared function, uniform logits on zero input, mlp oracle") {
  Rng rng(11);
  ArchConfig cfg = reducer_arch(4);
  ParameterStore<double> store;
  register_composer(store, cfg, rng);

  SUBCASE("the two branches compute identical logits for the same representation") {
    Tape<double> tape;
    auto rep = tape.leaf(random_row(12, rng));
    auto a = classify(tape, store, rep);
    auto b = classify(tape, store, rep);
    CHECK(a.val().data == b.val().data);
  }

  SUBCASE("zero representation with zero-bias classifier gives uniform logits") {
    Tape<double> tape;
    auto logits = classify(tape, store, tape.leaf(Tensor<double>::zeros({1, 12})));
    for (long c = 0; c < cfg.num_classes; ++c) CHECK(logits.val()(0, c) == 0.0);
  }

  SUBCASE("random representation matches the mlp oracle") {
    Tape<double> tape;
    Tensor<double> rep = random_row(12, rng);
    auto logits = classify(tape, store, tape.leaf(rep));
    std::vector<std::pair<Tensor<double>, Tensor<double>>> layers = {
        {store.value("clf.0.weight"), store.value("clf.0.bias")}};
    auto expect = oracle::mlp_row_recompute(layers, rep.data);
    for (long c = 0; c < cfg.num_classes; ++c)
      CHECK(logits.val()(0, c) == doctest::Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-12));
  }
}

TEST_CASE("feature bank: per-component insertion and ring eviction") {
  FeatureBank<double> bank(1, 3, 2, 3);
  Tensor<double> a = Tensor<double>::row({1.0, 2.0});
  Tensor<double> b = Tensor<double>::row({3.0, 4.0});
  bank.push(Kind::verb, 1, a, "s1");
  CHECK(bank.size(Kind::verb, 1) == 1);
  bank.push(Kind::verb, 1, b, "s2");
  CHECK(bank.size(Kind::verb, 1) == 1);  // capacity 1: newest evicts oldest
  CHECK(bank.at(Kind::verb, 1, 0).vec.data == b.data);
  CHECK(bank.at(Kind::verb, 1, 0).source == "s2");
}

TEST_CASE("bank_update: a two-verb sample inserts two verb features") {
  Rng rng(13);
  ArchConfig cfg = reducer_arch(4);
  cfg.hidden_ini = {4};
  cfg.hidden_edge = {4};
  cfg.hidden_node = {4};
  ParameterStore<double> store;
  build_parameters(store, cfg, rng);
  const auto graphs = model_edge_sets<double>(cfg);

  Rng srng(17);
  auto s = testing::random_sample(static_cast<int>(cfg.T), static_cast<int>(cfg.N), static_cast<int>(cfg.A), srng, 1);
  s.desc.verbs = {2, 0};
  s.desc.preps = {};
  s.desc.nouns = {1};
  s.desc.order = {{Kind::verb, 0}, {Kind::verb, 1}, {Kind::noun, 0}};

  Tape<double> tape;
  auto out = forward_decomposition(tape, store, cfg, graphs, s);
  FeatureBank<double> bank(8, 3, 2, 3);
  bank_update(bank, out, s);
  CHECK(bank.size(Kind::verb, 2) == 1);
  CHECK(bank.size(Kind::verb, 0) == 1);
  CHECK(bank.size(Kind::noun, 1) == 1);
  CHECK(bank.size(Kind::prep, 0) == 0);
  // head k maps to the k-th verb in description order
  CHECK(bank.at(Kind::verb, 2, 0).vec.data == out.verb_heads[0].vec.val().data);
  CHECK(bank.at(Kind::verb, 0, 0).vec.data == out.verb_heads[1].vec.val().data);
}

TEST_CASE("compose_batch: counts, labels, widths, and provenance audit") {
  Rng rng(19);
  ArchConfig cfg = reducer_arch(4);
  ParameterStore<double> store;
  register_composer(store, cfg, rng);

  std::vector<ActionDescription> descs(3);
  descs[1].verbs = {0, 1};
  descs[1].preps = {1};
  descs[1].nouns = {2};
  descs[1].order = {{Kind::verb, 0}, {Kind::prep, 0}, {Kind::verb, 1}, {Kind::noun, 0}};

  FeatureBank<double> bank(4, 2, 2, 3);
  Rng frng(23);
  for (int i = 0; i < 3; ++i) {
    bank.push(Kind::verb, 0, random_row(4, frng), "a" + std::to_string(i));
    bank.push(Kind::verb, 1, random_row(4, frng), "b" + std::to_string(i));
    bank.push(Kind::prep, 1, random_row(4, frng), "c" + std::to_string(i));
    bank.push(Kind::noun, 2, random_row(4, frng), "d" + std::to_string(i));
  }
  // distractor bucket that must never be drawn for class 1
  bank.push(Kind::noun, 0, random_row(4, frng), "junk");

  Tape<double> tape;
  Rng crng(29);
  ComposeCursor cursor;

  SUBCASE("m = 0 composes nothing") {
    auto out = compose_batch(tape, store, cfg, bank, {1}, descs, 0, crng, cursor);
    CHECK(out.empty());
  }

  SUBCASE("a stocked single target yields m samples of width 3D") {
    auto out = compose_batch(tape, store, cfg, bank, {1}, descs, 10, crng, cursor);
    REQUIRE(out.size() == 10);
    for (const auto& c : out) {
      CHECK(c.label == 1);
      CHECK(c.rep.shape() == Shape{1, 12});
      REQUIRE(c.provenance.size() == 4);
      std::multiset<std::pair<int, int>> drawn;
      for (const auto& p : c.provenance) drawn.insert({static_cast<int>(p.kind), p.vocab_id});
      const std::multiset<std::pair<int, int>> expected = {
          {static_cast<int>(Kind::verb), 0}, {static_cast<int>(Kind::verb), 1},
          {static_cast<int>(Kind::prep), 1}, {static_cast<int>(Kind::noun), 2}};
      CHECK(drawn == expected);
      for (const auto& p : c.provenance) CHECK(p.source != "junk");
    }
  }

  SUBCASE("unstocked targets are skipped") {
    descs[0].verbs = {0};
    descs[0].preps = {0};  // prep 0 bucket is empty
    descs[0].nouns = {2};
    descs[0].order = {{Kind::verb, 0}, {Kind::prep, 0}, {Kind::noun, 0}};
    auto out = compose_batch(tape, store, cfg, bank, {0, 1}, descs, 6, crng, cursor);
    REQUIRE(out.size() == 6);
    for (const auto& c : out) CHECK(c.label == 1);
  }

  SUBCASE("empty target list is an error") {
    CHECK_THROWS_AS(compose_batch(tape, store, cfg, bank, {}, descs, 4, crng, cursor),
                    std::invalid_argument);
  }
}

TEST_CASE("total_loss: lambda semantics") {
  Tape<double> tape;
  auto l1 = tape.leaf(Tensor<double>::scalar(0.8));
  auto l2 = tape.leaf(Tensor<double>::scalar(1.2));
  auto c1 = tape.leaf(Tensor<double>::scalar(2.0));

  SUBCASE("lambda = 0 gives exactly the decomposition loss") {
    auto loss = total_loss<double>(tape, {l1, l2}, {c1}, 0.0);
    CHECK(loss.val().item() == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("lambda = 1 with identical branch losses doubles the loss") {
    auto loss = total_loss<double>(tape, {l1, l2}, {l1, l2}, 1.0);
    CHECK(loss.val().item() == doctest::Approx(2.0).epsilon(1e-15));
  }

  SUBCASE("composed term is omitted when nothing was composed") {
    auto loss = total_loss<double>(tape, {l1, l2}, {}, 0.5);
    CHECK(loss.val().item() == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("loss is monotone non-decreasing in lambda") {
    double prev = -1;
    for (double lam : {0.0, 0.1, 0.5, 1.0, 2.0}) {
      auto loss = total_loss<double>(tape, {l1, l2}, {c1}, lam);
      CHECK(loss.val().item() >= prev);
      prev = loss.val().item();
    }
  }

  SUBCASE("negative lambda is rejected") {
    CHECK_THROWS_AS(total_loss<double>(tape, {l1}, {c1}, -0.1), std::invalid_argument);
  }
}

TEST_CASE("bank detachment: composed losses train only the shared tail of the network") {
  Rng rng(31);
  ArchConfig cfg = reducer_arch(4);
  cfg.hidden_ini = {4};
  cfg.hidden_edge = {4};
  cfg.hidden_node = {4};
  ParameterStore<double> store;
  build_parameters(store, cfg, rng);
  const auto graphs = model_edge_sets<double>(cfg);

  // extract real features, bank them, then backprop only a composed loss
  Rng srng(37);
  auto s = testing::random_sample(static_cast<int>(cfg.T), static_cast<int>(cfg.N), static_cast<int>(cfg.A), srng, 0);
  FeatureBank<double> bank(4, 1, 1, 1);
  {
    Tape<double> tape;
    auto out = forward_decomposition(tape, store, cfg, graphs, s);
    bank_update(bank, out, s);
  }

  Tape<double> tape;
  Rng crng(41);
  ComposeCursor cursor;
  std::vector<ActionDescription> descs(1);
  descs[0] = s.desc;
  auto composed = compose_batch(tape, store, cfg, bank, {0}, descs, 1, crng, cursor);
  REQUIRE(composed.size() == 1);
  auto loss = softmax_cross_entropy(classify(tape, store, composed[0].rep), composed[0].label);
  tape.backward(loss, store);

  bool tail_touched = false;
  for (const auto& path : store.paths()) {
    double mag = 0;
    for (double v : store.grads().at(store.slot(path)).data) mag += std::abs(v);
    const bool extractor = path.rfind("gnn", 0) == 0 || path.rfind("tcn.", 0) == 0 ||
                           path.rfind("agg.", 0) == 0 || path.rfind("gcn.", 0) == 0 ||
                           path.rfind("noun.", 0) == 0;
    if (extractor) CHECK(mag == 0.0);
    if (path.rfind("comp.reduce.verb.c1", 0) == 0 || path.rfind("clf", 0) == 0)
      tail_touched = tail_touched || mag > 0;
  }
  CHECK(tail_touched);
}
