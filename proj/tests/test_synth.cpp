#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffcn/synth.hpp"
#include "ffcn/synth_oracle.hpp"

#include <filesystem>
#include <set>

using namespace ffcn;

namespace {

GenConfig small_gen() {
  GenConfig g;  // full-size frames, defaults otherwise
  return g;
}

SplitConfig small_split(int classes) {
  SplitConfig s;
  s.num_classes = classes;
  s.val_per_class = 5;
  return s;
}

}  // namespace

TEST_CASE("build_vocab: determinism, prototype angles, raw template count") {
  GenConfig g = small_gen();
  auto v1 = build_vocab(g, 42);
  auto v2 = build_vocab(g, 42);
  CHECK(v1.noun_prototypes.data == v2.noun_prototypes.data);

  const double max_cos = std::cos(30.0 * M_PI / 180.0);
  for (int a = 0; a < v1.num_nouns(); ++a)
    for (int b = a + 1; b < v1.num_nouns(); ++b) {
      double dot = 0;
      for (int k = 0; k < g.A; ++k) dot += v1.noun_prototypes(a, k) * v1.noun_prototypes(b, k);
      CHECK(std::abs(dot) <= max_cos + 1e-12);
    }

  CHECK(raw_template_count(v1) == 6 * 4 * 8);
}

TEST_CASE("build_classes: coverage, segment plans, infeasible requests") {
  GenConfig g = small_gen();
  auto vocab = build_vocab(g, 7);
  auto classes = build_classes(vocab, 40, 7, g.T, g.N - 1);
  REQUIRE(classes.size() == 40);

  std::vector<int> verb_use(6, 0), prep_use(4, 0), noun_use(8, 0);
  for (const auto& c : classes) {
    for (int v : c.desc.verbs) verb_use[static_cast<std::size_t>(v)]++;
    for (int p : c.desc.preps) prep_use[static_cast<std::size_t>(p)]++;
    for (int n : c.desc.nouns) noun_use[static_cast<std::size_t>(n)]++;
  }
  for (int u : verb_use) CHECK(u >= 2);
  for (int u : prep_use) CHECK(u >= 2);
  for (int u : noun_use) CHECK(u >= 2);

  for (const auto& c : classes) {
    REQUIRE(c.segments.size() == c.desc.verbs.size());
    int covered = 0, prev_end = -1;
    for (auto [a, b] : c.segments) {
      CHECK(a >= prev_end);  // disjoint and ordered
      CHECK(b > a);
      covered += b - a;
      prev_end = b;
    }
    CHECK(covered * 5 >= g.T * 4);  // at least 80% of frames
    CHECK(c.desc.verbs.size() >= 1);
    CHECK(c.desc.nouns.size() >= 1);
    CHECK(c.desc.order.size() == c.desc.verbs.size() + c.desc.preps.size() + c.desc.nouns.size());
  }

  CHECK_THROWS_AS(build_classes(vocab, 1000000000, 7, g.T, g.N - 1), std::invalid_argument);
}

TEST_CASE("render_sample: determinism and primitive shape") {
  GenConfig g = small_gen();
  g.p_miss = 0.0;
  auto vocab = build_vocab(g, 11);
  auto classes = build_classes(vocab, 12, 11, g.T, g.N - 1);

  SUBCASE("noise 0, p_miss 0, same seed renders bit-identical samples") {
    auto a = render_sample(classes[3], vocab, g, {}, 0.0, 1234, "s");
    auto b = render_sample(classes[3], vocab, g, {}, 0.0, 1234, "s");
    REQUIRE(a.boxes.size() == b.boxes.size());
    for (std::size_t i = 0; i < a.boxes.size(); ++i) {
      CHECK(a.boxes[i].cx == b.boxes[i].cx);
      CHECK(a.boxes[i].cy == b.boxes[i].cy);
      CHECK(a.boxes[i].w == b.boxes[i].w);
      CHECK(a.boxes[i].h == b.boxes[i].h);
    }
    CHECK(a.appearance == b.appearance);
  }

  SUBCASE("a lift segment strictly decreases the hand's cy") {
    // find a class whose first verb is lift
    const ClassTemplate* lift_class = nullptr;
    for (const auto& c : classes)
      if (static_cast<VerbKind>(c.desc.verbs[0]) == VerbKind::lift) lift_class = &c;
    REQUIRE(lift_class != nullptr);
    auto s = render_sample(*lift_class, vocab, g, {}, 0.0, 99, "s");
    const auto [a, b] = lift_class->segments[0];
    for (int t = a + 1; t < b; ++t) CHECK(s.box(t, 0).cy < s.box(t - 1, 0).cy);
  }

  SUBCASE("rendered boxes satisfy the ingestion invariants") {
    GenConfig gn = small_gen();
    for (int c = 0; c < 5; ++c) {
      auto s = render_sample(classes[static_cast<std::size_t>(c)], vocab, gn, {}, 1.0,
                             derive_seed(5, "t", static_cast<std::uint64_t>(c)), "r");
      validate_sample(s, gn.T);
    }
  }
}

TEST_CASE("oracle: perfect on clean data, above the separability floor with noise") {
  GenConfig g = small_gen();
  SplitConfig split = small_split(20);
  split.lt_head = 8;
  split.lt_tail = 2;
  split.lt_tail_classes = 8;

  SUBCASE("clean renders classify perfectly") {
    GenConfig clean = g;
    clean.box_noise = 0.0;
    clean.app_noise = 0.0;
    clean.p_miss = 0.0;
    auto ds = make_longtail_dataset(clean, split, 31);
    CHECK(oracle_accuracy(ds, "val") == 1.0);
  }

  SUBCASE("default noise stays above 95%") {
    auto ds = make_longtail_dataset(g, split, 31);
    CHECK(oracle_accuracy(ds, "val") >= 0.95);
  }
}

TEST_CASE("longtail split: power-law counts, tail selection, composability") {
  GenConfig g = small_gen();
  SplitConfig split = small_split(12);
  split.lt_tail_classes = 4;
  auto ds = make_longtail_dataset(g, split, 17);

  // counts scanned from the manifest match the recorded per-class counts
  std::map<int, int> scanned;
  for (const auto& id : ds.manifest("train")) scanned[ds.sample(id).label]++;
  int head_count = 0, tail_count = 1 << 20;
  for (int c = 0; c < split.num_classes; ++c) {
    CHECK(scanned[c] == ds.meta.train_counts[static_cast<std::size_t>(c)]);
    head_count = std::max(head_count, scanned[c]);
    tail_count = std::min(tail_count, scanned[c]);
  }
  CHECK(head_count == 200);
  CHECK(tail_count == 10);
  CHECK(tail_count < head_count);

  // tail ids are exactly the lowest-count classes
  REQUIRE(static_cast<int>(ds.meta.tail_ids.size()) == split.lt_tail_classes);
  int max_tail = 0, min_head = 1 << 20;
  std::set<int> tail_set(ds.meta.tail_ids.begin(), ds.meta.tail_ids.end());
  for (int c = 0; c < split.num_classes; ++c) {
    if (tail_set.count(c))
      max_tail = std::max(max_tail, scanned[c]);
    else
      min_head = std::min(min_head, scanned[c]);
  }
  CHECK(max_tail <= min_head);

  // every tail component id appears in some head class
  std::set<std::pair<int, int>> head_ids;
  for (int c = 0; c < split.num_classes; ++c) {
    if (tail_set.count(c)) continue;
    const auto& d = ds.meta.classes[static_cast<std::size_t>(c)].desc;
    for (int v : d.verbs) head_ids.insert({0, v});
    for (int p : d.preps) head_ids.insert({1, p});
    for (int n : d.nouns) head_ids.insert({2, n});
  }
  for (int c : ds.meta.tail_ids) {
    const auto& d = ds.meta.classes[static_cast<std::size_t>(c)].desc;
    for (int v : d.verbs) CHECK(head_ids.count({0, v}));
    for (int p : d.preps) CHECK(head_ids.count({1, p}));
    for (int n : d.nouns) CHECK(head_ids.count({2, n}));
  }

  // balanced validation
  std::map<int, int> val_scanned;
  for (const auto& id : ds.manifest("val")) val_scanned[ds.sample(id).label]++;
  for (int c = 0; c < split.num_classes; ++c) CHECK(val_scanned[c] == split.val_per_class);
}

TEST_CASE("compositional split: verb/noun combinations never cross the split") {
  GenConfig g = small_gen();
  SplitConfig split = small_split(10);
  split.comp_train_per_class = 6;
  auto ds = make_compositional_dataset(g, split, 23);

  auto combo = [&](const VideoSample& s) {
    std::vector<int> v = s.desc.verbs, n = s.desc.nouns;
    std::sort(v.begin(), v.end());
    std::sort(n.begin(), n.end());
    std::string key;
    for (int x : v) key += "v" + std::to_string(x);
    for (int x : n) key += "n" + std::to_string(x);
    return key;
  };
  std::set<std::string> train_combos, val_combos;
  for (const auto& id : ds.manifest("train")) train_combos.insert(combo(ds.sample(id)));
  for (const auto& id : ds.manifest("val")) val_combos.insert(combo(ds.sample(id)));
  for (const auto& c : val_combos) CHECK(!train_combos.count(c));

  // classes themselves appear on both sides
  std::set<int> train_classes, val_classes;
  for (const auto& id : ds.manifest("train")) train_classes.insert(ds.sample(id).label);
  for (const auto& id : ds.manifest("val")) val_classes.insert(ds.sample(id).label);
  CHECK(train_classes == val_classes);

  // canonical class nouns stay sourceable from the train side
  for (const auto& tpl : ds.meta.classes) {
    bool found = false;
    for (const auto& id : ds.manifest("train")) {
      const auto& s = ds.sample(id);
      if (s.label != tpl.id) continue;
      std::vector<int> a = s.desc.nouns, b = tpl.desc.nouns;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      found = found || a == b;
    }
    CHECK(found);
  }
}

TEST_CASE("fewshot split: exact k, nesting, base/novel composability") {
  GenConfig g = small_gen();
  SplitConfig split = small_split(12);
  split.fs_base_classes = 8;
  split.fs_base_per_class = 6;
  split.fs_novel_val = 4;
  auto ds = make_fewshot_dataset(g, split, 29);

  CHECK(ds.meta.base_ids.size() == 8);
  CHECK(ds.meta.novel_ids.size() == 4);

  std::map<int, int> k5, k10;
  for (const auto& id : ds.manifest("novel_train_k5")) k5[ds.sample(id).label]++;
  for (const auto& id : ds.manifest("novel_train_k10")) k10[ds.sample(id).label]++;
  for (int c : ds.meta.novel_ids) {
    CHECK(k5[c] == 5);
    CHECK(k10[c] == 10);
  }
  std::set<std::string> ten(ds.manifest("novel_train_k10").begin(), ds.manifest("novel_train_k10").end());
  for (const auto& id : ds.manifest("novel_train_k5")) CHECK(ten.count(id));

  std::set<std::pair<int, int>> base_ids;
  for (int c : ds.meta.base_ids) {
    const auto& d = ds.meta.classes[static_cast<std::size_t>(c)].desc;
    for (int v : d.verbs) base_ids.insert({0, v});
    for (int p : d.preps) base_ids.insert({1, p});
    for (int n : d.nouns) base_ids.insert({2, n});
  }
  for (int c : ds.meta.novel_ids) {
    const auto& d = ds.meta.classes[static_cast<std::size_t>(c)].desc;
    for (int v : d.verbs) CHECK(base_ids.count({0, v}));
    for (int p : d.preps) CHECK(base_ids.count({1, p}));
    for (int n : d.nouns) CHECK(base_ids.count({2, n}));
  }
}

TEST_CASE("dataset files: write and load round-trip exactly") {
  GenConfig g = small_gen();
  SplitConfig split = small_split(12);
  split.lt_head = 4;
  split.lt_tail = 2;
  split.lt_tail_classes = 3;
  split.val_per_class = 2;
  auto ds = make_longtail_dataset(g, split, 37);

  const auto dir = std::filesystem::temp_directory_path() / "ffcn_ds_roundtrip";
  std::filesystem::remove_all(dir);
  write_dataset(dir.string(), ds);
  auto loaded = load_dataset(dir.string());

  CHECK(loaded.meta.mode == ds.meta.mode);
  CHECK(loaded.meta.tail_ids == ds.meta.tail_ids);
  CHECK(loaded.meta.train_counts == ds.meta.train_counts);
  CHECK(loaded.meta.n_max_verb == ds.meta.n_max_verb);
  CHECK(loaded.meta.vocab.noun_prototypes.data == ds.meta.vocab.noun_prototypes.data);
  REQUIRE(loaded.samples.size() == ds.samples.size());
  CHECK(loaded.manifests == ds.manifests);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& a = ds.samples[i];
    const auto& b = loaded.sample(a.id);
    CHECK(a.label == b.label);
    CHECK(a.present == b.present);
    CHECK(a.appearance == b.appearance);
    for (std::size_t bx = 0; bx < a.boxes.size(); ++bx) {
      CHECK(a.boxes[bx].cx == b.boxes[bx].cx);
      CHECK(a.boxes[bx].cy == b.boxes[bx].cy);
      CHECK(a.boxes[bx].w == b.boxes[bx].w);
      CHECK(a.boxes[bx].h == b.boxes[bx].h);
    }
    CHECK(a.desc.verbs == b.desc.verbs);
    CHECK(a.desc.preps == b.desc.preps);
    CHECK(a.desc.nouns == b.desc.nouns);
    CHECK(a.desc.order == b.desc.order);
  }
  std::filesystem::remove_all(dir);
}
