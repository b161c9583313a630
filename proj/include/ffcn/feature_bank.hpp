#pragma once

#include "ffcn/model.hpp"
#include "ffcn/rng.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace ffcn {

/// Per-(kind, vocab-id) ring buffers of recently extracted component features.
/// Entries are detached value snapshots; no gradient flows back through them.
template <class S>
class FeatureBank {
 public:
  struct Entry {
    Tensor<S> vec;       // [1 x D]
    std::string source;  // sample id the feature came from
  };

  FeatureBank() = default;
  FeatureBank(int capacity, int num_verbs, int num_preps, int num_nouns) : capacity_(capacity) {
    buckets_[0].resize(static_cast<std::size_t>(num_verbs));
    buckets_[1].resize(static_cast<std::size_t>(num_preps));
    buckets_[2].resize(static_cast<std::size_t>(num_nouns));
  }

  int capacity() const { return capacity_; }

  void push(Kind kind, int vocab_id, Tensor<S> vec, std::string source) {
    auto& ring = bucket(kind, vocab_id);
    if (static_cast<int>(ring.items.size()) < capacity_) {
      ring.items.push_back({std::move(vec), std::move(source)});
    } else {
      ring.items[static_cast<std::size_t>(ring.next)] = {std::move(vec), std::move(source)};
    }
    ring.next = (ring.next + 1) % capacity_;
  }

  int size(Kind kind, int vocab_id) const { return static_cast<int>(bucket(kind, vocab_id).items.size()); }

  const Entry& at(Kind kind, int vocab_id, int i) const {
    return bucket(kind, vocab_id).items[static_cast<std::size_t>(i)];
  }

 private:
  struct Ring {
    std::vector<Entry> items;
    int next = 0;
  };

  Ring& bucket(Kind k, int id) { return buckets_[static_cast<int>(k)][static_cast<std::size_t>(id)]; }
  const Ring& bucket(Kind k, int id) const {
    return buckets_[static_cast<int>(k)][static_cast<std::size_t>(id)];
  }

  int capacity_ = 64;
  std::vector<Ring> buckets_[3];
};

/// Appends each component feature the decomposition branch produced for this
/// sample under its ground-truth vocab id: head k maps to the k-th component
/// in description order.
template <class S>
void bank_update(FeatureBank<S>& bank, const DecompOutput<S>& out, const VideoSample& sample) {
  const auto& d = sample.desc;
  for (std::size_t k = 0; k < d.verbs.size(); ++k)
    bank.push(Kind::verb, d.verbs[k], out.verb_heads[k].vec.val(), sample.id);
  for (std::size_t k = 0; k < d.preps.size(); ++k)
    bank.push(Kind::prep, d.preps[k], out.prep_heads[k].vec.val(), sample.id);
  for (std::size_t k = 0; k < d.nouns.size(); ++k)
    bank.push(Kind::noun, d.nouns[k], out.noun_slots[k].vec.val(), sample.id);
}

struct Provenance {
  Kind kind;
  int vocab_id;
  std::string source;
};

/// One banked-feature draw per component of a target description.
template <class S>
struct ComposedSelection {
  int label = -1;
  ActionDescription desc;
  std::vector<Tensor<S>> verb_vecs, prep_vecs, noun_vecs;
  std::vector<Provenance> provenance;
};

/// Draws each required component uniformly at random from its bank bucket,
/// without replacement within one composed sample while the bucket is deep
/// enough. Returns nothing if any required bucket is empty.
template <class S>
std::optional<ComposedSelection<S>> draw_selection(const FeatureBank<S>& bank, int label,
                                                   const ActionDescription& desc, Rng& rng) {
  for (Kind k : {Kind::verb, Kind::prep, Kind::noun}) {
    for (int i = 0; i < desc.count(k); ++i)
      if (bank.size(k, desc.component_id(k, i)) == 0) return std::nullopt;
  }
  ComposedSelection<S> sel;
  sel.label = label;
  sel.desc = desc;

  std::vector<std::pair<std::pair<Kind, int>, std::vector<int>>> taken;
  auto pick_from = [&](Kind k, int id) {
    const int n = bank.size(k, id);
    std::vector<int>* used = nullptr;
    for (auto& t : taken)
      if (t.first == std::make_pair(k, id)) used = &t.second;
    if (!used) {
      taken.push_back({{k, id}, {}});
      used = &taken.back().second;
    }
    int idx = rng.below_int(n);
    if (static_cast<int>(used->size()) < n) {
      while (std::find(used->begin(), used->end(), idx) != used->end()) idx = rng.below_int(n);
    }
    used->push_back(idx);
    const auto& e = bank.at(k, id, idx);
    sel.provenance.push_back({k, id, e.source});
    return e.vec;
  };

  for (int i = 0; i < desc.count(Kind::verb); ++i)
    sel.verb_vecs.push_back(pick_from(Kind::verb, desc.verbs[static_cast<std::size_t>(i)]));
  for (int i = 0; i < desc.count(Kind::prep); ++i)
    sel.prep_vecs.push_back(pick_from(Kind::prep, desc.preps[static_cast<std::size_t>(i)]));
  for (int i = 0; i < desc.count(Kind::noun); ++i)
    sel.noun_vecs.push_back(pick_from(Kind::noun, desc.nouns[static_cast<std::size_t>(i)]));
  return sel;
}

/// A composed feature-space training sample.
template <class S>
struct ComposedSample {
  Var<S> rep;  // [1 x 3D]
  int label = -1;
  std::vector<Provenance> provenance;
};

/// Assembles a drawn selection on the given tape through the shared reducers.
template <class S>
ComposedSample<S> assemble_composed(Tape<S>& tape, const ParameterStore<S>& store, const ArchConfig& cfg,
                                    const ComposedSelection<S>& sel) {
  std::vector<Var<S>> verbs, preps, nouns;
  for (const auto& v : sel.verb_vecs) verbs.push_back(tape.leaf(v));
  for (const auto& v : sel.prep_vecs) preps.push_back(tape.leaf(v));
  for (const auto& v : sel.noun_vecs) nouns.push_back(tape.leaf(v));
  Var<S> rep = assemble_representation(tape, store, cfg, verbs, preps, nouns, sel.desc);
  return {rep, sel.label, sel.provenance};
}

/// Round-robin position over composition targets; persists across batches.
struct ComposeCursor {
  std::size_t next = 0;
};

/// Composes up to m samples for the target classes, round-robin; a class whose
/// buckets are not all stocked is skipped this batch.
template <class S>
std::vector<ComposedSample<S>> compose_batch(Tape<S>& tape, const ParameterStore<S>& store,
                                             const ArchConfig& cfg, const FeatureBank<S>& bank,
                                             const std::vector<int>& targets,
                                             const std::vector<ActionDescription>& class_descs, int m,
                                             Rng& rng, ComposeCursor& cursor) {
  if (targets.empty()) throw std::invalid_argument("compose_batch: empty target list");
  std::vector<ComposedSample<S>> out;
  std::size_t consecutive_skips = 0;
  while (out.size() < static_cast<std::size_t>(std::max(0, m))) {
    if (consecutive_skips >= targets.size()) break;  // nothing composable this batch
    const int cls = targets[cursor.next % targets.size()];
    cursor.next = (cursor.next + 1) % targets.size();
    auto sel = draw_selection<S>(bank, cls, class_descs[static_cast<std::size_t>(cls)], rng);
    if (!sel) {
      ++consecutive_skips;
      continue;
    }
    consecutive_skips = 0;
    out.push_back(assemble_composed(tape, store, cfg, *sel));
  }
  return out;
}

/// L = mean(real CE) + lambda * mean(composed CE); the composed term is
/// omitted when no samples were composed.
template <class S>
Var<S> total_loss(Tape<S>& tape, const std::vector<Var<S>>& real_losses,
                  const std::vector<Var<S>>& composed_losses, S lambda) {
  if (lambda < S(0)) throw std::invalid_argument("total_loss: lambda must be >= 0");
  if (real_losses.empty()) throw std::invalid_argument("total_loss: no decomposition losses");
  auto mean_of = [&](const std::vector<Var<S>>& xs) {
    Var<S> acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return scale(acc, S(1) / static_cast<S>(xs.size()));
  };
  Var<S> loss = mean_of(real_losses);
  if (!composed_losses.empty()) loss = add(loss, scale(mean_of(composed_losses), lambda));
  (void)tape;
  return loss;
}

}  // namespace ffcn
