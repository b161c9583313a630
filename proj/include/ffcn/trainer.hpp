#pragma once

#include "ffcn/checkpoint.hpp"
#include "ffcn/feature_bank.hpp"
#include "ffcn/run_config.hpp"
#include "ffcn/synth.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace ffcn {

struct MetricsRecord {
  long epoch = 0;
  double l_d = 0;
  double l_c = 0;  // NaN when nothing was composed
  double top1 = 0;
  std::vector<double> per_class;
  double tail_mean = -1;   // -1 when the split has no tail set
  double novel_mean = -1;  // -1 outside few-shot evaluation
  long composed = 0;       // composed samples this epoch
};

inline nlohmann::json metrics_to_json(const MetricsRecord& m) {
  nlohmann::json j;
  j["epoch"] = m.epoch;
  j["L_d"] = m.l_d;
  if (std::isfinite(m.l_c)) j["L_c"] = m.l_c;
  j["top1"] = m.top1;
  j["per_class"] = m.per_class;
  if (m.tail_mean >= 0) j["tail_mean"] = m.tail_mean;
  if (m.novel_mean >= 0) j["novel_mean"] = m.novel_mean;
  j["composed"] = m.composed;
  return j;
}

/// Argmax with the lowest index winning ties (deterministic prediction rule).
template <class S>
int argmax_lowest(const Tensor<S>& logits) {
  int best = 0;
  for (long c = 1; c < logits.size(); ++c)
    if (logits.data[static_cast<std::size_t>(c)] > logits.data[static_cast<std::size_t>(best)])
      best = static_cast<int>(c);
  return best;
}

struct TrainIO {
  std::string out_dir;  // empty: keep everything in memory
  std::function<void(const MetricsRecord&)> on_epoch;
};

/// Detached component features of one sample, in head order.
template <class S>
struct BankedFeatures {
  std::vector<Tensor<S>> verbs, preps, nouns;
};

/// Owns the parameters, bank, and loop state for one training run over a
/// class scope (all classes, or the base/novel subset in few-shot runs).
/// Gradients are evaluated on per-sample tapes by `workers` threads and
/// reduced in a fixed order, so a run replays bit-identically for a fixed
/// config.
template <class S>
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const Dataset& data, std::vector<int> class_scope)
      : cfg_(cfg),
        data_(data),
        scope_(std::move(class_scope)),
        arch_(cfg.arch_config(static_cast<long>(scope_.size()))),
        graphs_(model_edge_sets<S>(arch_)),
        bank_(cfg.bank_capacity, cfg.vocab_verbs, cfg.vocab_preps, cfg.vocab_nouns),
        compose_rng_(derive_seed(cfg.seed, "compose")) {
    validate_against_dataset();
    for (std::size_t i = 0; i < scope_.size(); ++i) label_map_[scope_[i]] = static_cast<int>(i);
  }

  const ArchConfig& arch() const { return arch_; }
  ParameterStore<S>& store() { return store_; }
  const ParameterStore<S>& store() const { return store_; }
  const std::vector<int>& scope() const { return scope_; }
  FeatureBank<S>& bank() { return bank_; }

  void init_params() {
    Rng rng(derive_seed(cfg_.seed, "init"));
    build_parameters(store_, arch_, rng);
  }

  /// Composition targets: the dataset's tail set restricted to this scope,
  /// as remapped labels.
  std::vector<int> default_targets() const {
    std::vector<int> t;
    for (int c : data_.meta.tail_ids) {
      auto it = label_map_.find(c);
      if (it != label_map_.end()) t.push_back(it->second);
    }
    return t;
  }

  /// Standard epoch loop: shuffle, per batch decomposition forward +
  /// bank update + composition + step; per-epoch metrics on `val_manifest`.
  std::vector<MetricsRecord> train(const std::string& train_manifest, const std::string& val_manifest,
                                   const TrainIO& io = {}) {
    const auto ids = remapped_manifest(train_manifest);
    const std::vector<int> targets = cfg_.composition ? default_targets() : std::vector<int>{};
    std::vector<MetricsRecord> history;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      auto order = ids;
      Rng shuffle_rng(derive_seed(cfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
      shuffle_rng.shuffle(order);
      const double lr = lr_at(cfg_, epoch);
      double ld_sum = 0, lc_sum = 0;
      long ld_n = 0, lc_n = 0;
      for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg_.batch_size)) {
        const std::size_t hi = std::min(order.size(), off + static_cast<std::size_t>(cfg_.batch_size));
        const std::vector<Labeled> batch(order.begin() + static_cast<long>(off), order.begin() + static_cast<long>(hi));
        const BatchStats st = process_batch(batch, static_cast<S>(lr), targets, cfg_.composed_per_batch);
        ld_sum += st.l_d * static_cast<double>(batch.size());
        ld_n += static_cast<long>(batch.size());
        if (st.composed > 0) {
          lc_sum += st.l_c * st.composed;
          lc_n += st.composed;
        }
      }
      MetricsRecord rec = evaluate(val_manifest);
      rec.epoch = epoch;
      rec.l_d = ld_n ? ld_sum / static_cast<double>(ld_n) : 0;
      rec.l_c = lc_n ? lc_sum / static_cast<double>(lc_n) : std::numeric_limits<double>::quiet_NaN();
      rec.composed = lc_n;
      finish_epoch(rec, epoch, io);
      history.push_back(std::move(rec));
    }
    return history;
  }

  /// Few-shot finetuning: k training samples per novel class, and (when
  /// composing) exactly k composed samples per novel class per epoch.
  std::vector<MetricsRecord> finetune_fewshot(int k, bool compose, const TrainIO& io = {}) {
    const auto ids = remapped_manifest("novel_train_k" + std::to_string(k));
    std::vector<MetricsRecord> history;
    for (int epoch = 0; epoch < cfg_.fewshot_epochs; ++epoch) {
      auto order = ids;
      Rng shuffle_rng(derive_seed(cfg_.seed, "fs-shuffle", static_cast<std::uint64_t>(epoch)));
      shuffle_rng.shuffle(order);
      // k composed per class per epoch, spread evenly over the batches
      std::vector<int> schedule;
      if (compose && cfg_.composition) {
        for (std::size_t c = 0; c < scope_.size(); ++c)
          for (int i = 0; i < k; ++i) schedule.push_back(static_cast<int>(c));
        compose_rng_.shuffle(schedule);
      }
      const std::size_t n_batches =
          (order.size() + static_cast<std::size_t>(cfg_.fewshot_batch) - 1) / static_cast<std::size_t>(cfg_.fewshot_batch);
      double ld_sum = 0, lc_sum = 0;
      long ld_n = 0, lc_n = 0;
      std::size_t sched_off = 0, batch_idx = 0;
      for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg_.fewshot_batch), ++batch_idx) {
        const std::size_t hi = std::min(order.size(), off + static_cast<std::size_t>(cfg_.fewshot_batch));
        const std::vector<Labeled> batch(order.begin() + static_cast<long>(off), order.begin() + static_cast<long>(hi));
        const std::size_t sched_hi = schedule.size() * (batch_idx + 1) / std::max<std::size_t>(1, n_batches);
        const std::vector<int> batch_targets(schedule.begin() + static_cast<long>(sched_off),
                                             schedule.begin() + static_cast<long>(sched_hi));
        sched_off = sched_hi;
        const BatchStats st =
            process_batch(batch, static_cast<S>(cfg_.fewshot_lr), batch_targets, static_cast<int>(batch_targets.size()));
        ld_sum += st.l_d * static_cast<double>(batch.size());
        ld_n += static_cast<long>(batch.size());
        if (st.composed > 0) {
          lc_sum += st.l_c * st.composed;
          lc_n += st.composed;
        }
      }
      MetricsRecord rec = evaluate("novel_val");
      rec.epoch = epoch;
      rec.l_d = ld_n ? ld_sum / static_cast<double>(ld_n) : 0;
      rec.l_c = lc_n ? lc_sum / static_cast<double>(lc_n) : std::numeric_limits<double>::quiet_NaN();
      rec.composed = lc_n;
      finish_epoch(rec, epoch, io);
      history.push_back(std::move(rec));
    }
    return history;
  }

  /// Runs the decomposition branch over a manifest and stores the component
  /// features, so composition can source classes before they are revisited.
  void warm_bank(const std::string& manifest) {
    for (const auto& [id, label] : remapped_manifest(manifest)) {
      (void)label;
      Tape<S> tape;
      auto out = forward_decomposition(tape, store_, arch_, graphs_, data_.sample(id));
      bank_update(bank_, out, data_.sample(id));
    }
  }

  /// Deterministic forward evaluation: top-1 by argmax (lowest index wins
  /// ties), per-class accuracy, tail and novel means where defined.
  MetricsRecord evaluate(const std::string& manifest) const {
    const auto ids = remapped_manifest(manifest);
    std::vector<int> predicted(ids.size(), -1);
    parallel_for(ids.size(), [&](std::size_t i) {
      Tape<S> tape;
      auto out = forward_decomposition(tape, store_, arch_, graphs_, data_.sample(ids[i].id));
      predicted[i] = argmax_lowest(out.logits.val());
    });
    MetricsRecord rec;
    std::vector<long> per_class_total(scope_.size(), 0), per_class_hit(scope_.size(), 0);
    long hits = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      per_class_total[static_cast<std::size_t>(ids[i].label)]++;
      if (predicted[i] == ids[i].label) {
        per_class_hit[static_cast<std::size_t>(ids[i].label)]++;
        ++hits;
      }
    }
    rec.top1 = ids.empty() ? 0 : static_cast<double>(hits) / static_cast<double>(ids.size());
    rec.per_class.resize(scope_.size(), 0);
    for (std::size_t c = 0; c < scope_.size(); ++c)
      rec.per_class[c] = per_class_total[c] ? static_cast<double>(per_class_hit[c]) / static_cast<double>(per_class_total[c]) : 0;
    rec.tail_mean = scoped_mean(rec.per_class, data_.meta.tail_ids, per_class_total);
    rec.novel_mean = scoped_mean(rec.per_class, data_.meta.novel_ids, per_class_total);
    return rec;
  }

  void save(const std::string& file, long epoch) const {
    std::vector<std::pair<std::string, CkptEntry>> entries;
    entries.reserve(store_.size() * 2 + 4);
    for (std::size_t i = 0; i < store_.size(); ++i) {
      const auto& e = store_.entry(static_cast<int>(i));
      entries.emplace_back(e.path, CkptEntry::of(e.value));
    }
    for (std::size_t i = 0; i < store_.size(); ++i) {
      const auto& e = store_.entry(static_cast<int>(i));
      entries.emplace_back("opt/vel/" + e.path, CkptEntry::of(e.velocity));
    }
    entries.emplace_back("opt/step", CkptEntry::of(Tensor<double>::scalar(static_cast<double>(store_.step_count()))));
    entries.emplace_back("meta/epoch", CkptEntry::of(Tensor<double>::scalar(static_cast<double>(epoch))));
    entries.emplace_back("meta/config", CkptEntry::of_text(config_to_text(cfg_)));
    // class scope rides along so evaluation can rebuild the label map
    Tensor<double> scope_t(Shape{static_cast<long>(scope_.size())});
    for (std::size_t i = 0; i < scope_.size(); ++i) scope_t.data[i] = scope_[i];
    entries.emplace_back("meta/class_scope", CkptEntry::of(scope_t));
    write_checkpoint(file, entries);
  }

  long load(const std::string& file) { return load_train_state(file, store_); }

 private:
  struct Labeled {
    std::string id;
    int label;
  };

  struct BatchStats {
    double l_d = 0, l_c = 0;
    long composed = 0;
  };

  void validate_against_dataset() {
    const auto& meta = data_.meta;
    if (cfg_.T != meta.gen.T || cfg_.N != meta.gen.N || cfg_.A != meta.gen.A)
      throw std::invalid_argument("trainer: config T/N/A do not match the dataset");
    if (cfg_.n_max_verb < meta.n_max_verb || cfg_.n_max_prep < meta.n_max_prep ||
        cfg_.n_max_noun < meta.n_max_noun)
      throw std::invalid_argument("trainer: config n_max is below the dataset's component counts");
    if (scope_.empty()) throw std::invalid_argument("trainer: empty class scope");
    for (int c : scope_)
      if (c < 0 || c >= static_cast<int>(meta.classes.size()))
        throw std::invalid_argument("trainer: class scope outside the dataset (class-count mismatch)");
  }

  std::vector<Labeled> remapped_manifest(const std::string& name) const {
    std::vector<Labeled> out;
    for (const auto& id : data_.manifest(name)) {
      const auto& s = data_.sample(id);
      if (s.roles[0] != Role::hand)
        throw std::invalid_argument("trainer: sample " + id + " does not use the canonical slot layout");
      auto it = label_map_.find(s.label);
      if (it == label_map_.end())
        throw std::invalid_argument("trainer: sample " + id + " has label " + std::to_string(s.label) +
                                    " outside the class scope (class-count mismatch)");
      out.push_back({id, it->second});
    }
    return out;
  }

  double scoped_mean(const std::vector<double>& per_class, const std::vector<int>& original_ids,
                     const std::vector<long>& totals) const {
    double sum = 0;
    long n = 0;
    for (int c : original_ids) {
      auto it = label_map_.find(c);
      if (it == label_map_.end()) continue;
      if (totals[static_cast<std::size_t>(it->second)] == 0) continue;
      sum += per_class[static_cast<std::size_t>(it->second)];
      ++n;
    }
    return n ? sum / static_cast<double>(n) : -1;
  }

  void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) const {
    const int workers = std::max(1, cfg_.workers);
    if (workers == 1 || count <= 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
      threads.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < count; i += static_cast<std::size_t>(workers)) fn(i);
      });
    for (auto& t : threads) t.join();
  }

  /// One optimizer step over a batch. Per-sample gradients land in per-worker
  /// sinks (worker w owns samples w, w+W, ...) and reduce in worker order;
  /// the accumulation order is a pure function of batch size and `workers`.
  BatchStats process_batch(const std::vector<Labeled>& batch, S lr, const std::vector<int>& targets, int m) {
    BatchStats stats;
    const int workers = std::max(1, cfg_.workers);
    store_.alloc_zero_grads();
    std::vector<GradSink<S>> sinks(static_cast<std::size_t>(workers));
    for (auto& s : sinks) s.reset(store_.size());
    std::vector<double> losses(batch.size(), 0);
    std::vector<BankedFeatures<S>> feats(batch.size());
    const S inv_b = S(1) / static_cast<S>(batch.size());

    if (cfg_.attached_composition) {
      run_attached_batch(batch, targets, m, sinks[0], losses, feats, stats);
    } else {
      std::vector<std::thread> threads;
      auto work = [&](int w) {
        for (std::size_t i = static_cast<std::size_t>(w); i < batch.size(); i += static_cast<std::size_t>(workers)) {
          Tape<S> tape;
          const VideoSample& sample = data_.sample(batch[i].id);
          auto out = forward_decomposition(tape, store_, arch_, graphs_, sample);
          auto loss = softmax_cross_entropy(out.logits, batch[i].label);
          losses[i] = static_cast<double>(loss.val().item());
          for (const auto& c : out.verb_heads) feats[i].verbs.push_back(c.vec.val());
          for (const auto& c : out.prep_heads) feats[i].preps.push_back(c.vec.val());
          for (const auto& c : out.noun_slots) feats[i].nouns.push_back(c.vec.val());
          tape.backward(loss, sinks[static_cast<std::size_t>(w)], inv_b);
        }
      };
      if (workers == 1) {
        work(0);
      } else {
        for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
      }
      for (auto& sink : sinks) store_.grads().accumulate(sink);

      // bank update in sample order, then composition from the updated bank
      for (std::size_t i = 0; i < batch.size(); ++i)
        push_banked(feats[i], data_.sample(batch[i].id));
      if (!targets.empty() && m > 0) {
        Tape<S> tape;
        auto composed = compose_batch(tape, store_, arch_, bank_, targets, scoped_descriptions(), m,
                                      compose_rng_, cursor_);
        if (!composed.empty()) {
          std::vector<Var<S>> ces;
          double lc = 0;
          for (const auto& c : composed) {
            auto ce = softmax_cross_entropy(classify(tape, store_, c.rep), c.label);
            lc += static_cast<double>(ce.val().item());
            ces.push_back(ce);
          }
          stats.l_c = lc / static_cast<double>(composed.size());
          stats.composed = static_cast<long>(composed.size());
          if (cfg_.lambda > 0) {
            Var<S> sum = ces[0];
            for (std::size_t i = 1; i < ces.size(); ++i) sum = add(sum, ces[i]);
            tape.backward(sum, store_.grads(), static_cast<S>(cfg_.lambda) / static_cast<S>(ces.size()));
          }
        }
      }
    }

    double ld = 0;
    for (double l : losses) ld += l;
    stats.l_d = batch.empty() ? 0 : ld / static_cast<double>(batch.size());
    sgd_step(store_, lr);
    return stats;
  }

  /// Ablation arm: the composed representations stay attached to the live
  /// extractor graph. The batch is processed in chunks that share a tape and
  /// composition draws from the chunk's live component features.
  void run_attached_batch(const std::vector<Labeled>& batch, const std::vector<int>& targets, int m,
                          GradSink<S>& sink, std::vector<double>& losses,
                          std::vector<BankedFeatures<S>>& feats, BatchStats& stats) {
    const std::size_t chunk_size = 8;
    const std::size_t n_chunks = (batch.size() + chunk_size - 1) / chunk_size;
    const S inv_b = S(1) / static_cast<S>(batch.size());
    const auto descs = scoped_descriptions();
    double lc_sum = 0;
    long lc_n = 0;
    std::size_t m_off = 0;
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      const std::size_t lo = chunk * chunk_size, hi = std::min(batch.size(), lo + chunk_size);
      Tape<S> tape;
      std::map<std::pair<int, int>, std::vector<Var<S>>> live;  // (kind, vocab id) -> features
      std::vector<Var<S>> real_ces;
      for (std::size_t i = lo; i < hi; ++i) {
        const VideoSample& sample = data_.sample(batch[i].id);
        auto out = forward_decomposition(tape, store_, arch_, graphs_, sample);
        real_ces.push_back(softmax_cross_entropy(out.logits, batch[i].label));
        losses[i] = static_cast<double>(real_ces.back().val().item());
        for (const auto& c : out.verb_heads) feats[i].verbs.push_back(c.vec.val());
        for (const auto& c : out.prep_heads) feats[i].preps.push_back(c.vec.val());
        for (const auto& c : out.noun_slots) feats[i].nouns.push_back(c.vec.val());
        const auto& d = sample.desc;
        for (std::size_t k = 0; k < d.verbs.size(); ++k)
          live[{0, d.verbs[k]}].push_back(out.verb_heads[k].vec);
        for (std::size_t k = 0; k < d.preps.size(); ++k)
          live[{1, d.preps[k]}].push_back(out.prep_heads[k].vec);
        for (std::size_t k = 0; k < d.nouns.size(); ++k)
          live[{2, d.nouns[k]}].push_back(out.noun_slots[k].vec);
      }
      // this chunk's share of the composed samples
      const std::size_t m_hi = static_cast<std::size_t>(m) * (chunk + 1) / n_chunks;
      std::vector<Var<S>> comp_ces;
      std::size_t consecutive_skips = 0;
      for (std::size_t j = m_off; j < m_hi && !targets.empty();) {
        if (consecutive_skips >= targets.size()) break;
        const int cls = targets[cursor_.next % targets.size()];
        cursor_.next = (cursor_.next + 1) % targets.size();
        const auto& d = descs[static_cast<std::size_t>(cls)];
        bool stocked = true;
        for (Kind kk : {Kind::verb, Kind::prep, Kind::noun})
          for (int idx = 0; idx < d.count(kk); ++idx)
            if (!live.count({static_cast<int>(kk), d.component_id(kk, idx)})) stocked = false;
        if (!stocked) {
          ++consecutive_skips;
          continue;
        }
        consecutive_skips = 0;
        std::vector<Var<S>> vs, ps, ns;
        auto draw = [&](Kind kk, int id) {
          auto& pool = live[{static_cast<int>(kk), id}];
          return pool[compose_rng_.below(pool.size())];
        };
        for (int idx = 0; idx < d.count(Kind::verb); ++idx) vs.push_back(draw(Kind::verb, d.verbs[static_cast<std::size_t>(idx)]));
        for (int idx = 0; idx < d.count(Kind::prep); ++idx) ps.push_back(draw(Kind::prep, d.preps[static_cast<std::size_t>(idx)]));
        for (int idx = 0; idx < d.count(Kind::noun); ++idx) ns.push_back(draw(Kind::noun, d.nouns[static_cast<std::size_t>(idx)]));
        auto rep = assemble_representation(tape, store_, arch_, vs, ps, ns, d);
        comp_ces.push_back(softmax_cross_entropy(classify(tape, store_, rep), cls));
        lc_sum += static_cast<double>(comp_ces.back().val().item());
        ++lc_n;
        ++j;
      }
      m_off = m_hi;
      // single backward per chunk: real losses at 1/B, composed at lambda/m
      Var<S> total = scale(real_ces[0], inv_b);
      for (std::size_t i = 1; i < real_ces.size(); ++i) total = add(total, scale(real_ces[i], inv_b));
      if (!comp_ces.empty() && cfg_.lambda > 0 && m > 0) {
        Var<S> csum = comp_ces[0];
        for (std::size_t i = 1; i < comp_ces.size(); ++i) csum = add(csum, comp_ces[i]);
        total = add(total, scale(csum, static_cast<S>(cfg_.lambda) / static_cast<S>(m)));
      }
      tape.backward(total, sink, S(1));
    }
    store_.grads().accumulate(sink);
    for (std::size_t i = 0; i < batch.size(); ++i) push_banked(feats[i], data_.sample(batch[i].id));
    if (lc_n > 0) {
      stats.l_c = lc_sum / static_cast<double>(lc_n);
      stats.composed = lc_n;
    }
  }

  void push_banked(const BankedFeatures<S>& f, const VideoSample& sample) {
    const auto& d = sample.desc;
    for (std::size_t k = 0; k < d.verbs.size(); ++k) bank_.push(Kind::verb, d.verbs[k], f.verbs[k], sample.id);
    for (std::size_t k = 0; k < d.preps.size(); ++k) bank_.push(Kind::prep, d.preps[k], f.preps[k], sample.id);
    for (std::size_t k = 0; k < d.nouns.size(); ++k) bank_.push(Kind::noun, d.nouns[k], f.nouns[k], sample.id);
  }

  /// Class descriptions indexed by remapped label.
  std::vector<ActionDescription> scoped_descriptions() const {
    std::vector<ActionDescription> out;
    for (int c : scope_) out.push_back(data_.meta.classes[static_cast<std::size_t>(c)].desc);
    return out;
  }

  void finish_epoch(const MetricsRecord& rec, int epoch, const TrainIO& io) {
    if (io.on_epoch) io.on_epoch(rec);
    if (io.out_dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(io.out_dir);
    {
      std::ofstream os(fs::path(io.out_dir) / "metrics.jsonl", std::ios::app);
      os << metrics_to_json(rec).dump() << "\n";
    }
    save((fs::path(io.out_dir) / "ckpt_last.ffcn").string(), epoch);
    if (cfg_.keep_epoch_checkpoints) {
      char name[48];
      std::snprintf(name, sizeof name, "ckpt_ep%03d.ffcn", epoch);
      save((fs::path(io.out_dir) / name).string(), epoch);
    }
  }

  RunConfig cfg_;
  const Dataset& data_;
  std::vector<int> scope_;
  ArchConfig arch_;
  ModelGraphs<S> graphs_;
  ParameterStore<S> store_;
  FeatureBank<S> bank_;
  Rng compose_rng_;
  ComposeCursor cursor_;
  std::map<int, int> label_map_;
};

/// All classes of the dataset, in id order.
inline std::vector<int> full_scope(const Dataset& data) {
  std::vector<int> s(data.meta.classes.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<int>(i);
  return s;
}

/// Base-checkpoint transfer for few-shot runs: copy everything except the
/// final classifier layer, which is rebuilt for the novel classes.
template <class S>
void transfer_base_parameters(const ParameterStore<S>& base, ParameterStore<S>& novel) {
  int clf_layers = 0;
  while (novel.has("clf." + std::to_string(clf_layers) + ".weight")) ++clf_layers;
  const std::string head = "clf." + std::to_string(clf_layers - 1) + ".";
  for (const auto& path : novel.paths()) {
    if (path.rfind(head, 0) == 0) continue;  // fresh head
    novel.value(path) = base.value(path);
  }
}

}  // namespace ffcn
