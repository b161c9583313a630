#include "ffcn/grad_audit.hpp"
#include "ffcn/synth_oracle.hpp"
#include "ffcn/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace ffcn;

namespace {

void print_epoch(const MetricsRecord& m) {
  std::printf("epoch %3ld  L_d %.4f", m.epoch, m.l_d);
  if (std::isfinite(m.l_c)) std::printf("  L_c %.4f", m.l_c);
  std::printf("  top1 %.4f", m.top1);
  if (m.tail_mean >= 0) std::printf("  tail %.4f", m.tail_mean);
  if (m.novel_mean >= 0) std::printf("  novel %.4f", m.novel_mean);
  std::printf("\n");
  std::fflush(stdout);
}

template <class S>
int run_train(const RunConfig& cfg, const Dataset& data, const std::string& out_dir,
              const std::string& resume) {
  const bool fewshot_base = data.meta.mode == "fewshot";
  const std::vector<int> scope = fewshot_base ? data.meta.base_ids : full_scope(data);
  Trainer<S> trainer(cfg, data, scope);
  trainer.init_params();
  if (!resume.empty()) {
    const long epoch = trainer.load(resume);
    std::printf("resumed from %s (epoch %ld)\n", resume.c_str(), epoch);
  }
  TrainIO io;
  io.out_dir = out_dir;
  io.on_epoch = print_epoch;
  const std::string train_m = fewshot_base ? "base_train" : "train";
  const std::string val_m = fewshot_base ? "base_val" : "val";
  auto history = trainer.train(train_m, val_m, io);
  if (!out_dir.empty()) {
    trainer.save((fs::path(out_dir) / "ckpt_final.ffcn").string(), cfg.epochs - 1);
    std::printf("final checkpoint: %s\n", (fs::path(out_dir) / "ckpt_final.ffcn").string().c_str());
  }
  return 0;
}

std::vector<int> scope_from_checkpoint(const std::string& ckpt) {
  const auto entries = read_checkpoint(ckpt);
  auto it = entries.find("meta/class_scope");
  if (it == entries.end()) throw std::runtime_error("checkpoint has no class scope: " + ckpt);
  std::vector<int> scope;
  for (double v : it->second.as<double>().data) scope.push_back(static_cast<int>(v));
  return scope;
}

template <class S>
int run_eval(const RunConfig& cfg, const std::string& ckpt, const Dataset& data,
             const std::string& manifest_name) {
  Trainer<S> trainer(cfg, data, scope_from_checkpoint(ckpt));
  trainer.init_params();
  trainer.load(ckpt);
  MetricsRecord m = trainer.evaluate(manifest_name);
  std::cout << metrics_to_json(m).dump(2) << "\n";
  return 0;
}

template <class S>
int run_fewshot(const RunConfig& cfg, const std::string& base_ckpt, const Dataset& data, int k,
                bool compose, const std::string& out_dir) {
  if (data.meta.mode != "fewshot") throw std::runtime_error("fewshot: dataset was not generated in fewshot mode");
  // base model: parameters for the base class scope
  Trainer<S> base(cfg, data, data.meta.base_ids);
  base.init_params();
  base.load(base_ckpt);

  Trainer<S> novel(cfg, data, data.meta.novel_ids);
  novel.init_params();
  transfer_base_parameters(base.store(), novel.store());
  if (compose) novel.warm_bank("base_train");
  TrainIO io;
  io.out_dir = out_dir;
  io.on_epoch = print_epoch;
  auto history = novel.finetune_fewshot(k, compose, io);
  if (!history.empty()) {
    std::printf("novel-mean (k=%d, composition %s): %.4f\n", k, compose ? "on" : "off",
                history.back().novel_mean);
  }
  if (!out_dir.empty()) novel.save((fs::path(out_dir) / "ckpt_final.ffcn").string(), cfg.fewshot_epochs - 1);
  return 0;
}

int run_gradcheck(const RunConfig& cfg) {
  // finite differences are meaningless in f32; the audit always runs in f64
  const GradAuditReport report = run_grad_audit(audit_arch(cfg), cfg.seed, cfg.lambda);
  for (const auto& g : report.groups)
    std::printf("%-8s %6ld scalars  max rel err %.3e  %s\n", g.module.c_str(), g.scalars, g.max_rel_error,
                g.max_rel_error < report.tolerance ? "ok" : "FAIL");
  std::printf("gradcheck %s (max %.3e, tolerance %.1e)\n", report.passed ? "PASSED" : "FAILED",
              report.max_rel_error, report.tolerance);
  return report.passed ? 0 : 1;
}

template <class S>
int run_ablate(const RunConfig& cfg, const Dataset& data, const std::vector<std::string>& arms,
               const std::string& out_dir) {
  struct ArmResult {
    std::string name;
    double top1, tail;
  };
  std::vector<ArmResult> results;
  for (const auto& arm : arms) {
    RunConfig c = cfg;
    if (arm == "no-comp")
      c.composition = false;
    else if (arm == "comp") {
    } else if (arm == "attached")
      c.attached_composition = true;
    else if (arm == "per-head-tcn")
      c.per_head_tcn = true;
    else
      throw std::runtime_error("ablate: unknown arm " + arm);
    std::printf("=== arm %s ===\n", arm.c_str());
    Trainer<S> trainer(c, data, full_scope(data));
    trainer.init_params();
    TrainIO io;
    if (!out_dir.empty()) io.out_dir = (fs::path(out_dir) / arm).string();
    io.on_epoch = print_epoch;
    auto history = trainer.train("train", "val", io);
    const auto& last = history.back();
    results.push_back({arm, last.top1, last.tail_mean});
  }
  std::printf("\n%-14s %8s %8s\n", "arm", "top1", "tail");
  for (const auto& r : results) std::printf("%-14s %8.4f %8.4f\n", r.name.c_str(), r.top1, r.tail);
  return 0;
}

std::pair<std::string, std::string> split_manifest_path(const std::string& manifest) {
  const fs::path p(manifest);
  const std::string file = p.filename().string();
  if (file.rfind("manifest_", 0) != 0 || file.size() <= 13)
    throw std::runtime_error("eval: manifest path must point at a manifest_<name>.txt file");
  return {p.parent_path().string(), file.substr(9, file.size() - 13)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FFCN: compositional action recognition on bounding-box tracklets"};
  app.require_subcommand(1);

  std::string config_file, out_dir, data_dir, mode = "longtail", ckpt, manifest, resume, base_ckpt;
  std::uint64_t seed_flag = 0;
  bool seed_set = false, no_compose = false;
  int k = 5;
  std::vector<std::string> arms = {"no-comp", "comp"};

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic tracklet dataset");
  gen->add_option("--config", config_file, "run config file")->required();
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_option("--mode", mode, "longtail | compositional | fewshot")->required();
  gen->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) { seed_set = true; });

  auto* train = app.add_subcommand("train", "train on a generated dataset");
  train->add_option("--config", config_file)->required();
  train->add_option("--data", data_dir)->required();
  train->add_option("--out", out_dir)->required();
  train->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--manifest", manifest, "path to a manifest_<name>.txt in a dataset directory")->required();

  auto* fewshot = app.add_subcommand("fewshot", "finetune a base checkpoint on the novel classes");
  fewshot->add_option("--base-ckpt", base_ckpt)->required();
  fewshot->add_option("--data", data_dir)->required();
  fewshot->add_option("--k", k, "shots per novel class (5 or 10)")->required()->check(CLI::IsMember({5, 10}));
  fewshot->add_option("--out", out_dir);
  fewshot->add_flag("--no-compose", no_compose, "disable the composition branch during finetuning");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of every parameter path");
  gradcheck->add_option("--config", config_file)->required();

  auto* ablate = app.add_subcommand("ablate", "train and compare ablation arms");
  ablate->add_option("--config", config_file)->required();
  ablate->add_option("--data", data_dir)->required();
  ablate->add_option("--out", out_dir);
  ablate->add_option("--arms", arms, "subset of {no-comp,comp,attached,per-head-tcn}")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_config(config_file);
      apply_env_seed(cfg);
      if (seed_set) cfg.seed = seed_flag;
      Dataset ds = build_dataset(cfg.gen_config(), cfg.split_config(), mode, cfg.seed);
      write_dataset(out_dir, ds);
      const std::string check_manifest = mode == "fewshot" ? "base_val" : "val";
      const double oracle = oracle_accuracy(ds, check_manifest);
      std::printf("dataset written to %s (%zu samples); oracle separability %.4f on %s\n", out_dir.c_str(),
                  ds.samples.size(), oracle, check_manifest.c_str());
      return 0;
    }
    if (train->parsed()) {
      RunConfig cfg = load_config(config_file);
      apply_env_seed(cfg);
      Dataset data = load_dataset(data_dir);
      return cfg.precision == "f64" ? run_train<double>(cfg, data, out_dir, resume)
                                    : run_train<float>(cfg, data, out_dir, resume);
    }
    if (eval->parsed()) {
      RunConfig cfg = parse_config_text(checkpoint_config_text(ckpt));
      const auto [dir, name] = split_manifest_path(manifest);
      Dataset data = load_dataset(dir);
      return cfg.precision == "f64" ? run_eval<double>(cfg, ckpt, data, name)
                                    : run_eval<float>(cfg, ckpt, data, name);
    }
    if (fewshot->parsed()) {
      RunConfig cfg = parse_config_text(checkpoint_config_text(base_ckpt));
      Dataset data = load_dataset(data_dir);
      const bool compose = !no_compose;
      return cfg.precision == "f64" ? run_fewshot<double>(cfg, base_ckpt, data, k, compose, out_dir)
                                    : run_fewshot<float>(cfg, base_ckpt, data, k, compose, out_dir);
    }
    if (gradcheck->parsed()) {
      RunConfig cfg = load_config(config_file);
      apply_env_seed(cfg);
      return run_gradcheck(cfg);
    }
    if (ablate->parsed()) {
      RunConfig cfg = load_config(config_file);
      apply_env_seed(cfg);
      Dataset data = load_dataset(data_dir);
      return cfg.precision == "f64" ? run_ablate<double>(cfg, data, arms, out_dir)
                                    : run_ablate<float>(cfg, data, arms, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
