#pragma once

#include "ffcn/model.hpp"
#include "ffcn/synth.hpp"

#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

namespace ffcn {

/// Flat key = value run configuration. Unknown keys are rejected; values keep
/// spec defaults unless overridden.
struct RunConfig {
  // run
  std::uint64_t seed = 1;
  std::string precision = "f32";  // f32 for training throughput, f64 for gradient checks
  int workers = 2;                // fixed in the config so runs replay bit-identically

  // generator
  int T = 16;
  int N = 4;
  int A = 16;
  int vocab_verbs = 6;
  int vocab_preps = 4;
  int vocab_nouns = 8;
  double box_noise = 0.012;
  double app_noise = 0.08;
  double p_miss = 0.05;
  int num_classes = 40;
  int lt_head = 200;
  int lt_tail = 10;
  int val_per_class = 20;
  int comp_train_per_class = 60;
  int fs_base_classes = 30;
  int fs_base_per_class = 64;
  int fs_novel_val = 20;

  // model
  long D = 128;
  int gnn_steps = 2;
  int gcn_layers = 2;
  int n_max_verb = 2;
  int n_max_prep = 2;
  int n_max_noun = 2;
  std::vector<long> hidden_ini = {-1};   // -1 resolves to D
  std::vector<long> hidden_edge = {-1};
  std::vector<long> hidden_node = {-1};
  std::vector<long> hidden_head = {};
  std::vector<long> hidden_fc = {-2};    // -2 resolves to 2D
  bool separate_refiners = false;
  bool per_head_tcn = false;

  // training
  int batch_size = 64;
  double base_lr = 0.01;
  std::vector<int> lr_decay_epochs = {15};
  double lr_decay_factor = 10.0;
  int epochs = 25;
  double lambda = 0.1;
  int composed_per_batch = 10;
  int bank_capacity = 64;
  int tail_count = 20;  // composition targets = this many lowest-count classes
  bool composition = true;
  bool attached_composition = false;

  // few-shot finetuning
  int fewshot_epochs = 8;
  int fewshot_batch = 16;
  double fewshot_lr = 0.01;

  // io
  bool keep_epoch_checkpoints = false;

  std::vector<long> resolve_hidden(const std::vector<long>& h) const {
    std::vector<long> out;
    for (long v : h) out.push_back(v == -1 ? D : v == -2 ? 2 * D : v);
    return out;
  }

  GenConfig gen_config() const {
    GenConfig g;
    g.T = T;
    g.N = N;
    g.A = A;
    g.num_verbs = vocab_verbs;
    g.num_preps = vocab_preps;
    g.num_nouns = vocab_nouns;
    g.box_noise = box_noise;
    g.app_noise = app_noise;
    g.p_miss = p_miss;
    return g;
  }

  SplitConfig split_config() const {
    SplitConfig s;
    s.num_classes = num_classes;
    s.lt_head = lt_head;
    s.lt_tail = lt_tail;
    s.lt_tail_classes = tail_count;
    s.val_per_class = val_per_class;
    s.comp_train_per_class = comp_train_per_class;
    s.fs_base_classes = fs_base_classes;
    s.fs_base_per_class = fs_base_per_class;
    s.fs_novel_val = fs_novel_val;
    return s;
  }

  /// Architecture for a classifier over `classes` classes.
  ArchConfig arch_config(long classes) const {
    ArchConfig a;
    a.T = T;
    a.N = N;
    a.A = A;
    a.D = D;
    a.gnn_steps = gnn_steps;
    a.gcn_layers = gcn_layers;
    a.n_max_verb = n_max_verb;
    a.n_max_prep = n_max_prep;
    a.n_max_noun = n_max_noun;
    a.num_classes = classes;
    a.hidden_ini = resolve_hidden(hidden_ini);
    a.hidden_edge = resolve_hidden(hidden_edge);
    a.hidden_node = resolve_hidden(hidden_node);
    a.hidden_head = resolve_hidden(hidden_head);
    a.hidden_fc = resolve_hidden(hidden_fc);
    a.fc_default = false;
    a.separate_refiners = separate_refiners;
    a.per_head_tcn = per_head_tcn;
    return a;
  }

  void validate() const {
    if (precision != "f32" && precision != "f64")
      throw std::invalid_argument("config: precision must be f32 or f64");
    if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    if (batch_size < 1 || epochs < 0 || base_lr <= 0 || lr_decay_factor <= 0)
      throw std::invalid_argument("config: bad training schedule");
    if (lambda < 0) throw std::invalid_argument("config: lambda must be >= 0");
    if (composed_per_batch < 0 || bank_capacity < 1)
      throw std::invalid_argument("config: bad composition settings");
    if (tail_count < 0 || tail_count > num_classes)
      throw std::invalid_argument("config: tail_count out of range");
    arch_config(num_classes).validate();  // also checks D divisibility by component counts
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
std::vector<T> parse_list(const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<T>(std::stoll(item)));
  }
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

template <class T>
std::string list_str(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace config_detail

/// Parses `key = value` lines; # starts a comment; unknown keys are errors.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = config_detail::trim(line.substr(0, eq));
    const std::string val = config_detail::trim(line.substr(eq + 1));
    using config_detail::parse_bool;
    using config_detail::parse_list;
    if (key == "seed") c.seed = std::stoull(val);
    else if (key == "precision") c.precision = val;
    else if (key == "workers") c.workers = std::stoi(val);
    else if (key == "T") c.T = std::stoi(val);
    else if (key == "N") c.N = std::stoi(val);
    else if (key == "A") c.A = std::stoi(val);
    else if (key == "vocab_verbs") c.vocab_verbs = std::stoi(val);
    else if (key == "vocab_preps") c.vocab_preps = std::stoi(val);
    else if (key == "vocab_nouns") c.vocab_nouns = std::stoi(val);
    else if (key == "box_noise") c.box_noise = std::stod(val);
    else if (key == "app_noise") c.app_noise = std::stod(val);
    else if (key == "p_miss") c.p_miss = std::stod(val);
    else if (key == "num_classes") c.num_classes = std::stoi(val);
    else if (key == "lt_head") c.lt_head = std::stoi(val);
    else if (key == "lt_tail") c.lt_tail = std::stoi(val);
    else if (key == "val_per_class") c.val_per_class = std::stoi(val);
    else if (key == "comp_train_per_class") c.comp_train_per_class = std::stoi(val);
    else if (key == "fs_base_classes") c.fs_base_classes = std::stoi(val);
    else if (key == "fs_base_per_class") c.fs_base_per_class = std::stoi(val);
    else if (key == "fs_novel_val") c.fs_novel_val = std::stoi(val);
    else if (key == "D") c.D = std::stol(val);
    else if (key == "gnn_steps") c.gnn_steps = std::stoi(val);
    else if (key == "gcn_layers") c.gcn_layers = std::stoi(val);
    else if (key == "n_max_verb") c.n_max_verb = std::stoi(val);
    else if (key == "n_max_prep") c.n_max_prep = std::stoi(val);
    else if (key == "n_max_noun") c.n_max_noun = std::stoi(val);
    else if (key == "hidden_ini") c.hidden_ini = parse_list<long>(val);
    else if (key == "hidden_edge") c.hidden_edge = parse_list<long>(val);
    else if (key == "hidden_node") c.hidden_node = parse_list<long>(val);
    else if (key == "hidden_head") c.hidden_head = parse_list<long>(val);
    else if (key == "hidden_fc") c.hidden_fc = parse_list<long>(val);
    else if (key == "separate_refiners") c.separate_refiners = parse_bool(val, key);
    else if (key == "per_head_tcn") c.per_head_tcn = parse_bool(val, key);
    else if (key == "batch_size") c.batch_size = std::stoi(val);
    else if (key == "base_lr") c.base_lr = std::stod(val);
    else if (key == "lr_decay_epochs") c.lr_decay_epochs = parse_list<int>(val);
    else if (key == "lr_decay_factor") c.lr_decay_factor = std::stod(val);
    else if (key == "epochs") c.epochs = std::stoi(val);
    else if (key == "lambda") c.lambda = std::stod(val);
    else if (key == "composed_per_batch") c.composed_per_batch = std::stoi(val);
    else if (key == "bank_capacity") c.bank_capacity = std::stoi(val);
    else if (key == "tail_count") c.tail_count = std::stoi(val);
    else if (key == "composition") c.composition = parse_bool(val, key);
    else if (key == "attached_composition") c.attached_composition = parse_bool(val, key);
    else if (key == "fewshot_epochs") c.fewshot_epochs = std::stoi(val);
    else if (key == "fewshot_batch") c.fewshot_batch = std::stoi(val);
    else if (key == "fewshot_lr") c.fewshot_lr = std::stod(val);
    else if (key == "keep_epoch_checkpoints") c.keep_epoch_checkpoints = parse_bool(val, key);
    else throw std::invalid_argument("config: unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("config: cannot open " + file);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical serialization with every key resolved; embedding this in a
/// checkpoint makes the model reconstructible without the original file.
inline std::string config_to_text(const RunConfig& c) {
  using config_detail::list_str;
  std::ostringstream os;
  os << "seed = " << c.seed << "\n";
  os << "precision = " << c.precision << "\n";
  os << "workers = " << c.workers << "\n";
  os << "T = " << c.T << "\n";
  os << "N = " << c.N << "\n";
  os << "A = " << c.A << "\n";
  os << "vocab_verbs = " << c.vocab_verbs << "\n";
  os << "vocab_preps = " << c.vocab_preps << "\n";
  os << "vocab_nouns = " << c.vocab_nouns << "\n";
  os << "box_noise = " << c.box_noise << "\n";
  os << "app_noise = " << c.app_noise << "\n";
  os << "p_miss = " << c.p_miss << "\n";
  os << "num_classes = " << c.num_classes << "\n";
  os << "lt_head = " << c.lt_head << "\n";
  os << "lt_tail = " << c.lt_tail << "\n";
  os << "val_per_class = " << c.val_per_class << "\n";
  os << "comp_train_per_class = " << c.comp_train_per_class << "\n";
  os << "fs_base_classes = " << c.fs_base_classes << "\n";
  os << "fs_base_per_class = " << c.fs_base_per_class << "\n";
  os << "fs_novel_val = " << c.fs_novel_val << "\n";
  os << "D = " << c.D << "\n";
  os << "gnn_steps = " << c.gnn_steps << "\n";
  os << "gcn_layers = " << c.gcn_layers << "\n";
  os << "n_max_verb = " << c.n_max_verb << "\n";
  os << "n_max_prep = " << c.n_max_prep << "\n";
  os << "n_max_noun = " << c.n_max_noun << "\n";
  os << "hidden_ini = " << list_str(c.resolve_hidden(c.hidden_ini)) << "\n";
  os << "hidden_edge = " << list_str(c.resolve_hidden(c.hidden_edge)) << "\n";
  os << "hidden_node = " << list_str(c.resolve_hidden(c.hidden_node)) << "\n";
  os << "hidden_head = " << list_str(c.resolve_hidden(c.hidden_head)) << "\n";
  os << "hidden_fc = " << list_str(c.resolve_hidden(c.hidden_fc)) << "\n";
  os << "separate_refiners = " << (c.separate_refiners ? "true" : "false") << "\n";
  os << "per_head_tcn = " << (c.per_head_tcn ? "true" : "false") << "\n";
  os << "batch_size = " << c.batch_size << "\n";
  os << "base_lr = " << c.base_lr << "\n";
  os << "lr_decay_epochs = " << list_str(c.lr_decay_epochs) << "\n";
  os << "lr_decay_factor = " << c.lr_decay_factor << "\n";
  os << "epochs = " << c.epochs << "\n";
  os << "lambda = " << c.lambda << "\n";
  os << "composed_per_batch = " << c.composed_per_batch << "\n";
  os << "bank_capacity = " << c.bank_capacity << "\n";
  os << "tail_count = " << c.tail_count << "\n";
  os << "composition = " << (c.composition ? "true" : "false") << "\n";
  os << "attached_composition = " << (c.attached_composition ? "true" : "false") << "\n";
  os << "fewshot_epochs = " << c.fewshot_epochs << "\n";
  os << "fewshot_batch = " << c.fewshot_batch << "\n";
  os << "fewshot_lr = " << c.fewshot_lr << "\n";
  os << "keep_epoch_checkpoints = " << (c.keep_epoch_checkpoints ? "true" : "false") << "\n";
  return os.str();
}

/// Seed precedence below the CLI --seed flag: FFCN_SEED env > config file.
inline void apply_env_seed(RunConfig& cfg) {
  if (const char* env = std::getenv("FFCN_SEED")) cfg.seed = std::stoull(env);
}

/// Piecewise-constant schedule: the base rate divided by the decay factor
/// once per decay boundary already passed.
inline double lr_at(const RunConfig& c, int epoch) {
  double lr = c.base_lr;
  for (int boundary : c.lr_decay_epochs)
    if (epoch >= boundary) lr /= c.lr_decay_factor;
  return lr;
}

}  // namespace ffcn
