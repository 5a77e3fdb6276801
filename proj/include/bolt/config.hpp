// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/ema.hpp"
#include "bolt/model.hpp"
#include "bolt/trainer.hpp"

namespace bolt {

/// Fully-resolved run configuration; every default is explicit here.
struct RunConfig {
  // [data]
  std::string data_kind = "synthetic";  // synthetic | folder
  std::string data_path;                // folder root when kind == folder
  int classes = 3;
  int per_class = 200;
  int height = 32;
  int width = 32;
  int channels = 3;
  std::string pattern = "auto";  // blob | stripe | checker | auto
  double noise_std = 0.05;
  std::uint64_t data_seed = 7;
  std::uint64_t split_seed = 11;
  data::SplitRatios ratios{0.7, 0.1, 0.2};
  std::string pretrain_split = "train";  // train | all

  // [model]
  int depth = 2;
  int heads = 4;
  double mlp_ratio = 4.0;
  int dim = 64;
  int patch = 8;
  int proj_hidden = 256;
  int proj_dim = 64;
  std::uint64_t init_seed = 1;

  // [perturb]
  int window = 4;
  bool identity_mode = false;
  std::uint64_t perturb_seed = 3;

  // [train]
  std::int64_t steps = 1000;
  int batch = 8;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double alpha = 0.1;
  double tau = 0.996;
  std::string tau_schedule = "cosine";  // cosine | constant
  bool normalize_similarity = true;
  std::uint64_t order_seed = 5;
  int finetune_epochs = 30;
  int finetune_batch = 16;
  double finetune_lr = 1e-3;
  int probe_epochs = 200;
  double probe_lr = 0.5;
  std::uint64_t probe_seed = 9;

  // [io]
  std::string checkpoint_dir = "checkpoints";
  std::string metrics_path = "metrics.csv";
  std::int64_t checkpoint_every = 500;

  void validate() const {
    if (data_kind != "synthetic" && data_kind != "folder")
      throw ConfigError("data.kind must be 'synthetic' or 'folder'");
    if (data_kind == "folder" && data_path.empty())
      throw ConfigError("data.path is required when data.kind = 'folder'");
    if (classes < 2) throw ConfigError("data.classes must be >= 2");
    if (per_class < 1) throw ConfigError("data.per_class must be >= 1");
    if (noise_std < 0) throw ConfigError("data.noise_std must be >= 0");
    data::pattern_kind_from_string(pattern);
    if (pretrain_split != "train" && pretrain_split != "all")
      throw ConfigError("data.pretrain_split must be 'train' or 'all'");
    model_config().validate();  // P | H, P | W, heads | dim, S | N, ...
    if (!(alpha >= 0.0)) throw ConfigError("train.alpha must be >= 0");
    if (tau < 0.0 || tau > 1.0)
      throw ConfigError("train.tau must lie in [0, 1]");
    if (tau_schedule != "cosine" && tau_schedule != "constant")
      throw ConfigError("train.tau_schedule must be 'cosine' or 'constant'");
    if (steps < 0) throw ConfigError("train.steps must be >= 0");
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
    if (!(weight_decay >= 0.0))
      throw ConfigError("train.weight_decay must be >= 0");
    if (finetune_epochs < 0 || finetune_batch < 1)
      throw ConfigError("invalid finetune settings");
    if (probe_epochs < 1 || !(probe_lr > 0.0))
      throw ConfigError("invalid probe settings");
    if (checkpoint_every < 1)
      throw ConfigError("io.checkpoint_every must be >= 1");
    // The split ratios are validated by split_dataset; fail early here.
    if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
      throw ConfigError("ratios must sum to 1");
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.patch = PatchEmbedConfig{height, width, channels, patch, dim};
    m.depth = depth;
    m.heads = heads;
    m.mlp_ratio = mlp_ratio;
    m.proj_hidden = proj_hidden;
    m.proj_dim = proj_dim;
    m.window_len = window;
    m.identity_perturb = identity_mode;
    return m;
  }

  data::SyntheticSpec synthetic_spec() const {
    data::SyntheticSpec s;
    s.num_classes = classes;
    s.per_class = per_class;
    s.height = height;
    s.width = width;
    s.channels = channels;
    s.pattern = data::pattern_kind_from_string(pattern);
    s.noise_std = noise_std;
    s.seed = data_seed;
    return s;
  }

  template <class T>
  TrainConfig<T> train_config() const {
    TrainConfig<T> t;
    t.steps = steps;
    t.batch = batch;
    t.lr = static_cast<T>(lr);
    t.weight_decay = static_cast<T>(weight_decay);
    t.alpha = static_cast<T>(alpha);
    t.ema.tau_base = tau;
    t.ema.schedule = tau_schedule == "constant" ? TauSchedule::Constant
                                                : TauSchedule::CosineToOne;
    t.ema.total_steps = steps;
    t.normalize_similarity = normalize_similarity;
    t.perturb_seed = perturb_seed;
    t.order_seed = order_seed;
    return t;
  }
};

namespace detail {

struct ConfigValue {
  std::string text;
  int line = 0;
  bool consumed = false;
};

using ConfigMap = std::map<std::string, ConfigValue>;

inline std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline ConfigMap parse_config_map(std::istream& in) {
  ConfigMap map;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // comments start with '#' outside quotes
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quote = !in_quote;
      if (line[i] == '#' && !in_quote) {
        line = line.substr(0, i);
        break;
      }
    }
    const std::string trimmed = strip(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '[') {
      if (trimmed.back() != ']')
        throw ConfigError("malformed section header at line " +
                          std::to_string(line_no));
      section = strip(trimmed.substr(1, trimmed.size() - 2));
      if (section.empty())
        throw ConfigError("empty section name at line " +
                          std::to_string(line_no));
      continue;
    }
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value' at line " +
                        std::to_string(line_no));
    std::string key = strip(trimmed.substr(0, eq));
    std::string value = strip(trimmed.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("expected 'key = value' at line " +
                        std::to_string(line_no));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    const std::string full = section.empty() ? key : section + "." + key;
    if (map.count(full))
      throw ConfigError("duplicate key '" + full + "' at line " +
                        std::to_string(line_no));
    map[full] = ConfigValue{value, line_no, false};
  }
  return map;
}

inline const ConfigValue* find(ConfigMap& map, const std::string& key) {
  const auto it = map.find(key);
  if (it == map.end()) return nullptr;
  it->second.consumed = true;
  return &it->second;
}

inline void take(ConfigMap& m, const std::string& k, std::string& out) {
  if (const auto* v = find(m, k)) out = v->text;
}

inline void take(ConfigMap& m, const std::string& k, bool& out) {
  if (const auto* v = find(m, k)) {
    if (v->text == "true")
      out = true;
    else if (v->text == "false")
      out = false;
    else
      throw ConfigError("key '" + k + "' expects true/false, got '" + v->text +
                        "'");
  }
}

template <class V>
void take_number(ConfigMap& m, const std::string& k, V& out) {
  if (const auto* v = find(m, k)) {
    std::istringstream ss(v->text);
    V parsed{};
    ss >> parsed;
    if (ss.fail() || !ss.eof())
      throw ConfigError("key '" + k + "' has a malformed value '" + v->text +
                        "'");
    out = parsed;
  }
}

inline void take_ratios(ConfigMap& m, const std::string& k,
                        data::SplitRatios& out) {
  if (const auto* v = find(m, k)) {
    double a = 0, b = 0, c = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(v->text);
    ss >> a >> c1 >> b >> c2 >> c;
    if (ss.fail() || c1 != ',' || c2 != ',')
      throw ConfigError("key '" + k +
                        "' expects three comma-separated ratios");
    out = data::SplitRatios{a, b, c};
  }
}

}  // namespace detail

/// Parses a TOML-style config document. Unknown keys are errors; all
/// defaults survive when keys are absent; cross-field constraints are
/// validated before returning.
inline RunConfig parse_config_stream(std::istream& in) {
  auto map = detail::parse_config_map(in);
  RunConfig c;
  detail::take(map, "data.kind", c.data_kind);
  detail::take(map, "data.path", c.data_path);
  detail::take_number(map, "data.classes", c.classes);
  detail::take_number(map, "data.per_class", c.per_class);
  detail::take_number(map, "data.height", c.height);
  detail::take_number(map, "data.width", c.width);
  detail::take_number(map, "data.channels", c.channels);
  detail::take(map, "data.pattern", c.pattern);
  detail::take_number(map, "data.noise_std", c.noise_std);
  detail::take_number(map, "data.seed", c.data_seed);
  detail::take_number(map, "data.split_seed", c.split_seed);
  detail::take_ratios(map, "data.split_ratios", c.ratios);
  detail::take(map, "data.pretrain_split", c.pretrain_split);

  detail::take_number(map, "model.depth", c.depth);
  detail::take_number(map, "model.heads", c.heads);
  detail::take_number(map, "model.mlp_ratio", c.mlp_ratio);
  detail::take_number(map, "model.dim", c.dim);
  detail::take_number(map, "model.patch", c.patch);
  detail::take_number(map, "model.proj_hidden", c.proj_hidden);
  detail::take_number(map, "model.proj_dim", c.proj_dim);
  detail::take_number(map, "model.init_seed", c.init_seed);

  detail::take_number(map, "perturb.window", c.window);
  detail::take(map, "perturb.identity_mode", c.identity_mode);
  detail::take_number(map, "perturb.seed", c.perturb_seed);

  detail::take_number(map, "train.steps", c.steps);
  detail::take_number(map, "train.batch", c.batch);
  detail::take_number(map, "train.lr", c.lr);
  detail::take_number(map, "train.weight_decay", c.weight_decay);
  detail::take_number(map, "train.alpha", c.alpha);
  detail::take_number(map, "train.tau", c.tau);
  detail::take(map, "train.tau_schedule", c.tau_schedule);
  detail::take(map, "train.normalize_similarity", c.normalize_similarity);
  detail::take_number(map, "train.order_seed", c.order_seed);
  detail::take_number(map, "train.finetune_epochs", c.finetune_epochs);
  detail::take_number(map, "train.finetune_batch", c.finetune_batch);
  detail::take_number(map, "train.finetune_lr", c.finetune_lr);
  detail::take_number(map, "train.probe_epochs", c.probe_epochs);
  detail::take_number(map, "train.probe_lr", c.probe_lr);
  detail::take_number(map, "train.probe_seed", c.probe_seed);

  detail::take(map, "io.checkpoint_dir", c.checkpoint_dir);
  detail::take(map, "io.metrics_path", c.metrics_path);
  detail::take_number(map, "io.checkpoint_every", c.checkpoint_every);

  for (const auto& [key, value] : map)
    if (!value.consumed)
      throw ConfigError("unknown key '" + key + "' (line " +
                        std::to_string(value.line) + ")");
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config_stream(in);
}

inline RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config_stream(in);
}

}  // namespace bolt
