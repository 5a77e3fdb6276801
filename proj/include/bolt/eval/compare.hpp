// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "bolt/checkpoint.hpp"
#include "bolt/core/error.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/eval/finetune.hpp"
#include "bolt/eval/metrics.hpp"
#include "bolt/eval/probe.hpp"

namespace bolt::eval {

enum class InitKind { Scratch, Bolt, BoltNoDiff };

inline std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::Scratch: return "scratch";
    case InitKind::Bolt: return "bolt";
    case InitKind::BoltNoDiff: return "bolt-no-diff";
  }
  throw ConfigError("unknown init kind");
}

inline InitKind init_kind_from_string(const std::string& s) {
  if (s == "scratch") return InitKind::Scratch;
  if (s == "bolt") return InitKind::Bolt;
  if (s == "bolt-no-diff" || s == "bolt_no_diff") return InitKind::BoltNoDiff;
  throw ConfigError("unknown strategy '" + s + "'");
}

struct StrategySpec {
  std::string name;
  InitKind init = InitKind::Scratch;
  double label_fraction = 1.0;
};

struct ComparisonCell {
  std::string strategy;
  double label_fraction = 1.0;
  double acc = 0.0;
  double f1_macro = 0.0;
  int seed_count = 0;
};

struct ComparisonConfig {
  ModelConfig model;
  FinetuneConfig finetune;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string bolt_checkpoint;          // required by Bolt specs
  std::string bolt_no_diff_checkpoint;  // required by BoltNoDiff specs
  int max_threads = 1;                  // BOLT_THREADS caps this
};

/// Stratified uniform test subset: per_class samples from every class,
/// classes smaller than the quota are taken in full (with a warning).
inline data::LabeledDataset uniform_test_subsample(
    const data::LabeledDataset& test, std::size_t per_class,
    std::uint64_t seed, std::vector<std::string>* warnings = nullptr) {
  std::vector<std::size_t> keep;
  const auto by_class = test.indices_by_class();
  for (int cls = 0; cls < test.num_classes; ++cls) {
    auto indices = by_class[cls];
    if (indices.size() < per_class) {
      const std::string msg =
          "class " + std::to_string(cls) + " has only " +
          std::to_string(indices.size()) + " test samples (< " +
          std::to_string(per_class) + "); taking all";
      if (warnings)
        warnings->push_back(msg);
      else
        std::cerr << "warning: " << msg << "\n";
    }
    Rng rng(seed_mix(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(indices);
    const std::size_t take = std::min(per_class, indices.size());
    for (std::size_t i = 0; i < take; ++i) keep.push_back(indices[i]);
  }
  return test.subset(std::move(keep), test.provenance + "/uniform");
}

namespace detail {

inline std::uint64_t cell_seed(std::uint64_t base, const std::string& name,
                               double fraction) {
  return seed_mix(seed_mix(base, name),
                  static_cast<std::uint64_t>(fraction * 1e6));
}

inline ClassifierModel<float> build_model(const ComparisonConfig& cfg,
                                          const StrategySpec& spec,
                                          int num_classes,
                                          std::uint64_t seed) {
  if (spec.init == InitKind::Scratch)
    return ClassifierModel<float>::scratch(cfg.model, num_classes, seed);
  const std::string& path = spec.init == InitKind::Bolt
                                ? cfg.bolt_checkpoint
                                : cfg.bolt_no_diff_checkpoint;
  if (path.empty())
    throw ConfigError("missing checkpoint for spec '" + spec.name + "'");
  OnlineBranch<float> online = init_online<float>(cfg.model, seed);
  load_online_branch(path, online);
  Rng head_rng(seed_mix(seed, "head"));
  return ClassifierModel<float>::from_backbone(
      cfg.model, online.embed, online.encoder, num_classes, head_rng);
}

}  // namespace detail

/// Runs the strategies x fractions grid: per (spec, seed) the train split is
/// fraction-subsampled, the model finetuned on it, and evaluated on the test
/// split; each cell reports the median over seeds. Independent cells may run
/// in parallel (ComparisonConfig::max_threads, see BOLT_THREADS).
inline std::vector<ComparisonCell> run_comparison(
    const std::vector<StrategySpec>& specs, const data::DatasetSplits& splits,
    const ComparisonConfig& cfg) {
  for (const auto& spec : specs) {
    if (spec.init == InitKind::Bolt && cfg.bolt_checkpoint.empty())
      throw ConfigError("missing checkpoint for spec '" + spec.name + "'");
    if (spec.init == InitKind::BoltNoDiff &&
        cfg.bolt_no_diff_checkpoint.empty())
      throw ConfigError("missing checkpoint for spec '" + spec.name + "'");
  }

  std::vector<ComparisonCell> cells(specs.size());
  const auto run_cell = [&](std::size_t i) {
    const StrategySpec& spec = specs[i];
    std::vector<double> accs, f1s;
    for (const std::uint64_t base : cfg.seeds) {
      const std::uint64_t seed =
          detail::cell_seed(base, spec.name, spec.label_fraction);
      const data::LabeledDataset train_subset =
          spec.label_fraction < 1.0
              ? data::subsample_fraction(splits.train, spec.label_fraction,
                                         seed)
              : splits.train;
      ClassifierModel<float> model =
          detail::build_model(cfg, spec, splits.train.num_classes, seed);
      FinetuneConfig ft = cfg.finetune;
      ft.order_seed = seed_mix(seed, "order");
      model = finetune(std::move(model), train_subset, splits.val, ft);
      const EvalResult result = evaluate(model, splits.test);
      accs.push_back(result.acc);
      f1s.push_back(result.f1_macro);
    }
    cells[i] = ComparisonCell{spec.name, spec.label_fraction, median(accs),
                              median(f1s), static_cast<int>(cfg.seeds.size())};
  };

  const int threads = std::max(1, cfg.max_threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < specs.size();
           i += static_cast<std::size_t>(threads))
        run_cell(i);
    });
    for (auto& th : pool) th.join();
  }
  return cells;
}

/// Results table: strategy,label_fraction,acc,f1_macro,seed_count
inline void write_comparison_csv(const std::string& path,
                                 const std::vector<ComparisonCell>& cells) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write results file " + path);
  out << "strategy,label_fraction,acc,f1_macro,seed_count\n";
  for (const auto& c : cells) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%d\n",
                  c.strategy.c_str(), c.label_fraction, c.acc, c.f1_macro,
                  c.seed_count);
    out << buf;
  }
}

inline int env_thread_cap() {
  const char* env = std::getenv("BOLT_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v >= 1 ? v : 1;
}

}  // namespace bolt::eval
