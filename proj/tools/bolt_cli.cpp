// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface for the BOLT pretraining pipeline:
//   gen-data | pretrain | finetune | probe | eval | compare | inspect-perturb
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bolt/bolt.hpp"
#include "bolt/perturb_json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::optional<double> alpha;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
};

bolt::RunConfig load_config(const CommonArgs& args) {
  bolt::RunConfig cfg =
      args.config_path.empty() ? bolt::RunConfig{}
                               : bolt::parse_config(args.config_path);
  // CLI flags override file values which override defaults.
  if (args.alpha) cfg.alpha = *args.alpha;
  if (args.steps) cfg.steps = *args.steps;
  if (args.seed) {
    cfg.data_seed = *args.seed;
    cfg.init_seed = bolt::seed_mix(*args.seed, "init");
    cfg.perturb_seed = bolt::seed_mix(*args.seed, "perturb");
    cfg.order_seed = bolt::seed_mix(*args.seed, "order");
    cfg.split_seed = bolt::seed_mix(*args.seed, "split");
  }
  cfg.validate();
  return cfg;
}

bolt::data::LabeledDataset build_dataset(const bolt::RunConfig& cfg) {
  if (cfg.data_kind == "synthetic")
    return bolt::data::generate_synthetic(cfg.synthetic_spec());
  return bolt::data::load_image_folder(cfg.data_path, cfg.height, cfg.width,
                                       cfg.channels);
}

bolt::data::DatasetSplits build_splits(const bolt::RunConfig& cfg) {
  return bolt::data::split_dataset(build_dataset(cfg), cfg.ratios,
                                   cfg.split_seed);
}

bolt::eval::ClassifierModel<float> build_classifier(
    const bolt::RunConfig& cfg, const std::string& init,
    const std::string& checkpoint, int num_classes) {
  const bolt::ModelConfig mc = cfg.model_config();
  if (init == "scratch")
    return bolt::eval::ClassifierModel<float>::scratch(mc, num_classes,
                                                       cfg.init_seed);
  if (init != "checkpoint")
    throw bolt::ConfigError("--init must be 'scratch' or 'checkpoint'");
  if (checkpoint.empty())
    throw bolt::ConfigError("--checkpoint is required with --init checkpoint");
  bolt::OnlineBranch<float> online =
      bolt::init_online<float>(mc, cfg.init_seed);
  bolt::load_online_branch(checkpoint, online);
  bolt::Rng head_rng(bolt::seed_mix(cfg.init_seed, "head"));
  return bolt::eval::ClassifierModel<float>::from_backbone(
      mc, online.embed, online.encoder, num_classes, head_rng);
}

void print_and_write_results(const std::string& out_path,
                             const std::vector<bolt::eval::ComparisonCell>&
                                 cells) {
  if (!out_path.empty()) bolt::eval::write_comparison_csv(out_path, cells);
  std::printf("%-14s %-10s %-10s %-10s %s\n", "strategy", "fraction", "acc",
              "f1_macro", "seeds");
  for (const auto& c : cells)
    std::printf("%-14s %-10.4g %-10.9g %-10.9g %d\n", c.strategy.c_str(),
                c.label_fraction, c.acc, c.f1_macro, c.seed_count);
}

int cmd_gen_data(const CommonArgs& common, const std::string& out_dir) {
  const bolt::RunConfig cfg = load_config(common);
  if (cfg.data_kind != "synthetic")
    throw bolt::ConfigError("gen-data needs data.kind = 'synthetic'");
  const auto ds = bolt::data::generate_synthetic(cfg.synthetic_spec());
  const auto splits = bolt::data::split_dataset(ds, cfg.ratios,
                                                cfg.split_seed);
  fs::create_directories(out_dir);
  char class_dir[32];
  for (int c = 0; c < ds.num_classes; ++c) {
    std::snprintf(class_dir, sizeof(class_dir), "class_%03d", c);
    fs::create_directories(fs::path(out_dir) / class_dir);
  }
  for (const auto& s : ds.samples) {
    std::snprintf(class_dir, sizeof(class_dir), "class_%03d", s.label);
    bolt::data::RawImage img{cfg.height, cfg.width, cfg.channels, s.pixels};
    const std::string ext = cfg.channels == 3 ? ".ppm" : ".pgm";
    bolt::data::write_pnm(
        (fs::path(out_dir) / class_dir / (s.id + ext)).string(), img);
  }
  bolt::data::write_manifest(
      (fs::path(out_dir) / "manifest.csv").string(),
      {{"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}});
  std::cout << "wrote " << ds.size() << " images to " << out_dir << "\n";
  return 0;
}

int cmd_pretrain(const CommonArgs& common, const std::string& out_dir) {
  bolt::RunConfig cfg = load_config(common);
  if (!out_dir.empty()) cfg.checkpoint_dir = out_dir;
  const auto splits = build_splits(cfg);
  const bolt::data::LabeledDataset& train_set =
      cfg.pretrain_split == "all" ? build_dataset(cfg) : splits.train;

  auto online = bolt::init_online<float>(cfg.model_config(), cfg.init_seed);
  bolt::Trainer<float> trainer(std::move(online), cfg.train_config<float>(),
                               train_set);
  fs::create_directories(cfg.checkpoint_dir);
  bolt::MetricsWriter metrics(cfg.metrics_path);
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const bolt::TrainReport report = trainer.step();
    metrics.append(report);
    if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
      const std::string path =
          (fs::path(cfg.checkpoint_dir) / ("step_" + std::to_string(step) +
                                           ".ckpt")).string();
      bolt::save_checkpoint(path, trainer.online(), trainer.target(),
                            trainer.optimizer(),
                            static_cast<std::uint64_t>(step));
    }
  }
  const std::string final_path =
      (fs::path(cfg.checkpoint_dir) / "final.ckpt").string();
  bolt::save_checkpoint(final_path, trainer.online(), trainer.target(),
                        trainer.optimizer(),
                        static_cast<std::uint64_t>(cfg.steps));
  std::cout << "pretrained " << cfg.steps << " steps; checkpoint "
            << final_path << "; metrics " << cfg.metrics_path << "\n";
  return 0;
}

int cmd_probe(const CommonArgs& common, const std::string& init,
              const std::string& checkpoint, const std::string& out_path) {
  const bolt::RunConfig cfg = load_config(common);
  const auto splits = build_splits(cfg);
  const auto model =
      build_classifier(cfg, init, checkpoint, splits.train.num_classes);
  bolt::eval::ProbeConfig pc{cfg.probe_epochs, cfg.probe_lr};
  const auto result = bolt::eval::linear_probe(model, splits.train,
                                               splits.test, cfg.probe_seed,
                                               pc);
  const std::string name = init == "scratch" ? "scratch" : "pretrained";
  print_and_write_results(
      out_path, {{name, 1.0, result.acc, result.f1_macro, 1}});
  return 0;
}

int cmd_finetune(const CommonArgs& common, const std::string& init,
                 const std::string& checkpoint, double fraction,
                 const std::string& out_path, const std::string& model_out) {
  const bolt::RunConfig cfg = load_config(common);
  const auto splits = build_splits(cfg);
  auto model =
      build_classifier(cfg, init, checkpoint, splits.train.num_classes);
  const auto train_set =
      fraction < 1.0 ? bolt::data::subsample_fraction(splits.train, fraction,
                                                      cfg.split_seed)
                     : splits.train;
  bolt::eval::FinetuneConfig fc;
  fc.epochs = cfg.finetune_epochs;
  fc.batch = cfg.finetune_batch;
  fc.lr = cfg.finetune_lr;
  fc.order_seed = cfg.order_seed;
  model = bolt::eval::finetune(std::move(model), train_set, splits.val, fc);
  const auto result = bolt::eval::evaluate(model, splits.test);
  if (!model_out.empty()) {
    std::vector<std::pair<std::string, const bolt::Mat<float>*>> entries;
    for (const auto& t : bolt::eval::named_tensors(model))
      entries.emplace_back("model." + t.name, t.mat);
    bolt::write_checkpoint(model_out, 0, 0, entries);
  }
  const std::string name = init == "scratch" ? "scratch" : "pretrained";
  print_and_write_results(
      out_path, {{name, fraction, result.acc, result.f1_macro, 1}});
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint,
             const std::string& out_path) {
  const bolt::RunConfig cfg = load_config(common);
  const auto splits = build_splits(cfg);
  auto model = bolt::eval::ClassifierModel<float>::scratch(
      cfg.model_config(), splits.test.num_classes, cfg.init_seed);
  const bolt::CheckpointFile file = bolt::read_checkpoint(checkpoint);
  auto registry = bolt::eval::named_tensors(model);
  bolt::restore_tensors(file, "model.", registry);
  const auto result = bolt::eval::evaluate(model, splits.test);
  print_and_write_results(out_path,
                          {{"eval", 1.0, result.acc, result.f1_macro, 1}});
  return 0;
}

int cmd_compare(const CommonArgs& common, const std::string& bolt_ckpt,
                const std::string& no_diff_ckpt,
                const std::string& strategies_csv,
                const std::string& fractions_csv,
                const std::string& seeds_csv, const std::string& out_path) {
  const bolt::RunConfig cfg = load_config(common);
  const auto splits = build_splits(cfg);

  std::vector<std::string> strategy_names;
  {
    std::istringstream ss(strategies_csv);
    std::string token;
    while (std::getline(ss, token, ',')) strategy_names.push_back(token);
  }
  std::vector<double> fractions;
  {
    std::istringstream ss(fractions_csv);
    std::string token;
    while (std::getline(ss, token, ',')) fractions.push_back(std::stod(token));
  }
  bolt::eval::ComparisonConfig cc;
  cc.model = cfg.model_config();
  cc.finetune.epochs = cfg.finetune_epochs;
  cc.finetune.batch = cfg.finetune_batch;
  cc.finetune.lr = cfg.finetune_lr;
  cc.bolt_checkpoint = bolt_ckpt;
  cc.bolt_no_diff_checkpoint = no_diff_ckpt;
  cc.max_threads = bolt::eval::env_thread_cap();
  cc.seeds.clear();
  {
    std::istringstream ss(seeds_csv);
    std::string token;
    while (std::getline(ss, token, ','))
      cc.seeds.push_back(std::stoull(token));
  }
  if (cc.seeds.empty()) throw bolt::ConfigError("--seeds must be non-empty");

  std::vector<bolt::eval::StrategySpec> specs;
  for (const auto& name : strategy_names)
    for (const double f : fractions)
      specs.push_back({name, bolt::eval::init_kind_from_string(name), f});
  const auto cells = bolt::eval::run_comparison(specs, splits, cc);
  print_and_write_results(out_path, cells);
  return 0;
}

int cmd_inspect_perturb(const CommonArgs& common, const std::string& image,
                        bool synthetic, std::uint64_t perturb_seed,
                        const std::string& out_path) {
  const bolt::RunConfig cfg = load_config(common);
  bolt::data::ImageSample sample;
  if (synthetic || image.empty()) {
    auto spec = cfg.synthetic_spec();
    spec.per_class = 1;
    sample = bolt::data::generate_synthetic(spec).samples.front();
  } else {
    const auto raw = bolt::data::read_pnm(image);
    const auto sized = bolt::data::convert_raster(raw, cfg.height, cfg.width,
                                                  cfg.channels);
    sample.pixels = sized.pixels;
    sample.id = image;
  }

  const bolt::ModelConfig mc = cfg.model_config();
  bolt::Rng init_rng(cfg.init_seed);
  const auto embed_params = bolt::init_embed<float>(mc.patch, init_rng);
  const auto fuse_params =
      mc.identity_perturb
          ? bolt::FuseParams<float>::identity(mc.perturb(), mc.patch.dim)
          : bolt::init_fuse<float>(mc.perturb(), mc.patch.dim, init_rng);
  const auto patches = bolt::patchify<float>(sample, mc.patch);
  const auto tokens = bolt::embed(patches, embed_params.proj);

  bolt::Rng rng(perturb_seed);
  const bolt::PerturbConfig pcfg = mc.perturb();
  const auto view_a = bolt::perturb_view(tokens, pcfg, fuse_params, rng);
  const auto view_b = bolt::perturb_view(tokens, pcfg, fuse_params, rng);

  const int n = pcfg.tokens(), d = mc.patch.dim;
  json report;
  report["config"] = {{"tokens", n},
                      {"dim", d},
                      {"window_len", pcfg.window_len},
                      {"stride", pcfg.stride},
                      {"num_windows", pcfg.num_windows},
                      {"identity_mode", mc.identity_perturb},
                      {"init_seed", cfg.init_seed},
                      {"perturb_seed", perturb_seed}};
  report["stages"] = json::array(
      {{{"name", "tokens"}, {"rows", n}, {"cols", d}},
       {{"name", "windows"},
        {"rows", pcfg.num_windows},
        {"cols", pcfg.window_len * d}},
       {{"name", "fused"},
        {"rows", pcfg.num_windows},
        {"cols", pcfg.stride * d}},
       {{"name", "split"}, {"rows", n}, {"cols", d}}});
  report["view_a"] = bolt::perturb_record_json(view_a, pcfg);
  report["view_b"] = bolt::perturb_record_json(view_b, pcfg);
  report["difficulty_label"] = bolt::difficulty_label(view_a, view_b);

  const std::string text = report.dump(2);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw bolt::IoError("cannot write report " + out_path);
    out << text << "\n";
  }
  std::cout << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOLT: token-perturbation self-supervised ViT pretraining"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "TOML-style config file");
  double alpha_flag = -1.0;
  auto* alpha_opt = app.add_option(
      "--alpha", alpha_flag, "override difficulty loss weight (train.alpha)");
  std::int64_t steps_flag = -1;
  auto* steps_opt =
      app.add_option("--steps", steps_flag, "override train.steps");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option(
      "--seed", seed_flag, "override base seed (derives all named seeds)");

  std::string out_dir = "data_out";
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--out", out_dir, "output folder");

  std::string pretrain_out;
  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  pre->add_option("--out", pretrain_out, "checkpoint directory override");

  std::string init = "scratch", ckpt, results_out, model_out;
  double fraction = 1.0;
  auto* probe = app.add_subcommand("probe", "linear probe on frozen encoder");
  probe->add_option("--init", init, "scratch | checkpoint");
  probe->add_option("--checkpoint", ckpt, "pretraining checkpoint");
  probe->add_option("--out", results_out, "results CSV path");

  auto* ft = app.add_subcommand("finetune", "supervised finetuning");
  ft->add_option("--init", init, "scratch | checkpoint");
  ft->add_option("--checkpoint", ckpt, "pretraining checkpoint");
  ft->add_option("--fraction", fraction, "label fraction of the train split");
  ft->add_option("--out", results_out, "results CSV path");
  ft->add_option("--model-out", model_out, "save the finetuned classifier");

  std::string eval_ckpt;
  auto* ev = app.add_subcommand("eval", "evaluate a finetuned classifier");
  ev->add_option("--checkpoint", eval_ckpt, "classifier checkpoint")
      ->required();
  ev->add_option("--out", results_out, "results CSV path");

  std::string bolt_ckpt, no_diff_ckpt, strategies = "scratch,bolt-no-diff,bolt";
  std::string fractions = "1.0,0.5,0.1", seeds = "1,2,3";
  auto* cmp = app.add_subcommand("compare", "strategy x fraction grid");
  cmp->add_option("--checkpoint", bolt_ckpt, "BOLT pretraining checkpoint");
  cmp->add_option("--no-diff-checkpoint", no_diff_ckpt,
                  "no-difficulty ablation checkpoint");
  cmp->add_option("--strategies", strategies, "comma-separated strategies");
  cmp->add_option("--fractions", fractions, "comma-separated label fractions");
  cmp->add_option("--seeds", seeds, "comma-separated seeds");
  cmp->add_option("--out", results_out, "results CSV path");

  std::string image_path;
  bool synthetic = false;
  std::uint64_t inspect_seed = 0;
  auto* insp =
      app.add_subcommand("inspect-perturb", "dump a perturbation record");
  insp->add_option("--image", image_path, "netpbm image to inspect");
  insp->add_flag("--synthetic", synthetic, "use a generated sample");
  insp->add_option("--perturb-seed", inspect_seed, "permutation seed");
  insp->add_option("--out", results_out, "JSON report path");

  CLI11_PARSE(app, argc, argv);
  if (*alpha_opt) common.alpha = alpha_flag;
  if (*steps_opt) common.steps = steps_flag;
  if (*seed_opt) common.seed = seed_flag;

  try {
    if (gen->parsed()) return cmd_gen_data(common, out_dir);
    if (pre->parsed()) return cmd_pretrain(common, pretrain_out);
    if (probe->parsed()) return cmd_probe(common, init, ckpt, results_out);
    if (ft->parsed())
      return cmd_finetune(common, init, ckpt, fraction, results_out,
                          model_out);
    if (ev->parsed()) return cmd_eval(common, eval_ckpt, results_out);
    if (cmp->parsed())
      return cmd_compare(common, bolt_ckpt, no_diff_ckpt, strategies,
                         fractions, seeds, results_out);
    if (insp->parsed())
      return cmd_inspect_perturb(common, image_path, synthetic, inspect_seed,
                                 results_out);
  } catch (const bolt::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const bolt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const bolt::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
