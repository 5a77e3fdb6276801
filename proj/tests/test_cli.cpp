// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line surface. Each test drives the real
// binary (BOLT_CLI_PATH) inside a scratch directory.

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bolt/bolt.hpp"

using namespace bolt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string path(const std::string& rel) const {
    return (dir / rel).string();
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BOLT_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli_capture(const std::string& args, const std::string& out_file) {
  return run_cli(args + " > " + out_file + " 2>&1");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_tiny_config(const std::string& path, const std::string& extra = "") {
  std::ofstream out(path);
  out << "[data]\n"
         "classes = 2\n"
         "per_class = 20\n"
         "height = 8\n"
         "width = 8\n"
         "channels = 3\n"
         "noise_std = 0.1\n"
         "seed = 3\n"
         "[model]\n"
         "depth = 1\n"
         "heads = 2\n"
         "dim = 16\n"
         "patch = 4\n"
         "proj_hidden = 16\n"
         "proj_dim = 8\n"
         "[perturb]\n"
         "window = 2\n"
         "[train]\n"
         "steps = 10\n"
         "batch = 2\n"
      << extra;
}

}  // namespace

TEST_CASE("gen-data writes a loadable folder and manifest", "[cli][heavy]") {
  Scratch scratch("bolt_cli_gendata");
  write_tiny_config(scratch.path("cfg.toml"));
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                              " gen-data --out " + scratch.path("data"),
                          scratch.path("log.txt")) == 0);
  const auto ds = data::load_image_folder(scratch.path("data"), 8, 8, 3);
  REQUIRE(ds.size() == 40);
  REQUIRE(ds.num_classes == 2);
  const std::string manifest = slurp(scratch.path("data/manifest.csv"));
  REQUIRE(manifest.rfind("id,label,split", 0) == 0);
}

TEST_CASE("pretrain writes metrics and checkpoints, bitwise reproducibly",
          "[cli][heavy]") {
  Scratch scratch("bolt_cli_pretrain");
  write_tiny_config(scratch.path("cfg.toml"),
                    "[io]\nmetrics_path = \"" + scratch.path("m1.csv") +
                        "\"\ncheckpoint_dir = \"" + scratch.path("ck1") +
                        "\"\n");
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") + " pretrain",
                          scratch.path("log1.txt")) == 0);
  REQUIRE(fs::exists(scratch.path("ck1/final.ckpt")));
  const std::string m1 = slurp(scratch.path("m1.csv"));
  // header + 10 steps
  REQUIRE(std::count(m1.begin(), m1.end(), '\n') == 11);

  write_tiny_config(scratch.path("cfg2.toml"),
                    "[io]\nmetrics_path = \"" + scratch.path("m2.csv") +
                        "\"\ncheckpoint_dir = \"" + scratch.path("ck2") +
                        "\"\n");
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg2.toml") +
                              " pretrain",
                          scratch.path("log2.txt")) == 0);
  const std::string m2 = slurp(scratch.path("m2.csv"));
  REQUIRE(m1 == m2);  // bitwise-identical metrics for identical config/seed
}

TEST_CASE("alpha zero excludes the difficulty term from the total",
          "[cli][heavy]") {
  Scratch scratch("bolt_cli_alpha0");
  write_tiny_config(scratch.path("cfg.toml"),
                    "[io]\nmetrics_path = \"" + scratch.path("m.csv") +
                        "\"\ncheckpoint_dir = \"" + scratch.path("ck") +
                        "\"\n");
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                              " --alpha 0 pretrain",
                          scratch.path("log.txt")) == 0);
  std::ifstream in(scratch.path("m.csv"));
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "step,loss_total,loss_bolt,loss_diff,diff_acc,repr_std");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ss(line);
    std::string field;
    std::vector<double> vals;
    std::getline(ss, field, ',');  // step
    while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
    // loss_diff is present and nonzero, but excluded from loss_total
    REQUIRE(vals[2] > 0.0);
    REQUIRE(vals[0] == Catch::Approx(vals[1]).margin(1e-9));
  }
  REQUIRE(rows == 10);
}

TEST_CASE("probe runs from scratch without a checkpoint", "[cli][heavy]") {
  Scratch scratch("bolt_cli_probe");
  write_tiny_config(scratch.path("cfg.toml"),
                    "probe_epochs = 50\n");
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                              " probe --init scratch --out " +
                              scratch.path("probe.csv"),
                          scratch.path("log.txt")) == 0);
  const std::string csv = slurp(scratch.path("probe.csv"));
  REQUIRE(csv.rfind("strategy,label_fraction,acc,f1_macro,seed_count", 0) ==
          0);
}

TEST_CASE("finetune then eval: printed metrics match the CSV exactly",
          "[cli][heavy]") {
  Scratch scratch("bolt_cli_eval");
  write_tiny_config(scratch.path("cfg.toml"), "finetune_epochs = 1\n");
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                              " finetune --init scratch --out " +
                              scratch.path("ft.csv") + " --model-out " +
                              scratch.path("model.ckpt"),
                          scratch.path("log1.txt")) == 0);
  REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                              " eval --checkpoint " +
                              scratch.path("model.ckpt") + " --out " +
                              scratch.path("eval.csv"),
                          scratch.path("log2.txt")) == 0);

  // the eval output repeats the finetune-time test metrics
  const std::string ft_csv = slurp(scratch.path("ft.csv"));
  const std::string ev_csv = slurp(scratch.path("eval.csv"));
  const auto metrics_of = [](const std::string& csv) {
    std::istringstream ss(csv);
    std::string line;
    std::getline(ss, line);  // header
    std::getline(ss, line);
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');  // strategy
    std::getline(row, field, ',');  // fraction
    std::string acc, f1;
    std::getline(row, acc, ',');
    std::getline(row, f1, ',');
    return std::make_pair(acc, f1);
  };
  REQUIRE(metrics_of(ft_csv) == metrics_of(ev_csv));

  // and the printed table carries the same numbers
  const std::string printed = slurp(scratch.path("log2.txt"));
  const auto [acc, f1] = metrics_of(ev_csv);
  REQUIRE(printed.find(acc) != std::string::npos);
  REQUIRE(printed.find(f1) != std::string::npos);
}

TEST_CASE("compare emits one row per strategy-fraction cell", "[cli][heavy]") {
  Scratch scratch("bolt_cli_compare");
  write_tiny_config(scratch.path("cfg.toml"), "finetune_epochs = 1\n");
  REQUIRE(run_cli_capture(
              "--config " + scratch.path("cfg.toml") +
                  " compare --strategies scratch --fractions 1.0,0.5,0.1"
                  " --seeds 1,2 --out " + scratch.path("table.csv"),
              scratch.path("log.txt")) == 0);
  std::ifstream in(scratch.path("table.csv"));
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "strategy,label_fraction,acc,f1_macro,seed_count");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 3);
}

TEST_CASE("inspect-perturb reports shapes, score and label", "[cli][heavy]") {
  Scratch scratch("bolt_cli_inspect");

  SECTION("identity mode has difficulty score zero") {
    std::ofstream out(scratch.path("cfg.toml"));
    out << "[data]\nclasses = 2\nper_class = 2\nheight = 8\nwidth = 8\n"
           "seed = 3\n[model]\ndepth = 1\nheads = 2\ndim = 16\npatch = 4\n"
           "[perturb]\nidentity_mode = true\n";
    out.close();
    REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                                " inspect-perturb --synthetic --out " +
                                scratch.path("report.json"),
                            scratch.path("log.txt")) == 0);
    const json report = json::parse(slurp(scratch.path("report.json")));
    REQUIRE(report["view_a"]["difficulty_score"].get<double>() == 0.0);
    REQUIRE(report["view_b"]["difficulty_score"].get<double>() == 0.0);
    REQUIRE(report["difficulty_label"].get<int>() == 1);  // tie
  }

  SECTION("shapes satisfy K*S = N and the score can be recomputed") {
    write_tiny_config(scratch.path("cfg.toml"));
    REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                                " inspect-perturb --synthetic --perturb-seed 7"
                                " --out " + scratch.path("report.json"),
                            scratch.path("log.txt")) == 0);
    const json report = json::parse(slurp(scratch.path("report.json")));
    const int n = report["config"]["tokens"].get<int>();
    const int k = report["config"]["num_windows"].get<int>();
    const int s = report["config"]["stride"].get<int>();
    REQUIRE(k * s == n);
    for (const auto& stage : report["stages"]) {
      REQUIRE(stage["rows"].get<int>() >= 1);
      REQUIRE(stage["cols"].get<int>() >= 1);
    }

    // independent recomputation of view_a's difficulty score from the
    // serialized permutation and the config seeds
    const auto cfg = parse_config(scratch.path("cfg.toml"));
    auto spec = cfg.synthetic_spec();
    spec.per_class = 1;
    const auto sample = data::generate_synthetic(spec).samples.front();
    const auto mc = cfg.model_config();
    Rng init_rng(cfg.init_seed);
    const auto embed_params = init_embed<float>(mc.patch, init_rng);
    const auto fuse_params =
        init_fuse<float>(mc.perturb(), mc.patch.dim, init_rng);
    const auto tokens =
        embed(patchify<float>(sample, mc.patch), embed_params.proj);
    Permutation perm;
    for (const auto& v : report["view_a"]["permutation"])
      perm.map.push_back(v.get<int>());
    PerturbedView<float> view;
    view.perm = perm;
    view.tokens = perturb_forward(tokens, perm, mc.perturb(), fuse_params);
    const double recomputed =
        static_cast<double>(mse(inverse_permute(view), tokens));
    const double reported =
        report["view_a"]["difficulty_score"].get<double>();
    REQUIRE(reported == Catch::Approx(recomputed).epsilon(1e-5));
  }
}

TEST_CASE("exit codes distinguish config and numeric failures",
          "[cli][heavy]") {
  Scratch scratch("bolt_cli_exits");

  SECTION("usage error is exit 1") {
    std::ofstream out(scratch.path("bad.toml"));
    out << "[model]\npatch = 7\n";
    out.close();
    REQUIRE(run_cli_capture("--config " + scratch.path("bad.toml") +
                                " pretrain",
                            scratch.path("log.txt")) == 1);
  }

  SECTION("missing checkpoint is exit 1") {
    write_tiny_config(scratch.path("cfg.toml"));
    REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                                " probe --init checkpoint --checkpoint " +
                                scratch.path("nope.ckpt"),
                            scratch.path("log.txt")) == 1);
  }

  SECTION("numeric blowup is exit 2") {
    write_tiny_config(scratch.path("cfg.toml"),
                      "lr = 1e30\n[io]\nmetrics_path = \"" +
                          scratch.path("m.csv") + "\"\ncheckpoint_dir = \"" +
                          scratch.path("ck") + "\"\n");
    REQUIRE(run_cli_capture("--config " + scratch.path("cfg.toml") +
                                " pretrain",
                            scratch.path("log.txt")) == 2);
  }
}
