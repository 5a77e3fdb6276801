// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "bolt/checkpoint.hpp"
#include "bolt/trainer.hpp"

using namespace bolt;
namespace fs = std::filesystem;

namespace {

ModelConfig ckpt_model() {
  ModelConfig mc;
  mc.patch = PatchEmbedConfig{8, 8, 3, 4, 16};
  mc.depth = 2;
  mc.heads = 2;
  mc.mlp_ratio = 2.0;
  mc.proj_hidden = 16;
  mc.proj_dim = 8;
  mc.window_len = 2;
  return mc;
}

data::LabeledDataset ckpt_data() {
  data::SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 3;
  spec.height = 8;
  spec.width = 8;
  spec.channels = 3;
  spec.seed = 5;
  spec.noise_std = 0.05;
  return data::generate_synthetic(spec);
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("checkpoint round trip restores everything bitwise",
          "[checkpoint]") {
  const auto mc = ckpt_model();
  auto online = init_online<float>(mc, 7);
  TrainConfig<float> tc;
  tc.batch = 2;
  Trainer<float> trainer(std::move(online), tc, ckpt_data());
  trainer.step();
  trainer.step();

  const std::string path = temp_path("bolt_ckpt_roundtrip.ckpt");
  save_checkpoint(path, trainer.online(), trainer.target(),
                  trainer.optimizer(), 2);

  auto restored_online = init_online<float>(mc, 999);  // different init
  auto restored_target = make_target(restored_online);
  AdamW<float> restored_opt;
  const auto step = load_checkpoint(path, restored_online, restored_target,
                                    &restored_opt);
  REQUIRE(step == 2);
  REQUIRE(restored_opt.t == trainer.optimizer().t);

  auto a = named_tensors(trainer.online());
  auto b = named_tensors(restored_online);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(*a[i].mat == *b[i].mat);

  // forward on a fixed input is bitwise identical
  const Mat<float> patches =
      patchify<float>(ckpt_data().samples[0], mc.patch);
  BackboneCache<float> c1, c2;
  const auto r1 = backbone_rep(patches, trainer.online(), c1);
  const auto r2 = backbone_rep(patches, restored_online, c2);
  REQUIRE(r1 == r2);
  fs::remove(path);
}

TEST_CASE("corrupted checkpoints are detected", "[checkpoint]") {
  const auto mc = ckpt_model();
  auto online = init_online<float>(mc, 8);
  auto target = make_target(online);
  AdamW<float> opt;
  const std::string path = temp_path("bolt_ckpt_corrupt.ckpt");
  save_checkpoint(path, online, target, opt, 1);

  SECTION("flipped payload byte fails the checksum") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(0, std::ios::end);
    const auto size = static_cast<long>(f.tellg());
    f.seekp(size - 100);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(size - 100);
    byte = static_cast<char>(byte ^ 0x40);
    f.write(&byte, 1);
    f.close();
    REQUIRE_THROWS_WITH(read_checkpoint(path),
                        Catch::Matchers::ContainsSubstring("checksum"));
  }

  SECTION("truncated file is a distinct error, not a crash") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    REQUIRE_THROWS_WITH(read_checkpoint(path),
                        Catch::Matchers::ContainsSubstring("truncated"));
  }

  SECTION("bad magic") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOPEateau";
    out.close();
    REQUIRE_THROWS_WITH(read_checkpoint(path),
                        Catch::Matchers::ContainsSubstring("magic"));
  }

  SECTION("version mismatch") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t bogus = 99;
    f.write(reinterpret_cast<const char*>(&bogus), 4);
    f.close();
    REQUIRE_THROWS_WITH(read_checkpoint(path),
                        Catch::Matchers::ContainsSubstring("version"));
  }
  fs::remove(path);
}

TEST_CASE("architecture mismatch names the offending tensor", "[checkpoint]") {
  const auto mc = ckpt_model();
  auto online = init_online<float>(mc, 9);
  auto target = make_target(online);
  AdamW<float> opt;
  const std::string path = temp_path("bolt_ckpt_mismatch.ckpt");
  save_checkpoint(path, online, target, opt, 1);

  SECTION("different width") {
    auto wide = mc;
    wide.patch.dim = 32;
    auto other = init_online<float>(wide, 9);
    auto other_target = make_target(other);
    REQUIRE_THROWS_WITH(load_checkpoint(path, other, other_target),
                        Catch::Matchers::ContainsSubstring("embed.proj"));
  }

  SECTION("different depth") {
    auto deep = mc;
    deep.depth = 3;
    auto other = init_online<float>(deep, 9);
    auto other_target = make_target(other);
    REQUIRE_THROWS_WITH(load_checkpoint(path, other, other_target),
                        Catch::Matchers::ContainsSubstring("enc.b2"));
  }
  fs::remove(path);
}
