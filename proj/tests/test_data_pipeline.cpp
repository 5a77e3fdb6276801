// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "bolt/core/matrix.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/data/folder.hpp"
#include "bolt/data/image_io.hpp"

using namespace bolt;
using namespace bolt::data;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 3;
  s.per_class = 200;
  s.height = 32;
  s.width = 32;
  s.channels = 3;
  s.seed = 7;
  s.noise_std = 0.0;
  return s;
}

std::vector<int> class_counts(const LabeledDataset& ds) {
  std::vector<int> counts(ds.num_classes, 0);
  for (const auto& s : ds.samples) counts[s.label]++;
  return counts;
}

bool bitwise_equal(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.samples[i].id != b.samples[i].id) return false;
    if (a.samples[i].label != b.samples[i].label) return false;
    if (a.samples[i].pixels != b.samples[i].pixels) return false;
  }
  return true;
}

// Independent probe oracle: ridge least squares on raw pixels against
// one-hot targets, solved in sample space (kernel form), argmax decision.
double raw_pixel_lstsq_accuracy(const LabeledDataset& train,
                                const LabeledDataset& test) {
  const Index n = static_cast<Index>(train.size());
  const Index d = static_cast<Index>(train.samples[0].pixels.size());
  Mat<double> x(n, d), y = Mat<double>::Zero(n, train.num_classes);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j)
      x(i, j) = train.samples[i].pixels[static_cast<std::size_t>(j)];
    y(i, train.samples[i].label) = 1.0;
  }
  const double lambda = 1e-3;
  Mat<double> gram = x * x.transpose();
  gram += lambda * Mat<double>::Identity(n, n);
  // W = X^T (XX^T + lambda I)^{-1} Y, evaluated lazily via alpha.
  Mat<double> alpha = gram.ldlt().solve(y);
  int correct = 0;
  for (const auto& s : test.samples) {
    Mat<double> q(1, d);
    for (Index j = 0; j < d; ++j)
      q(0, j) = s.pixels[static_cast<std::size_t>(j)];
    Mat<double> scores = (q * x.transpose()) * alpha;
    Index best = 0;
    scores.row(0).maxCoeff(&best);
    if (static_cast<int>(best) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST_CASE("synthetic generator: counts and labels", "[data]") {
  const auto ds = generate_synthetic(small_spec());
  REQUIRE(ds.size() == 600);
  REQUIRE(ds.num_classes == 3);
  const auto counts = class_counts(ds);
  REQUIRE(counts == std::vector<int>{200, 200, 200});
  std::set<std::string> ids;
  for (const auto& s : ds.samples) {
    ids.insert(s.id);
    REQUIRE(s.label >= 0);
    REQUIRE(s.label < 3);
    for (float v : s.pixels) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }
  REQUIRE(ids.size() == ds.size());  // unique sample ids
}

TEST_CASE("synthetic generator: determinism", "[data]") {
  auto spec = small_spec();
  SECTION("noise free") {
    REQUIRE(bitwise_equal(generate_synthetic(spec), generate_synthetic(spec)));
  }
  SECTION("with noise") {
    spec.noise_std = 0.1;
    REQUIRE(bitwise_equal(generate_synthetic(spec), generate_synthetic(spec)));
  }
  SECTION("different seeds differ") {
    auto other = spec;
    other.seed = 8;
    REQUIRE_FALSE(
        bitwise_equal(generate_synthetic(spec), generate_synthetic(other)));
  }
}

TEST_CASE("synthetic generator: linear separability oracle", "[data]") {
  // blob vs stripe at noise 0.05 must be clearly separable from raw pixels.
  SyntheticSpec train_spec;
  train_spec.num_classes = 2;
  train_spec.per_class = 100;
  train_spec.noise_std = 0.05;
  train_spec.seed = 21;
  auto test_spec = train_spec;
  test_spec.per_class = 60;
  test_spec.seed = 22;
  const double acc = raw_pixel_lstsq_accuracy(generate_synthetic(train_spec),
                                              generate_synthetic(test_spec));
  INFO("raw-pixel least-squares accuracy: " << acc);
  REQUIRE(acc >= 0.95);
}

TEST_CASE("split_dataset: stratified 70/10/20", "[data]") {
  const auto ds = generate_synthetic(small_spec());
  const auto splits = split_dataset(ds, {0.7, 0.1, 0.2}, 11);
  REQUIRE(splits.train.size() == 420);
  REQUIRE(splits.val.size() == 60);
  REQUIRE(splits.test.size() == 120);
  REQUIRE(class_counts(splits.train) == std::vector<int>{140, 140, 140});
  REQUIRE(class_counts(splits.val) == std::vector<int>{20, 20, 20});
  REQUIRE(class_counts(splits.test) == std::vector<int>{40, 40, 40});

  // disjoint and exhaustive
  std::set<std::string> seen;
  for (const auto* part : {&splits.train, &splits.val, &splits.test})
    for (const auto& s : part->samples) REQUIRE(seen.insert(s.id).second);
  REQUIRE(seen.size() == ds.size());
}

TEST_CASE("split_dataset: determinism and errors", "[data]") {
  const auto ds = generate_synthetic(small_spec());
  const auto a = split_dataset(ds, {0.7, 0.1, 0.2}, 11);
  const auto b = split_dataset(ds, {0.7, 0.1, 0.2}, 11);
  REQUIRE(bitwise_equal(a.train, b.train));
  REQUIRE(bitwise_equal(a.val, b.val));
  REQUIRE(bitwise_equal(a.test, b.test));
  const auto c = split_dataset(ds, {0.7, 0.1, 0.2}, 12);
  REQUIRE_FALSE(bitwise_equal(a.train, c.train));

  REQUIRE_THROWS_WITH(split_dataset(ds, {0.5, 0.5, 0.5}, 1),
                      Catch::Matchers::ContainsSubstring("sum to 1"));

  auto tiny = small_spec();
  tiny.per_class = 2;  // fewer samples than partitions
  REQUIRE_THROWS_AS(
      split_dataset(generate_synthetic(tiny), {0.7, 0.1, 0.2}, 1),
      ConfigError);
}

TEST_CASE("balance_classes quota semantics", "[data]") {
  // classes sized {800, 700, 300} with a quota of 628
  SyntheticSpec spec = small_spec();
  spec.per_class = 1;
  LabeledDataset ds = generate_synthetic(spec);
  ds.samples.clear();
  const std::vector<int> sizes = {800, 700, 300};
  for (int cls = 0; cls < 3; ++cls)
    for (int i = 0; i < sizes[cls]; ++i) {
      ImageSample s;
      s.label = cls;
      s.id = "s" + std::to_string(cls) + "_" + std::to_string(i);
      s.pixels.assign(32 * 32 * 3, 0.0f);
      ds.samples.push_back(std::move(s));
    }

  const auto balanced = balance_classes(ds, 628, 3);
  REQUIRE(class_counts(balanced) == std::vector<int>{628, 628, 300});

  const auto all = balance_classes(ds, 1000, 3);
  REQUIRE(class_counts(all) == std::vector<int>{800, 700, 300});

  const auto ones = balance_classes(ds, 1, 3);
  REQUIRE(class_counts(ones) == std::vector<int>{1, 1, 1});

  REQUIRE(bitwise_equal(balance_classes(ds, 628, 3),
                        balance_classes(ds, 628, 3)));
}

TEST_CASE("subsample_fraction stratified rounding", "[data]") {
  const auto ds = generate_synthetic(small_spec());
  const auto train = split_dataset(ds, {0.7, 0.1, 0.2}, 11).train;  // 3 x 140

  const auto half = subsample_fraction(train, 0.5, 5);
  REQUIRE(half.size() == 210);
  REQUIRE(class_counts(half) == std::vector<int>{70, 70, 70});

  const auto tenth = subsample_fraction(train, 0.1, 5);
  REQUIRE(tenth.size() == 42);
  REQUIRE(class_counts(tenth) == std::vector<int>{14, 14, 14});

  const auto full = subsample_fraction(train, 1.0, 5);
  REQUIRE(class_counts(full) == class_counts(train));

  REQUIRE(bitwise_equal(subsample_fraction(train, 0.5, 5),
                        subsample_fraction(train, 0.5, 5)));
  REQUIRE_THROWS_AS(subsample_fraction(train, 0.0, 5), ConfigError);
  REQUIRE_THROWS_AS(subsample_fraction(train, 1.5, 5), ConfigError);
}

TEST_CASE("stratified counts hold for arbitrary fractions", "[data]") {
  auto spec = small_spec();
  spec.per_class = 37;
  const auto ds = generate_synthetic(spec);
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const double f = rng.uniform(0.05, 1.0);
    const auto sub = subsample_fraction(ds, f, rng.u64());
    const int expected = static_cast<int>(std::llround(f * 37.0));
    REQUIRE(class_counts(sub) ==
            std::vector<int>{expected, expected, expected});
  }
}

TEST_CASE("manifest export", "[data]") {
  auto spec = small_spec();
  spec.per_class = 4;
  const auto ds = generate_synthetic(spec);
  const auto splits = split_dataset(ds, {0.5, 0.25, 0.25}, 1);
  const auto path = fs::temp_directory_path() / "bolt_manifest_test.csv";
  write_manifest(path.string(), {{"train", &splits.train},
                                 {"val", &splits.val},
                                 {"test", &splits.test}});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "id,label,split");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 12);
  fs::remove(path);
}

TEST_CASE("image folder loader", "[data]") {
  const auto root = fs::temp_directory_path() / "bolt_folder_test";
  fs::remove_all(root);
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");

  RawImage img;
  img.height = 8;
  img.width = 8;
  img.channels = 3;
  img.pixels.assign(8 * 8 * 3, 0.25f);
  for (int i = 0; i < 3; ++i)
    write_pnm((root / "a" / ("img" + std::to_string(i) + ".ppm")).string(),
              img);
  img.channels = 1;
  img.pixels.assign(8 * 8, 0.5f);
  for (int i = 0; i < 2; ++i)
    write_pnm((root / "b" / ("img" + std::to_string(i) + ".pgm")).string(),
              img);

  SECTION("labels follow lexicographic directory order") {
    const auto ds = load_image_folder(root.string(), 8, 8, 3);
    REQUIRE(ds.size() == 5);
    REQUIRE(ds.num_classes == 2);
    const auto counts = class_counts(ds);
    REQUIRE(counts == std::vector<int>{3, 2});
    // grayscale replicated across channels
    const auto& gray = ds.samples.back();
    REQUIRE(gray.label == 1);
    REQUIRE(gray.pixels[0] == gray.pixels[1]);
    REQUIRE(gray.pixels[1] == gray.pixels[2]);
  }

  SECTION("corrupt file is named") {
    std::ofstream bad(root / "a" / "broken.ppm");
    bad << "P6\n8 8\n255\nshort";
    bad.close();
    REQUIRE_THROWS_WITH(load_image_folder(root.string(), 8, 8, 3),
                        Catch::Matchers::ContainsSubstring("broken.ppm"));
    fs::remove(root / "a" / "broken.ppm");
  }

  SECTION("empty class directory") {
    fs::create_directories(root / "c");
    REQUIRE_THROWS_WITH(load_image_folder(root.string(), 8, 8, 3),
                        Catch::Matchers::ContainsSubstring("empty class"));
    fs::remove_all(root / "c");
  }

  SECTION("no class directories") {
    const auto empty_root = fs::temp_directory_path() / "bolt_empty_folder";
    fs::remove_all(empty_root);
    fs::create_directories(empty_root);
    REQUIRE_THROWS_WITH(
        load_image_folder(empty_root.string(), 8, 8, 3),
        Catch::Matchers::ContainsSubstring("no class directories"));
    fs::remove_all(empty_root);
  }

  fs::remove_all(root);
}

TEST_CASE("pnm io round trip", "[data]") {
  RawImage img;
  img.height = 4;
  img.width = 5;
  img.channels = 3;
  Rng rng(3);
  img.pixels.resize(4 * 5 * 3);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform01());
  const auto path = fs::temp_directory_path() / "bolt_io_test.ppm";
  write_pnm(path.string(), img);
  const auto back = read_pnm(path.string());
  REQUIRE(back.height == 4);
  REQUIRE(back.width == 5);
  REQUIRE(back.channels == 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    REQUIRE(std::abs(back.pixels[i] - img.pixels[i]) <= 0.5f / 255.0f + 1e-6f);
  fs::remove(path);
}
