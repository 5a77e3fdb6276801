// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bolt/heads.hpp"
#include "bolt/losses.hpp"

using namespace bolt;

namespace {

template <class T>
Mat<T> row(std::initializer_list<T> values) {
  Mat<T> m(1, static_cast<Index>(values.size()));
  Index i = 0;
  for (T v : values) m(0, i++) = v;
  return m;
}

}  // namespace

TEST_CASE("similarity loss analytic values", "[losses]") {
  SECTION("equal nonzero vectors") {
    const auto v = row<double>({0.3, -1.2, 2.0});
    REQUIRE(similarity_loss(v, v) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("orthogonal unit vectors") {
    REQUIRE(similarity_loss(row<double>({1, 0}), row<double>({0, 1})) ==
            Catch::Approx(2.0).margin(1e-12));
  }
  SECTION("cosine arithmetic") {
    const double expected = 2.0 - 2.0 / std::sqrt(2.0);  // ~0.58579
    REQUIRE(similarity_loss(row<double>({1, 0}), row<double>({1, 1})) ==
            Catch::Approx(expected).margin(1e-9));
  }
  SECTION("range [0, 4]") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      Mat<double> a(1, 5), b(1, 5);
      for (Index j = 0; j < 5; ++j) {
        a(0, j) = rng.normal() * 3.0;
        b(0, j) = rng.normal() * 0.2;
      }
      const double loss = similarity_loss(a, b);
      REQUIRE(loss >= 0.0);
      REQUIRE(loss <= 4.0 + 1e-12);
    }
  }
  SECTION("zero norm is an error") {
    REQUIRE_THROWS_AS(
        similarity_loss(row<double>({0, 0}), row<double>({1, 0})),
        NumericError);
  }
  SECTION("unnormalized switch") {
    const auto a = row<double>({1, 2});
    const auto b = row<double>({0, 0.5});
    REQUIRE(similarity_loss(a, b, false) ==
            Catch::Approx(1.0 + 2.25).margin(1e-12));
  }
}

TEST_CASE("similarity loss gradient vs finite differences", "[losses]") {
  Rng rng(2);
  for (const bool normalize : {true, false}) {
    Mat<double> q(1, 6), t(1, 6);
    for (Index j = 0; j < 6; ++j) {
      q(0, j) = rng.normal() + 0.5;
      t(0, j) = rng.normal();
    }
    const Mat<double> grad = similarity_loss_grad(q, t, normalize);
    const double h = 1e-6;
    for (Index j = 0; j < 6; ++j) {
      Mat<double> up = q, down = q;
      up(0, j) += h;
      down(0, j) -= h;
      const double fd =
          (similarity_loss(up, t, normalize) -
           similarity_loss(down, t, normalize)) / (2.0 * h);
      REQUIRE(grad(0, j) == Catch::Approx(fd).margin(1e-6));
    }
  }
}

TEST_CASE("binary cross entropy values", "[losses]") {
  REQUIRE(binary_cross_entropy(0.5, 0) ==
          Catch::Approx(std::log(2.0)).margin(1e-9));
  REQUIRE(binary_cross_entropy(0.5, 1) ==
          Catch::Approx(std::log(2.0)).margin(1e-9));
  REQUIRE(binary_cross_entropy(0.999999999, 1) < 1e-6);
  REQUIRE(binary_cross_entropy(0.9, 0) ==
          Catch::Approx(-std::log(0.1)).margin(1e-9));
  // clamp keeps the loss finite at the extremes
  REQUIRE(std::isfinite(binary_cross_entropy(0.0, 1)));
  REQUIRE(std::isfinite(binary_cross_entropy(1.0, 0)));
}

TEST_CASE("total loss composition", "[losses]") {
  REQUIRE(total_loss(1.0, 0.5, 0.1) == Catch::Approx(1.05).margin(1e-12));
  REQUIRE(total_loss(0.7, 123.0, 0.0) == 0.7);  // the ablation path
  REQUIRE(total_loss(0.0, 3.0, 0.25) == Catch::Approx(0.75).margin(1e-12));
}

TEST_CASE("projection head forward", "[heads]") {
  SECTION("zero weights give zero output") {
    MlpHead<double> head;
    Rng rng(3);
    head.init(4, 8, 3, rng);
    head.in_layer.weight.setZero();
    head.in_layer.bias.setZero();
    head.out_layer.weight.setZero();
    head.out_layer.bias.setZero();
    const auto out = head.forward(row<double>({1, 2, 3, 4}));
    REQUIRE(out == Mat<double>::Zero(1, 3));
  }
  SECTION("output length is projDim") {
    MlpHead<double> head;
    Rng rng(4);
    head.init(6, 16, 5, rng);
    REQUIRE(head.forward(row<double>({1, 2, 3, 4, 5, 6})).cols() == 5);
  }
  SECTION("hand-forward oracle on a tiny integer instance") {
    // 2 -> 2 -> 2, W1 = diag(1, 2), W2 = I, input (1, 1):
    // pre = (1, 2); layer norm -> (-1, +1) (up to eps); GELU; identity out.
    MlpHead<double> head;
    Rng rng(5);
    head.init(2, 2, 2, rng);
    head.in_layer.weight << 1, 0, 0, 2;
    head.in_layer.bias.setZero();
    head.out_layer.weight.setIdentity();
    head.out_layer.bias.setZero();
    const auto out = head.forward(row<double>({1, 1}));
    const auto gelu_ref = [](double x) {
      return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    };
    REQUIRE(out(0, 0) == Catch::Approx(gelu_ref(-1.0)).margin(1e-4));
    REQUIRE(out(0, 1) == Catch::Approx(gelu_ref(1.0)).margin(1e-4));
  }
  SECTION("linear sublayers compose to the identity") {
    // identity-weight linear layers with zero bias pass values through
    nn::Linear<double> a, b;
    Rng rng(6);
    a.init(3, 3, rng);
    b.init(3, 3, rng);
    a.weight.setIdentity();
    a.bias.setZero();
    b.weight.setIdentity();
    b.bias.setZero();
    const auto x = row<double>({0.1, -2.0, 5.0});
    REQUIRE(b.forward(a.forward(x)) == x);
  }
}

TEST_CASE("difficulty head", "[heads]") {
  DifficultyHead<double> head;
  Rng rng(7);
  head.init(4, rng);

  Mat<double> concat(1, 8);
  for (Index j = 0; j < 8; ++j) concat(0, j) = rng.normal();

  SECTION("probability is a sigmoid of the logit") {
    const auto [logit, p] = head.forward(concat);
    REQUIRE(p == Catch::Approx(1.0 / (1.0 + std::exp(-logit))).margin(1e-12));
    REQUIRE(p > 0.0);
    REQUIRE(p < 1.0);
  }

  SECTION("gradient reaches only the online half") {
    DifficultyHead<double> grads;
    grads.fc.weight = Mat<double>::Zero(8, 1);
    grads.fc.bias = Mat<double>::Zero(1, 1);
    const Mat<double> grad_online = head.backward(concat, 0.37, grads);
    REQUIRE(grad_online.cols() == 4);
    // head parameter grads exist, and the returned input gradient covers
    // only the online representation
    REQUIRE(grads.fc.weight.norm() > 0.0);
    for (Index j = 0; j < 4; ++j)
      REQUIRE(grad_online(0, j) ==
              Catch::Approx(0.37 * head.fc.weight(j, 0)).margin(1e-12));
  }
}
