#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"

#include "deconas/errors.hpp"
#include "deconas/nc/checkpoint.hpp"
#include "deconas/nc/ops.hpp"
#include "deconas/nc/param_store.hpp"
#include "support/suites.hpp"

using namespace deconas;
using namespace deconas::testing;
using nc::Tensor;

namespace {

Tensor pixel_unshuffle(const Tensor& x, int r) {
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2) / r, w = x.dim(3) / r;
  std::vector<double> out(x.numel());
  for (int n = 0; n < b; ++n)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h * r; ++y)
        for (int xx = 0; xx < w * r; ++xx) {
          const int oc = ch * r * r + r * (y % r) + (xx % r);
          out[((static_cast<std::size_t>(n) * c * r * r + oc) * h + y / r) * w + xx / r] =
              x.values()[((static_cast<std::size_t>(n) * c + ch) * h * r + y) * w * r + xx];
        }
  return Tensor::constant({b, c * r * r, h, w}, std::move(out));
}

}  // namespace

TEST_CASE("finite-difference gradient suite") {
  for (const auto& gc : gradient_cases()) {
    Rng rng(derive_seed(20, gc.name));
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) worst = std::max(worst, gc.trial(rng));
    INFO(gc.name << " worst relative error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("identity kernel") {
  Rng rng(1);
  const Tensor x = random_param(rng, {1, 2, 4, 4});
  std::vector<double> k(2 * 2 * 9, 0.0);
  k[(0 * 2 + 0) * 9 + 4] = 1.0;
  k[(1 * 2 + 1) * 9 + 4] = 1.0;
  const Tensor y = nc::conv2d(x, Tensor::constant({2, 2, 3, 3}, k));
  CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("dilation geometry on a single pixel") {
  const Tensor x = Tensor::constant({1, 1, 1, 1}, {2.0});
  std::vector<double> k(9);
  for (int i = 0; i < 9; ++i) k[static_cast<std::size_t>(i)] = i + 1.0;
  const Tensor y = nc::conv2d(x, Tensor::constant({1, 1, 3, 3}, k), std::nullopt, 3);
  REQUIRE(y.shape() == nc::Shape{1, 1, 1, 1});
  CHECK(y.item() == 10.0);
}

TEST_CASE("same padding keeps spatial size") {
  Rng rng(2);
  for (int d = 1; d <= 3; ++d) {
    const Tensor y = nc::conv2d(random_param(rng, {2, 3, 5, 7}), random_param(rng, {4, 3, 3, 3}), std::nullopt, d);
    CHECK(y.shape() == nc::Shape{2, 4, 5, 7});
  }
  CHECK_THROWS_AS(nc::conv2d(random_param(rng, {1, 3, 4, 4}), random_param(rng, {4, 2, 3, 3})), ShapeError);
  CHECK_THROWS_AS(nc::conv2d(random_param(rng, {1, 3, 4, 4}), random_param(rng, {2, 1, 3, 3}), std::nullopt, 1, true),
                  ShapeError);
}

TEST_CASE("conv over concatenated inputs decomposes into blocks") {
  Rng rng(3);
  const Tensor a = random_param(rng, {1, 2, 5, 5});
  const Tensor b = random_param(rng, {1, 3, 5, 5});
  const Tensor ka = random_param(rng, {4, 2, 3, 3});
  const Tensor kb = random_param(rng, {4, 3, 3, 3});
  const Tensor bias = random_param(rng, {4});
  const std::vector<Tensor> parts{a, b};
  const Tensor whole = nc::conv2d(nc::concat_channels(parts), concat_kernels({ka, kb}), bias, 2);
  const Tensor split = nc::add(nc::conv2d(a, ka, bias, 2), nc::conv2d(b, kb, std::nullopt, 2));
  CHECK(max_abs_diff(whole, split) < 1e-12);
}

TEST_CASE("pixel shuffle") {
  const Tensor x = Tensor::constant({1, 4, 1, 1}, {1, 2, 3, 4});
  const Tensor y = nc::pixel_shuffle(x, 2);
  REQUIRE(y.shape() == nc::Shape{1, 1, 2, 2});
  CHECK(std::vector<double>(y.values().begin(), y.values().end()) == std::vector<double>{1, 2, 3, 4});

  Rng rng(4);
  const Tensor z = random_param(rng, {2, 3, 4, 5});
  CHECK(max_abs_diff(nc::pixel_shuffle(z, 1), z) == 0.0);
  for (int r = 2; r <= 3; ++r) {
    const Tensor w = random_param(rng, {2, 2 * r * r, 3, 2});
    CHECK(max_abs_diff(pixel_unshuffle(nc::pixel_shuffle(w, r), r), w) == 0.0);
  }
  CHECK_THROWS_AS(nc::pixel_shuffle(random_param(rng, {1, 3, 2, 2}), 2), ShapeError);
}

TEST_CASE("lstm cell limits") {
  const int h = 3;
  const nc::LstmParams zero{Tensor::zeros({4 * h, 2}), Tensor::zeros({4 * h, h}), Tensor::zeros({4 * h})};
  auto [h1, c1] = nc::lstm_cell(Tensor::zeros({1, 2}), Tensor::zeros({1, h}), Tensor::zeros({1, h}), zero);
  for (double v : h1.values()) CHECK(v == 0.0);

  // Saturated forget gate, closed input gate: the cell is carried over.
  std::vector<double> bias(4 * h, 0.0);
  for (int i = 0; i < h; ++i) {
    bias[static_cast<std::size_t>(i)] = -100.0;
    bias[static_cast<std::size_t>(h + i)] = 100.0;
  }
  Rng rng(5);
  const nc::LstmParams saturated{random_param(rng, {4 * h, 2}, -0.1, 0.1), random_param(rng, {4 * h, h}, -0.1, 0.1),
                                 Tensor::constant({4 * h}, bias)};
  const Tensor cell = random_param(rng, {1, h});
  auto [h2, c2] = nc::lstm_cell(random_param(rng, {1, 2}), random_param(rng, {1, h}), cell, saturated);
  CHECK(max_abs_diff(c2, cell) < 1e-12);
  CHECK_THROWS_AS(nc::lstm_cell(Tensor::zeros({1, 3}), Tensor::zeros({1, h}), Tensor::zeros({1, h}), zero), ShapeError);
}

TEST_CASE("primitive identities") {
  Rng rng(6);
  const Tensor x = random_param(rng, {2, 3, 4, 4});
  CHECK(nc::l1_loss(x, x).item() == 0.0);
  const std::vector<Tensor> one{x};
  CHECK(max_abs_diff(nc::mean_over(one), x) == 0.0);
  CHECK_THROWS_AS(nc::add(x, random_param(rng, {2, 3, 4, 5})), ShapeError);
  CHECK_THROWS_AS(nc::l1_loss(x, random_param(rng, {1, 3, 4, 4})), ShapeError);
  const double lp = nc::bernoulli_log_prob(Tensor::constant({1, 2}, {0.0, 0.0}), std::vector<std::uint8_t>{1, 0})
                        .values()[0];
  CHECK(lp == doctest::Approx(std::log(0.5)));
  // Large logits stay finite.
  const Tensor far = nc::bernoulli_log_prob(Tensor::constant({1, 2}, {800.0, -800.0}), std::vector<std::uint8_t>{0, 1});
  CHECK(far.values()[0] == doctest::Approx(-800.0));
  CHECK(std::isfinite(far.values()[1]));
}

TEST_CASE("no-grad guard records nothing") {
  Rng rng(7);
  const Tensor x = random_param(rng, {1, 4});
  {
    nc::NoGradGuard guard;
    CHECK_FALSE(nc::grad_enabled());
    const Tensor y = nc::sum(nc::mul(x, x));
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(nc::grad_enabled());
  CHECK(nc::sum(x).requires_grad());
}

TEST_CASE("adam first step moves by lr against the gradient sign") {
  nc::ParamStore store;
  store.add("w", {3}, {1.0, 2.0, 3.0});
  const nc::AdamConfig cfg{.lr = 0.01};
  nc::adam_step(store, {{"w", {4.0, -2.0, 0.5}}}, cfg);
  const auto v = store.get("w").values();
  CHECK(v[0] == doctest::Approx(1.0 - 0.01));
  CHECK(v[1] == doctest::Approx(2.0 + 0.01));
  CHECK(v[2] == doctest::Approx(3.0 - 0.01));
  CHECK(store.entry("w").adam.step == 1);
}

TEST_CASE("adam zero gradient") {
  nc::ParamStore store;
  store.add("w", {2}, {1.0, -1.0});
  nc::adam_step(store, {{"w", {0.0, 0.0}}}, {});
  const auto& e = store.entry("w");
  CHECK(e.param.values()[0] == 1.0);
  CHECK(e.param.values()[1] == -1.0);
  CHECK(e.adam.step == 1);
  for (double m : e.adam.first_moment) CHECK(m == 0.0);
  for (double m : e.adam.second_moment) CHECK(m == 0.0);
}

TEST_CASE("adam two steps match the moment recursion") {
  nc::ParamStore store;
  store.add("w", {1}, {0.5});
  const nc::AdamConfig cfg{.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .epsilon = 1e-8};
  const double g = 0.3;
  double w = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    nc::adam_step(store, {{"w", {g}}}, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(store.get("w").values()[0] == doctest::Approx(w).epsilon(1e-14));
}

TEST_CASE("adam is lazy and strict about names") {
  nc::ParamStore store;
  store.add("a", {1}, {1.0});
  store.add("b", {1}, {2.0});
  nc::adam_step(store, {{"a", {1.0}}}, {});
  CHECK(store.entry("b").adam.step == 0);
  CHECK(store.get("b").values()[0] == 2.0);
  CHECK_THROWS_AS(nc::adam_step(store, {{"c", {1.0}}}, {}), GradientError);
  CHECK_THROWS_AS(nc::adam_step(store, {{"a", {1.0, 2.0}}}, {}), GradientError);
  CHECK_THROWS_AS(nc::adam_step_all(store, {{"a", {1.0}}}, {}), GradientError);
}

TEST_CASE("param store bookkeeping") {
  nc::ParamStore store;
  store.add("a", {2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(store.add("a", {1}, {0}), ValidationError);
  CHECK_THROWS_AS(store.add("b", {3}, {0}), ValidationError);
  CHECK(store.total_values() == 4);
  nc::backward(nc::sum(store.get("a")));
  const auto g = store.gradients();
  REQUIRE(g.count("a") == 1);
  CHECK(g.at("a") == std::vector<double>(4, 1.0));
  store.zero_grad();
  CHECK(store.gradients().empty());

  nc::GradientMap acc;
  nc::accumulate(acc, g, 0.5);
  nc::accumulate(acc, g, 0.5);
  CHECK(acc.at("a") == std::vector<double>(4, 1.0));
}

TEST_CASE("variance scaled init") {
  Rng rng(8);
  const auto v = nc::variance_scaled(rng, 20000, 50, 0.02);
  double sq = 0.0;
  for (double x : v) sq += x * x;
  CHECK(std::sqrt(sq / v.size()) == doctest::Approx(std::sqrt(0.02 / 50)).epsilon(0.03));
}

TEST_CASE("checkpoint round trip") {
  nc::ParamStore store;
  Rng rng(9);
  store.add("x", {2, 3}, random_values(rng, 6));
  store.add("y", {4}, random_values(rng, 4));
  nc::adam_step(store, {{"x", random_values(rng, 6)}}, {});
  const auto dir = std::filesystem::temp_directory_path() / "deconas_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "s.ckpt";
  nc::save_checkpoint(path, nc::snapshot(store, {{"kind", "test"}}), true);
  CHECK(std::filesystem::exists(path.string() + ".json"));
  const auto loaded = nc::load_checkpoint(path);
  CHECK(loaded.meta.at("kind") == "test");

  nc::ParamStore other;
  other.add("x", {2, 3}, std::vector<double>(6, 0.0));
  other.add("y", {4}, std::vector<double>(4, 0.0));
  nc::restore(other, loaded);
  for (const auto& name : {"x", "y"}) {
    CHECK(max_abs_diff(other.get(name), store.get(name)) == 0.0);
    CHECK(other.entry(name).adam.step == store.entry(name).adam.step);
    CHECK(other.entry(name).adam.first_moment == store.entry(name).adam.first_moment);
  }

  nc::ParamStore wrong;
  wrong.add("x", {3, 2}, std::vector<double>(6, 0.0));
  wrong.add("y", {4}, std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(nc::restore(wrong, loaded), CheckpointError);
  CHECK_THROWS_AS(nc::load_checkpoint(dir / "missing.ckpt"), CheckpointError);

  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(nc::load_checkpoint(path), CheckpointError);
  std::filesystem::remove_all(dir);
}
