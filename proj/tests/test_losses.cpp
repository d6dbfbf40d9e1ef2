#include "dagan/gradcheck.hpp"
#include "dagan/losses.hpp"
#include "dagan/tape.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dagan;
using dagan::testing::random_away_from_zero;
using dagan::testing::random_tensor;

namespace {

std::vector<Tensor<double>> constant_maps(double v) {
  return {Tensor<double>::full({1, 8, 8}, v), Tensor<double>::full({1, 4, 4}, v)};
}

}  // namespace

TEST_CASE("hinge discriminator loss") {
  CHECK(hinge_d_loss<double>(constant_maps(2.0), constant_maps(-2.0)).item() == 0.0);
  CHECK(hinge_d_loss<double>(constant_maps(0.0), constant_maps(0.0)).item() == 2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<Tensor<double>> r{random_tensor({1, 8, 8}, seed, -3, 3), random_tensor({1, 4, 4}, seed + 1, -3, 3)};
    std::vector<Tensor<double>> f{random_tensor({1, 8, 8}, seed + 2, -3, 3), random_tensor({1, 4, 4}, seed + 3, -3, 3)};
    CHECK(hinge_d_loss<double>(r, f).item() >= 0.0);
  }
  CHECK_THROWS_AS(hinge_d_loss<double>(constant_maps(0.0), std::vector<Tensor<double>>{}), ShapeError);
}

TEST_CASE("per-scale means are weighted equally") {
  // Scale 0 all at margin, scale 1 violates by 1: (0 + 2) / 2.
  std::vector<Tensor<double>> real{Tensor<double>::full({1, 8, 8}, 1.0), Tensor<double>::full({1, 4, 4}, 0.0)};
  std::vector<Tensor<double>> fake{Tensor<double>::full({1, 8, 8}, -1.0), Tensor<double>::full({1, 4, 4}, 0.0)};
  CHECK(hinge_d_loss<double>(real, fake).item() == 1.0);
}

TEST_CASE("hinge generator loss") {
  CHECK(hinge_g_loss<double>(constant_maps(0.0)).item() == 0.0);
  CHECK(hinge_g_loss<double>(constant_maps(0.75)).item() == -0.75);
  // Gradient w.r.t. a single logit map is −1/N everywhere.
  Tape<double> tape;
  auto x = tape.watch(random_tensor({1, 4, 4}, 3));
  std::vector<Tensor<double>> maps{x};
  auto g = backward(tape, hinge_g_loss<double>(maps)).wrt(x);
  for (double v : g.data()) CHECK(v == -1.0 / 16.0);
}

TEST_CASE("least-squares losses") {
  CHECK(lsgan_d_loss<double>(constant_maps(1.0), constant_maps(0.0)).item() == 0.0);
  CHECK(lsgan_d_loss<double>(constant_maps(0.0), constant_maps(1.0)).item() == 2.0);
  CHECK(lsgan_g_loss<double>(constant_maps(1.0)).item() == 0.0);
  CHECK(lsgan_g_loss<double>(constant_maps(3.0)).item() == 4.0);
  CHECK(parse_adversarial_loss("lsgan") == AdversarialLoss::LeastSquares);
  CHECK(to_string(AdversarialLoss::Hinge) == "hinge");
  CHECK_THROWS(parse_adversarial_loss("wgan"));
}

TEST_CASE("adversarial loss gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r0 = random_away_from_zero({1, 4, 4}, seed);
    auto f0 = random_away_from_zero({1, 2, 2}, seed + 50);
    // Shift by ±1 so the hinge kinks at ∓1 stay out of reach.
    auto r = add_scalar(r0, 1.0).detach();
    auto f = add_scalar(f0, -1.0).detach();
    auto res = gradcheck(
        "hinge", [](const auto& in) {
          std::vector<Tensor<double>> real{in[0], in[1]}, fake{in[2], in[3]};
          return add(hinge_d_loss<double>(real, fake), hinge_g_loss<double>(fake));
        },
        {r, f, add_scalar(r0, -1.0).detach(), add_scalar(f0, 1.0).detach()});
    CHECK(res.passed);
    auto ls = gradcheck(
        "lsgan", [](const auto& in) {
          std::vector<Tensor<double>> real{in[0]}, fake{in[1]};
          return add(lsgan_d_loss<double>(real, fake), lsgan_g_loss<double>(fake));
        },
        {random_tensor({1, 3, 3}, seed), random_tensor({1, 3, 3}, seed + 9)});
    CHECK(ls.passed);
  }
}

TEST_CASE("feature matching loss") {
  std::vector<std::vector<Tensor<double>>> real{{random_tensor({2, 4, 4}, 1), random_tensor({3, 2, 2}, 2)},
                                                {random_tensor({2, 2, 2}, 3)}};
  CHECK(feature_matching_loss<double>(real, real).item() == 0.0);
  auto plus_one = real;
  for (auto& scale_feats : plus_one)
    for (auto& f : scale_feats) f = add_scalar(f, 1.0).detach();
  CHECK(feature_matching_loss<double>(real, plus_one).item() == doctest::Approx(1.0).epsilon(1e-15));

  auto fake = real;
  for (auto& scale_feats : fake)
    for (auto& f : scale_feats) f = random_tensor(f.shape(), 77 + f.size());
  auto scaled = [](std::vector<std::vector<Tensor<double>>> v, double s) {
    for (auto& scale_feats : v)
      for (auto& f : scale_feats) f = scale(f, s).detach();
    return v;
  };
  const double base = feature_matching_loss<double>(real, fake).item();
  CHECK(feature_matching_loss<double>(scaled(real, 3.0), scaled(fake, 3.0)).item() == doctest::Approx(3.0 * base));

  std::vector<std::vector<Tensor<double>>> short_list{{real[0][0]}, {real[1][0]}};
  CHECK_THROWS_AS(feature_matching_loss<double>(real, short_list), ShapeError);
  std::vector<std::vector<Tensor<double>>> one_scale{real[0]};
  CHECK_THROWS_AS(feature_matching_loss<double>(real, one_scale), ShapeError);
}

TEST_CASE("feature matching gradients reach only the fake side") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto real = random_tensor({2, 3, 3}, seed);
    // Keep fake − real away from the |·| kink.
    auto fake0 = add(real, random_away_from_zero({2, 3, 3}, seed + 1)).detach();
    auto res = gradcheck(
        "feature_matching", [&](const auto& in) {
          std::vector<std::vector<Tensor<double>>> r{{real}}, f{{in[0]}};
          return feature_matching_loss<double>(r, f);
        },
        {fake0});
    CHECK(res.passed);

    Tape<double> tape;
    auto r = tape.watch(real);
    auto f = tape.watch(fake0);
    std::vector<std::vector<Tensor<double>>> rr{{r}}, ff{{f}};
    auto grads = backward(tape, feature_matching_loss<double>(rr, ff));
    CHECK_FALSE(grads.contains(r));
    CHECK(grads.contains(f));
  }
}

TEST_CASE("fixed extractor") {
  auto a = FixedExtractor<double>::make(5);
  auto b = FixedExtractor<double>::make(5);
  REQUIRE(a.layers.size() == 4);
  for (std::size_t i = 0; i < a.layers.size(); ++i) CHECK(identical(a.layers[i].weight, b.layers[i].weight));
  auto feats = a.features(random_tensor({3, 64, 64}, 1));
  CHECK(feats[0].shape() == Shape{16, 32, 32});
  CHECK(feats[3].shape() == Shape{64, 4, 4});
  CHECK(a.embedding(random_tensor({3, 64, 64}, 1)).shape() == Shape{64});
  CHECK(a.embedding(random_tensor({2, 3, 64, 64}, 1)).shape() == Shape{2, 64});
}

TEST_CASE("perceptual loss") {
  auto e = FixedExtractor<double>::make(6);
  auto img = random_tensor({3, 16, 16}, 2);
  CHECK(perceptual_loss(img, img, e).item() == 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CHECK(perceptual_loss(random_tensor({3, 16, 16}, seed), random_tensor({3, 16, 16}, seed + 10), e).item() >= 0.0);
  }
  CHECK_THROWS_AS(perceptual_loss(img, random_tensor({3, 8, 8}, 1), e), ShapeError);

  SUBCASE("gradient flows to the fake image only") {
    Tape<double> tape;
    auto real = tape.watch(img);
    auto fake = tape.watch(random_tensor({3, 16, 16}, 3));
    // Even watched extractor weights must stay out of the graph.
    auto watched = e;
    for (auto& layer : watched.layers) {
      layer.weight = tape.watch(layer.weight);
      layer.bias = tape.watch(layer.bias);
    }
    auto grads = backward(tape, perceptual_loss(real, fake, watched));
    CHECK_FALSE(grads.contains(real));
    const auto g_real = grads.wrt(real);
    for (double v : g_real.data()) CHECK(v == 0.0);
    for (const auto& layer : watched.layers) {
      CHECK_FALSE(grads.contains(layer.weight));
      CHECK_FALSE(grads.contains(layer.bias));
      const auto g_w = grads.wrt(layer.weight);
      for (double v : g_w.data()) CHECK(v == 0.0);
    }
    REQUIRE(grads.contains(fake));
    const auto g_fake = grads.wrt(fake);
    double norm = 0.0;
    for (double v : g_fake.data()) norm += v * v;
    CHECK(norm > 0.0);
  }

  SUBCASE("finite differences") {
    auto small = FixedExtractor<double>::make(7, std::vector<std::int64_t>{3, 4});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      // Only the fake side: the real image is detached by contract, so its
      // analytic gradient is zero while its numeric one is not.
      const auto real = random_tensor({3, 8, 8}, seed);
      auto res = gradcheck(
          "perceptual", [&](const auto& in) { return perceptual_loss(real, in[0], small); },
          {random_tensor({3, 8, 8}, seed + 30)});
      CAPTURE(res.max_rel_error);
      CHECK(res.passed);
    }
  }
}

TEST_CASE("total generator loss") {
  LossWeights w;
  CHECK(w.lambda_cgan == 1.0);
  CHECK(w.lambda_f == 10.0);
  CHECK(w.lambda_p == 10.0);
  auto s = [](double v) { return Tensor<double>::scalar(v); };
  CHECK(total_generator_loss<double>({s(0.5), s(0.1), s(0.2)}, w).item() == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(total_generator_loss<double>({s(0), s(0), s(0)}, w).item() == 0.0);
  const double base = total_generator_loss<double>({s(0.3), s(0.2), s(0.1)}, w).item();
  CHECK(total_generator_loss<double>({s(1.3), s(0.2), s(0.1)}, w).item() == doctest::Approx(base + 1.0));
  CHECK(total_generator_loss<double>({s(0.3), s(1.2), s(0.1)}, w).item() == doctest::Approx(base + 10.0));
  CHECK(total_generator_loss<double>({s(0.3), s(0.2), s(1.1)}, w).item() == doctest::Approx(base + 10.0));
  LossWeights bad;
  bad.lambda_f = -1;
  CHECK_THROWS(total_generator_loss<double>({s(0), s(0), s(0)}, bad));
}
