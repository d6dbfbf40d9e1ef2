#include "dagan/attention.hpp"
#include "dagan/gradcheck.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace dagan;
using dagan::testing::random_tensor;

namespace {

SamState<double> zero_sam() {
  return {{Tensor<double>::zeros({1, 2, 7, 7}), Tensor<double>::zeros({1}), {1, 3, 1}}};
}

SamState<double> random_sam(std::uint64_t seed) {
  InitStream s(seed);
  auto sam = init_sam<double>(s);
  sam.fuse_conv.bias = random_tensor({1}, seed + 1, -0.1, 0.1);
  return sam;
}

CamState<double> random_cam(std::uint64_t seed, std::vector<std::int64_t> scales, std::int64_t c) {
  InitStream s(seed);
  auto cam = init_cam<double>(s, scales, c);
  // Non-zero biases so the gradient check exercises them.
  std::uint64_t k = seed * 31;
  cam.for_each_param("cam", [&](const std::string& name, Tensor<double>& t) {
    if (name.ends_with(".bias")) t = random_tensor(t.shape(), ++k, -0.2, 0.2);
  });
  return cam;
}

void zero_reduce(CamState<double>& cam) {
  cam.reduce_conv_1.weight = Tensor<double>::zeros(cam.reduce_conv_1.weight.shape());
  cam.reduce_conv_1.bias = Tensor<double>::zeros(cam.reduce_conv_1.bias.shape());
  cam.reduce_conv_2.weight = Tensor<double>::zeros(cam.reduce_conv_2.weight.shape());
  cam.reduce_conv_2.bias = Tensor<double>::zeros(cam.reduce_conv_2.bias.shape());
}

}  // namespace

TEST_CASE("sam_forward closed form with zeroed fusion conv") {
  auto f = random_tensor({4, 6, 6}, 1, -3.0, 3.0);
  auto r = sam_forward(f, zero_sam());
  CHECK(r.a_s.shape() == Shape{1, 6, 6});
  for (double v : r.a_s.data()) CHECK(v == 0.5);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(r.f_s[i] == 0.5 * f[i]);
}

TEST_CASE("sam attention stays inside (0,1)") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = sam_forward(random_tensor({3, 8, 8}, seed, -20.0, 20.0), random_sam(seed));
    for (double v : r.a_s.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("sam gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto sam = random_sam(seed + 10);
    auto res = gradcheck(
        "sam", [&](const auto& in) {
          SamState<double> s{{in[1], in[2], sam.fuse_conv.geometry}};
          return sum(sam_forward(in[0], s).f_s);
        },
        {random_tensor({3, 5, 5}, seed), sam.fuse_conv.weight, sam.fuse_conv.bias});
    CHECK(res.passed);
  }
}

TEST_CASE("sam positional locality") {
  auto sam = random_sam(3);
  auto f = random_tensor({3, 16, 16}, 4);
  auto base = sam_forward(f, sam).a_s;
  // Perturb a pixel 4 columns away from (8,8): outside its 7×7 window.
  auto g = f;
  g.mutable_data()[static_cast<std::size_t>(1 * 256 + 8 * 16 + 12)] += 5.0;
  auto moved = sam_forward(g, sam).a_s;
  CHECK(moved[8 * 16 + 8] == base[8 * 16 + 8]);
  // Inside the window the map does respond.
  CHECK(moved[8 * 16 + 11] != base[8 * 16 + 11]);
}

TEST_CASE("sam equal-neighborhood consistency") {
  // Pattern periodic with period 4 along x: pixels (8,6) and (8,10) see the
  // same pooled 7×7 neighborhood.
  std::vector<double> v(3 * 16 * 16);
  auto pattern = random_tensor({3, 16, 4}, 5);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) v[(c * 16 + y) * 16 + x] = pattern[(c * 16 + y) * 4 + x % 4];
  auto r = sam_forward(Tensor<double>({3, 16, 16}, v), random_sam(6));
  CHECK(r.a_s[8 * 16 + 6] == r.a_s[8 * 16 + 10]);
}

TEST_CASE("cam_fuse_scales") {
  SUBCASE("shape contract across scales") {
    auto cam = random_cam(1, {4, 6, 8}, 8);
    std::vector<Tensor<double>> feats{random_tensor({4, 8, 8}, 1), random_tensor({6, 4, 4}, 2),
                                      random_tensor({8, 2, 2}, 3)};
    auto out = cam_fuse_scales<double>(feats, cam, 16, 16);
    CHECK(out.shape() == Shape{8, 16, 16});
  }
  SUBCASE("single coarse scale reduces to conv(conv(resize(F)))") {
    auto cam = random_cam(2, {3}, 4);
    auto f = random_tensor({3, 4, 4}, 4);
    std::vector<Tensor<double>> feats{f};
    auto out = cam_fuse_scales<double>(feats, cam, 8, 8);
    auto manual = conv2d(conv2d(nearest_resize(f, 8, 8), cam.scale_convs[0]), cam.fuse_conv);
    CHECK(identical(out, manual));
  }
  SUBCASE("feature count mismatch") {
    auto cam = random_cam(3, {3, 3}, 4);
    std::vector<Tensor<double>> feats{random_tensor({3, 4, 4}, 5)};
    CHECK_THROWS_AS(cam_fuse_scales<double>(feats, cam, 8, 8), ShapeError);
  }
  SUBCASE("gradients through resize and convs") {
    auto cam = random_cam(4, {2, 3}, 3);
    auto res = gradcheck(
        "cam_fuse_scales", [&](const auto& in) {
          CamState<double> c = cam;
          c.scale_convs[0].weight = in[2];
          c.fuse_conv.weight = in[3];
          std::vector<Tensor<double>> feats{in[0], in[1]};
          auto out = cam_fuse_scales<double>(feats, c, 6, 6);
          return sum(mul(out, out));
        },
        {random_tensor({2, 3, 3}, 6), random_tensor({3, 2, 2}, 7), cam.scale_convs[0].weight,
         cam.fuse_conv.weight});
    CHECK(res.passed);
  }
}

TEST_CASE("cam_forward closed forms") {
  auto cam = random_cam(5, {4}, 6);
  zero_reduce(cam);
  auto ft = random_tensor({6, 5, 5}, 8);
  auto fl = random_tensor({6, 5, 5}, 9);
  auto r1 = cam_forward(ft, fl, cam, CamVariant::CamI);
  auto r2 = cam_forward(ft, fl, cam, CamVariant::CamII);
  CHECK(r1.delta.shape() == Shape{6, 1, 1});
  for (double v : r1.delta.data()) CHECK(v == 0.5);
  for (std::size_t i = 0; i < ft.size(); ++i) {
    CHECK(r1.f_c[i] == 0.5 * ft[i] + fl[i]);
    CHECK(r2.f_c[i] == 0.5 * fl[i] + ft[i]);
  }
}

TEST_CASE("cam variants coincide when the fused and local features are equal") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cam = random_cam(seed, {4}, 6);
    auto f = random_tensor({2, 6, 5, 5}, seed + 20);
    auto r1 = cam_forward(f, f, cam, CamVariant::CamI);
    auto r2 = cam_forward(f, f, cam, CamVariant::CamII);
    CHECK(identical(r1.f_c, r2.f_c));
    CHECK(identical(r1.delta, r2.delta));
  }
}

TEST_CASE("cam delta properties") {
  auto cam = random_cam(7, {4}, 6);
  auto ft = random_tensor({6, 5, 5}, 10, -4.0, 4.0);
  auto fl = random_tensor({6, 5, 5}, 11, -4.0, 4.0);
  auto r1 = cam_forward(ft, fl, cam, CamVariant::CamI);
  auto r2 = cam_forward(ft, fl, cam, CamVariant::CamII);
  CHECK(identical(r1.delta, r2.delta));
  for (double v : r1.delta.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  SUBCASE("raising gamma[c] raises delta[c]") {
    auto bumped = cam;
    bumped.reduce_conv_2.bias.mutable_data()[2] += 0.5;
    auto r3 = cam_forward(ft, fl, bumped, CamVariant::CamI);
    CHECK(r3.delta[2] > r1.delta[2]);
    for (std::size_t c = 0; c < 6; ++c) {
      if (c != 2) CHECK(r3.delta[c] == r1.delta[c]);
    }
  }
  CHECK_THROWS_AS(cam_forward(ft, random_tensor({6, 4, 4}, 1), cam, CamVariant::CamI), ShapeError);
}

TEST_CASE("cam gradients w.r.t. inputs and every parameter") {
  for (CamVariant variant : {CamVariant::CamI, CamVariant::CamII}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto cam = random_cam(seed + 40, {3}, 4);
      std::vector<Tensor<double>> inputs{random_tensor({4, 3, 3}, seed),
                                         random_tensor({4, 3, 3}, seed + 1)};
      cam.for_each_param("", [&](const std::string&, Tensor<double>& t) { inputs.push_back(t); });
      auto res = gradcheck(
          "cam", [&](const auto& in) {
            CamState<double> c = cam;
            std::size_t k = 2;
            c.for_each_param("", [&](const std::string&, Tensor<double>& t) { t = in[k++]; });
            return sum(cam_forward(in[0], in[1], c, variant).f_c);
          },
          inputs);
      CHECK(res.passed);
    }
  }
}

TEST_CASE("dual_fuse") {
  auto a = random_tensor({3, 4, 4}, 1);
  auto b = random_tensor({3, 4, 4}, 2);
  CHECK(identical(dual_fuse(a, Tensor<double>::zeros(a.shape())), a));
  CHECK(identical(dual_fuse(a, b), dual_fuse(b, a)));
  auto scaled = dual_fuse(scale(a, 2.0), scale(b, 2.0));
  auto base = dual_fuse(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(scaled[i] == doctest::Approx(2.0 * base[i]));
  CHECK_THROWS_AS(dual_fuse(a, random_tensor({3, 2, 2}, 3)), ShapeError);
}

TEST_CASE("cam variant names") {
  CHECK(parse_cam_variant("CAM-I") == CamVariant::CamI);
  CHECK(parse_cam_variant("II") == CamVariant::CamII);
  CHECK(to_string(CamVariant::CamII) == "CAM-II");
  CHECK_THROWS(parse_cam_variant("CAM-III"));
}
