#include <cmath>
#include <filesystem>

#include "dagan/data.hpp"
#include "dagan/random.hpp"
#include "doctest.h"

using namespace dagan;

TEST_CASE("layouts are deterministic and valid") {
  SceneConfig cfg;
  cfg.seed = 3;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Layout a = generate_layout(cfg, i);
    CHECK(a == generate_layout(cfg, i));
    CHECK(a.height == 64);
    for (auto id : a.ids) CHECK(id < 5);
  }
  CHECK_FALSE(generate_layout(cfg, 0) == generate_layout(cfg, 1));
  SceneConfig other = cfg;
  other.seed = 4;
  CHECK_FALSE(generate_layout(cfg, 0) == generate_layout(other, 0));
}

TEST_CASE("every class appears in more than 1% of pixels over 1000 scenes") {
  SceneConfig cfg;
  std::vector<std::int64_t> counts(5, 0);
  std::int64_t total = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    for (auto id : generate_layout(cfg, i).ids) ++counts[id];
    total += 64 * 64;
  }
  for (std::size_t c = 0; c < 5; ++c) {
    CAPTURE(c);
    CHECK(static_cast<double>(counts[c]) / static_cast<double>(total) > 0.01);
  }
}

TEST_CASE("render rule") {
  Layout l(8, 8);
  l.at(0, 3) = 2;
  l.at(5, 1) = 4;
  l.at(5, 6) = 4;
  auto img = render<double>(l);
  CHECK(img.shape() == Shape{3, 8, 8});
  const auto c2 = base_color(2);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    CHECK(img[ch * 64 + 3] == 0.7 * c2[ch]);
    CHECK(img[ch * 64 + 5 * 8 + 1] == img[ch * 64 + 5 * 8 + 6]);
  }
  CHECK(shade(0, 64) == 0.7);
  CHECK(shade(32, 64) == 0.85);
}

TEST_CASE("classes stay separated at every row") {
  for (std::int64_t k : {5, 8, 12, 27}) {
    for (std::int64_t y = 0; y < 64; ++y) {
      const double s = shade(y, 64);
      double worst = 1e9;
      for (std::int64_t a = 0; a < k; ++a)
        for (std::int64_t b = a + 1; b < k; ++b) {
          double d = 0;
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const double diff = (base_color(a)[ch] - base_color(b)[ch]) * s;
            d += diff * diff;
          }
          worst = std::min(worst, std::sqrt(d));
        }
      CHECK(worst > 0.1);
    }
  }
}

TEST_CASE("palette starts from maximally separated cube corners") {
  CHECK(base_color(0) == std::array<double, 3>{-1, -1, -1});
  CHECK(base_color(1) == std::array<double, 3>{1, 1, 1});
  for (std::int64_t c = 0; c < 8; ++c)
    for (double v : base_color(c)) CHECK(std::abs(v) == 1.0);
  CHECK_THROWS(base_color(27));
}

TEST_CASE("one_hot") {
  Layout l(2, 3);
  l.at(1, 2) = 2;
  auto t = one_hot<double>(l, 5);
  CHECK(t.shape() == Shape{5, 2, 3});
  for (std::size_t c = 0; c < 5; ++c) CHECK(t[c * 6 + 5] == (c == 2 ? 1.0 : 0.0));
  SceneConfig cfg;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Layout g = generate_layout(cfg, i);
    auto oh = one_hot<float>(g, 5);
    for (std::int64_t p = 0; p < 64 * 64; ++p) {
      float s = 0;
      for (std::int64_t c = 0; c < 5; ++c) s += oh[static_cast<std::size_t>(c * 4096 + p)];
      CHECK(s == 1.0f);
    }
    CHECK(argmax_layout(oh) == g);
  }
  l.at(0, 0) = 7;
  CHECK_THROWS(one_hot<double>(l, 5));
}

TEST_CASE("oracle segmenter") {
  SceneConfig cfg;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Layout l = generate_layout(cfg, i);
    CHECK(oracle_segment(render<double>(l), 5) == l);
    CHECK(oracle_segment(render<float>(l), 5) == l);
    // Survives 8-bit quantization.
    CHECK(oracle_segment(from_rgb<double>(to_rgb(render<double>(l))), 5) == l);
  }

  SUBCASE("all-black image picks the nearest shaded color per row") {
    auto black = Tensor<double>::full({3, 8, 8}, -1.0);
    const Layout seg = oracle_segment(black, 5);
    CHECK(seg == oracle_segment(black, 5));
    for (auto id : seg.ids) CHECK(id == 0);
  }

  SUBCASE("robust to uniform noise of amplitude 0.03") {
    std::int64_t agree = 0, total = 0;
    Rng rng(99);
    for (std::uint64_t i = 0; i < 100; ++i) {
      const Layout l = generate_layout(cfg, 1000 + i);
      auto img = render<double>(l);
      auto data = img.mutable_data();
      for (auto& v : data) v += (2.0 * uniform01(rng) - 1.0) * 0.03;
      const Layout seg = oracle_segment(img, 5);
      for (std::size_t p = 0; p < l.ids.size(); ++p) agree += seg.ids[p] == l.ids[p];
      total += static_cast<std::int64_t>(l.ids.size());
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.999);
  }
}

TEST_CASE("split files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "dagan_test_split";
  std::filesystem::remove_all(dir);
  SceneConfig cfg;
  cfg.seed = 5;
  write_split(cfg, 10, 4, dir);
  const auto stems = list_layouts(dir);
  REQUIRE(stems.size() == 4);
  CHECK(stems[0] == "00000");
  for (std::uint64_t i = 0; i < 4; ++i) {
    const Layout l = from_pgm(decode_pgm(read_file(DatasetPaths::layout(dir, i))));
    CHECK(l == generate_layout(cfg, 10 + i));
    const auto img = from_rgb<double>(decode_ppm(read_file(DatasetPaths::image(dir, i))));
    CHECK(oracle_segment(img, 5) == l);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("portable random helpers") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = uniform_int(rng, 3, 7);
    CHECK(v >= 3);
    CHECK(v <= 7);
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  Rng a(5), b(5);
  auto w = v;
  shuffle<int>(v, a);
  shuffle<int>(w, b);
  CHECK(v == w);
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}
