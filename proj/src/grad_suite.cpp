#include <cmath>

#include "dagan/gradcheck.hpp"
#include "dagan/losses.hpp"
#include "dagan/model.hpp"
#include "dagan/ops.hpp"
#include "dagan/random.hpp"

namespace dagan {
namespace {

using TensorList = std::vector<Tensor<double>>;

class Source {
 public:
  explicit Source(std::uint64_t seed) : rng_(seed) {}

  Tensor<double> uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)));
    for (auto& x : v) x = lo + (hi - lo) * uniform01(rng_);
    return Tensor<double>(std::move(shape), std::move(v));
  }

  /// |x| in [0.05, 1], so piecewise-linear ops are never probed at a kink.
  Tensor<double> off_kink(Shape shape) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)));
    for (auto& x : v) {
      const double m = 0.05 + 0.95 * uniform01(rng_);
      x = uniform01(rng_) < 0.5 ? -m : m;
    }
    return Tensor<double>(std::move(shape), std::move(v));
  }

  Tensor<double> layout(std::int64_t k, std::int64_t h, std::int64_t w) {
    Tensor<double> t = Tensor<double>::zeros({k, h, w});
    std::vector<double> v(t.data().begin(), t.data().end());
    for (std::int64_t p = 0; p < h * w; ++p) v[static_cast<std::size_t>(uniform_index(rng_, k) * h * w + p)] = 1.0;
    return Tensor<double>({k, h, w}, std::move(v));
  }

 private:
  Rng rng_;
};

template <typename State>
TensorList params_of(const State& s) {
  TensorList out;
  s.for_each_param([&](const std::string&, const Tensor<double>& t) { out.push_back(t); });
  return out;
}

template <typename State>
void assign_params(State& s, const TensorList& in, std::size_t offset) {
  s.for_each_param([&](const std::string&, Tensor<double>& t) { t = in[offset++]; });
}

/// Moves norm affines and biases off their symmetric initial values.
template <typename State>
void jitter(State& s, Source& src) {
  s.for_each_param([&](const std::string& name, Tensor<double>& t) {
    if (name.ends_with(".bias") || name.ends_with(".shift") || name.ends_with(".scale")) {
      t = add(t, src.uniform(t.shape(), -0.2, 0.2)).detach();
    }
  });
}

TensorList params_of_cam(const CamState<double>& c) {
  TensorList out;
  c.for_each_param("", [&](const std::string&, const Tensor<double>& t) { out.push_back(t); });
  return out;
}

Tensor<double> weighted_sum(const Tensor<double>& y, const Tensor<double>& w) { return sum(mul(y, w)); }

/// Conv biases feeding an instance norm have an exactly zero gradient, so
/// their central difference is pure roundoff; judge those by absolute error.
GradCheckOptions model_options() {
  GradCheckOptions o;
  o.floor = 1e-4;
  o.max_coords_per_input = 24;
  return o;
}

void pointwise_ops(std::vector<GradCheckResult>& out, Source& src) {
  const auto x = src.off_kink({2, 3, 4});
  const auto w = src.uniform({2, 3, 4});
  auto unary = [&](const char* name, Tensor<double> (*f)(const Tensor<double>&)) {
    out.push_back(gradcheck(name, [&, f](const TensorList& in) { return weighted_sum(f(in[0]), w); }, {x}));
  };
  unary("sigmoid", [](const Tensor<double>& t) { return sigmoid(t); });
  unary("tanh", [](const Tensor<double>& t) { return tanh(t); });
  unary("relu", [](const Tensor<double>& t) { return relu(t); });
  unary("leaky_relu", [](const Tensor<double>& t) { return leaky_relu(t, 0.2); });
  unary("abs", [](const Tensor<double>& t) { return abs(t); });
  out.push_back(gradcheck("mul_broadcast", [&](const TensorList& in) { return weighted_sum(mul(in[0], in[1]), w); },
                          {x, src.uniform({3, 1})}));
}

void nn_ops(std::vector<GradCheckResult>& out, Source& src) {
  {
    const auto proj = src.uniform({3, 5, 5});
    out.push_back(gradcheck(
        "conv2d", [&](const TensorList& in) { return weighted_sum(conv2d(in[0], in[1], in[2], {1, 1, 1}), proj); },
        {src.uniform({2, 5, 5}), src.uniform({3, 2, 3, 3}), src.uniform({3})}));
  }
  {
    const auto proj = src.uniform({2, 2, 3, 3});
    out.push_back(gradcheck(
        "conv2d_stride2", [&](const TensorList& in) { return weighted_sum(conv2d(in[0], in[1], in[2], {2, 1, 1}), proj); },
        {src.uniform({2, 2, 5, 5}), src.uniform({2, 2, 3, 3}), src.uniform({2})}));
  }
  {
    const auto proj = src.uniform({2, 4, 4});
    out.push_back(gradcheck(
        "conv2d_1x1", [&](const TensorList& in) { return weighted_sum(conv2d(in[0], in[1], in[2], {}), proj); },
        {src.uniform({3, 4, 4}), src.uniform({2, 3, 1, 1}), src.uniform({2})}));
  }
  {
    const auto proj = src.uniform({1, 4, 4});
    out.push_back(gradcheck("channel_reduce_mean",
                            [&](const TensorList& in) { return weighted_sum(channel_reduce_mean(in[0]), proj); },
                            {src.uniform({3, 4, 4})}));
    // Values on a coarse grid plus small noise: the per-pixel max is never a near tie.
    auto x = src.uniform({3, 4, 4}, -0.01, 0.01);
    std::vector<double> v(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.1 * static_cast<double>((i * 7) % 11);
    out.push_back(gradcheck("channel_reduce_max",
                            [&](const TensorList& in) { return weighted_sum(channel_reduce_max(in[0]), proj); },
                            {Tensor<double>({3, 4, 4}, std::move(v))}));
  }
  {
    const auto proj = src.uniform({3, 1, 1});
    out.push_back(gradcheck("global_avg_pool",
                            [&](const TensorList& in) { return weighted_sum(global_avg_pool(in[0]), proj); },
                            {src.uniform({3, 4, 4})}));
  }
  {
    const auto proj = src.uniform({2, 6, 8});
    out.push_back(gradcheck("nearest_resize",
                            [&](const TensorList& in) { return weighted_sum(nearest_resize(in[0], 6, 8), proj); },
                            {src.uniform({2, 3, 4})}));
  }
  {
    const auto proj = src.uniform({2, 2, 3});
    out.push_back(gradcheck("avg_pool2x2",
                            [&](const TensorList& in) { return weighted_sum(avg_pool2x2(in[0]), proj); },
                            {src.uniform({2, 4, 6})}));
  }
  {
    const auto proj = src.uniform({2, 3, 4, 4});
    out.push_back(gradcheck(
        "instance_norm", [&](const TensorList& in) { return weighted_sum(instance_norm(in[0], in[1], in[2], 1e-5), proj); },
        {src.uniform({2, 3, 4, 4}), src.uniform({3}), src.uniform({3})}));
  }
}

void attention_modules(std::vector<GradCheckResult>& out, Source& src) {
  {
    InitStream stream(11);
    auto sam = init_sam<double>(stream);
    sam.fuse_conv.bias = src.uniform({1}, -0.2, 0.2);
    out.push_back(gradcheck(
        "sam", [&](const TensorList& in) {
          SamState<double> s{{in[1], in[2], sam.fuse_conv.geometry}};
          return sum(sam_forward(in[0], s).f_s);
        },
        {src.uniform({3, 5, 5}), sam.fuse_conv.weight, sam.fuse_conv.bias}));
  }
  {
    InitStream stream(12);
    const std::vector<std::int64_t> coarse{2, 3};
    auto cam = init_cam<double>(stream, coarse, 4);
    TensorList inputs{src.uniform({2, 3, 3}), src.uniform({3, 2, 2})};
    for (auto& p : params_of_cam(cam)) inputs.push_back(p);
    out.push_back(gradcheck(
        "cam_fuse_scales", [&](const TensorList& in) {
          CamState<double> c = cam;
          std::size_t k = 2;
          c.for_each_param("", [&](const std::string&, Tensor<double>& t) { t = in[k++]; });
          TensorList feats{in[0], in[1]};
          auto y = cam_fuse_scales<double>(feats, c, 6, 6);
          return sum(mul(y, y));
        },
        inputs));
  }
  for (CamVariant variant : {CamVariant::CamI, CamVariant::CamII}) {
    InitStream stream(13);
    const std::vector<std::int64_t> coarse{3};
    auto cam = init_cam<double>(stream, coarse, 4);
    TensorList inputs{src.uniform({4, 3, 3}), src.uniform({4, 3, 3})};
    for (auto& p : params_of_cam(cam)) inputs.push_back(add(p, src.uniform(p.shape(), -0.1, 0.1)).detach());
    out.push_back(gradcheck(
        std::string("cam_") + std::string(to_string(variant)), [&](const TensorList& in) {
          CamState<double> c = cam;
          std::size_t k = 2;
          c.for_each_param("", [&](const std::string&, Tensor<double>& t) { t = in[k++]; });
          return sum(cam_forward(in[0], in[1], c, variant).f_c);
        },
        inputs));
  }
  {
    const auto proj = src.uniform({3, 4, 4});
    out.push_back(gradcheck("dual_fuse",
                            [&](const TensorList& in) { return weighted_sum(dual_fuse(in[0], in[1]), proj); },
                            {src.uniform({3, 4, 4}), src.uniform({3, 4, 4})}));
  }
}

void models(std::vector<GradCheckResult>& out, Source& src) {
  const auto opts = model_options();
  for (const char* name : {"B1", "B2", "B3", "B4", "B5", "B6"}) {
    GeneratorConfig cfg;
    cfg.num_classes = 3;
    cfg.height = cfg.width = 8;
    cfg.widths = {2, 3, 3};
    cfg.attention = AttentionConfig::from_ablation(name);
    auto g = init_generator<double>(cfg, 50);
    jitter(g, src);
    const auto s = src.layout(3, 8, 8);
    const auto w = src.uniform({3, 8, 8});
    out.push_back(gradcheck(
        std::string("generator_") + name, [&](const TensorList& in) {
          auto local = g;
          assign_params(local, in, 0);
          return weighted_sum(generator_forward(s, local).image, w);
        },
        params_of(g), opts));
  }
  DiscriminatorConfig dcfg;
  dcfg.input_channels = 6;
  dcfg.widths = {4, 5, 6};
  auto d = init_discriminator<double>(dcfg, 80);
  jitter(d, src);
  const auto s = src.layout(3, 16, 16);
  auto objective = [](const std::vector<ScaleOutput<double>>& outs) {
    Tensor<double> total = Tensor<double>::scalar(0.0);
    for (const auto& o : outs) {
      total = add(total, sum(mul(o.logits, o.logits)));
      for (const auto& f : o.features) total = add(total, mean(f));
    }
    return total;
  };
  TensorList inputs{src.uniform({3, 16, 16})};
  for (auto& p : params_of(d)) inputs.push_back(p);
  out.push_back(gradcheck(
      "discriminator", [&](const TensorList& in) {
        auto local = d;
        assign_params(local, in, 1);
        return objective(discriminator_forward(s, in[0], local));
      },
      inputs, opts));
}

void losses(std::vector<GradCheckResult>& out, Source& src) {
  {
    // Shift by ±1 so the hinge kinks at ∓1 stay out of reach.
    auto r0 = src.off_kink({1, 4, 4});
    auto f0 = src.off_kink({1, 2, 2});
    out.push_back(gradcheck(
        "hinge", [](const TensorList& in) {
          TensorList real{in[0], in[1]}, fake{in[2], in[3]};
          return add(hinge_d_loss<double>(real, fake), hinge_g_loss<double>(fake));
        },
        {add_scalar(r0, 1.0).detach(), add_scalar(f0, -1.0).detach(), add_scalar(r0, -1.0).detach(),
         add_scalar(f0, 1.0).detach()}));
  }
  out.push_back(gradcheck(
      "lsgan", [](const TensorList& in) {
        TensorList real{in[0]}, fake{in[1]};
        return add(lsgan_d_loss<double>(real, fake), lsgan_g_loss<double>(fake));
      },
      {src.uniform({1, 3, 3}), src.uniform({1, 3, 3})}));
  {
    const auto real_a = src.uniform({2, 3, 3});
    const auto real_b = src.uniform({3, 2, 2});
    out.push_back(gradcheck(
        "feature_matching", [&](const TensorList& in) {
          std::vector<TensorList> r{{real_a}, {real_b}}, f{{in[0]}, {in[1]}};
          return feature_matching_loss<double>(r, f);
        },
        {add(real_a, src.off_kink({2, 3, 3})).detach(), add(real_b, src.off_kink({3, 2, 2})).detach()}));
  }
  const auto extractor = FixedExtractor<double>::make(7, std::vector<std::int64_t>{3, 4});
  {
    const auto real = src.uniform({3, 8, 8});
    out.push_back(gradcheck("perceptual", [&](const TensorList& in) { return perceptual_loss(real, in[0], extractor); },
                            {src.uniform({3, 8, 8})}));
  }
  {
    // Total generator objective through a fixed discriminator, w.r.t. the fake image.
    DiscriminatorConfig dcfg;
    dcfg.input_channels = 6;
    dcfg.widths = {3, 4};
    const auto d = init_discriminator<double>(dcfg, 90);
    const auto s = src.layout(3, 8, 8);
    const auto real = src.uniform({3, 8, 8});
    out.push_back(gradcheck(
        "generator_objective", [&](const TensorList& in) {
          const auto fake_out = discriminator_forward(s, in[0], d);
          const auto real_out = discriminator_forward(s, real, d);
          const auto fake_logits = logits_of(fake_out);
          const auto real_feats = features_of(real_out);
          const auto fake_feats = features_of(fake_out);
          GeneratorLossTerms<double> terms{hinge_g_loss<double>(fake_logits),
                                           feature_matching_loss<double>(real_feats, fake_feats),
                                           perceptual_loss(real, in[0], extractor)};
          return total_generator_loss(terms, LossWeights{});
        },
        {src.uniform({3, 8, 8})}, model_options()));
  }
}

}  // namespace

std::vector<GradCheckResult> gradient_suite() {
  std::vector<GradCheckResult> out;
  Source src(20240601);
  pointwise_ops(out, src);
  nn_ops(out, src);
  attention_modules(out, src);
  models(out, src);
  losses(out, src);
  return out;
}

}  // namespace dagan
