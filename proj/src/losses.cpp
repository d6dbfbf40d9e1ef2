#include "dagan/losses.hpp"

#include <array>
#include <stdexcept>

namespace dagan {

void LossWeights::validate() const {
  if (lambda_cgan < 0 || lambda_f < 0 || lambda_p < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

std::string_view to_string(AdversarialLoss kind) {
  return kind == AdversarialLoss::Hinge ? "hinge" : "lsgan";
}

AdversarialLoss parse_adversarial_loss(std::string_view text) {
  if (text == "hinge") return AdversarialLoss::Hinge;
  if (text == "lsgan" || text == "least-squares") return AdversarialLoss::LeastSquares;
  throw std::invalid_argument("unknown adversarial loss '" + std::string(text) + "'");
}

namespace {

void check_scales(std::string_view op, std::size_t a, std::size_t b) {
  if (a == 0) throw ShapeError(std::string(op) + ": no scales");
  if (a != b) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a) + " real scales vs " +
                     std::to_string(b) + " fake scales");
  }
}

/// Averages per-scale scalars in a fixed order.
template <typename T>
Tensor<T> mean_of(const std::vector<Tensor<T>>& terms) {
  Tensor<T> total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return terms.size() == 1 ? total : scale(total, static_cast<T>(1.0 / static_cast<double>(terms.size())));
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return mul(x, x);
}

}  // namespace

template <typename T>
Tensor<T> hinge_d_loss(std::span<const Tensor<T>> real_logits, std::span<const Tensor<T>> fake_logits) {
  check_scales("hinge_d_loss", real_logits.size(), fake_logits.size());
  std::vector<Tensor<T>> per_scale;
  for (std::size_t s = 0; s < real_logits.size(); ++s) {
    const Tensor<T> r = mean(relu(add_scalar(neg(real_logits[s]), T(1))));
    const Tensor<T> f = mean(relu(add_scalar(fake_logits[s], T(1))));
    per_scale.push_back(add(r, f));
  }
  return mean_of(per_scale);
}

template <typename T>
Tensor<T> hinge_g_loss(std::span<const Tensor<T>> fake_logits) {
  check_scales("hinge_g_loss", fake_logits.size(), fake_logits.size());
  std::vector<Tensor<T>> per_scale;
  for (const auto& f : fake_logits) per_scale.push_back(mean(f));
  return neg(mean_of(per_scale));
}

template <typename T>
Tensor<T> lsgan_d_loss(std::span<const Tensor<T>> real_logits, std::span<const Tensor<T>> fake_logits) {
  check_scales("lsgan_d_loss", real_logits.size(), fake_logits.size());
  std::vector<Tensor<T>> per_scale;
  for (std::size_t s = 0; s < real_logits.size(); ++s) {
    per_scale.push_back(add(mean(square(add_scalar(real_logits[s], T(-1)))), mean(square(fake_logits[s]))));
  }
  return mean_of(per_scale);
}

template <typename T>
Tensor<T> lsgan_g_loss(std::span<const Tensor<T>> fake_logits) {
  check_scales("lsgan_g_loss", fake_logits.size(), fake_logits.size());
  std::vector<Tensor<T>> per_scale;
  for (const auto& f : fake_logits) per_scale.push_back(mean(square(add_scalar(f, T(-1)))));
  return mean_of(per_scale);
}

template <typename T>
Tensor<T> d_adversarial_loss(AdversarialLoss kind, std::span<const Tensor<T>> real_logits,
                             std::span<const Tensor<T>> fake_logits) {
  return kind == AdversarialLoss::Hinge ? hinge_d_loss(real_logits, fake_logits)
                                        : lsgan_d_loss(real_logits, fake_logits);
}

template <typename T>
Tensor<T> g_adversarial_loss(AdversarialLoss kind, std::span<const Tensor<T>> fake_logits) {
  return kind == AdversarialLoss::Hinge ? hinge_g_loss(fake_logits) : lsgan_g_loss(fake_logits);
}

template <typename T>
Tensor<T> feature_matching_loss(std::span<const std::vector<Tensor<T>>> real_feats,
                                std::span<const std::vector<Tensor<T>>> fake_feats) {
  check_scales("feature_matching_loss", real_feats.size(), fake_feats.size());
  std::vector<Tensor<T>> per_scale;
  for (std::size_t s = 0; s < real_feats.size(); ++s) {
    const auto& r = real_feats[s];
    const auto& f = fake_feats[s];
    if (r.size() != f.size() || r.empty()) {
      throw ShapeError("feature_matching_loss: scale " + std::to_string(s) + " has " +
                       std::to_string(r.size()) + " real vs " + std::to_string(f.size()) +
                       " fake layers");
    }
    std::vector<Tensor<T>> per_layer;
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r[k].shape() != f[k].shape()) {
        throw ShapeError("feature_matching_loss: layer shapes " + to_string(r[k].shape()) + " vs " +
                         to_string(f[k].shape()));
      }
      per_layer.push_back(mean(abs(sub(f[k], r[k].detach()))));
    }
    per_scale.push_back(mean_of(per_layer));
  }
  return mean_of(per_scale);
}

template <typename T>
std::span<const std::int64_t> FixedExtractor<T>::default_widths() {
  static constexpr std::array<std::int64_t, 4> widths{16, 32, 64, 64};
  return widths;
}

template <typename T>
FixedExtractor<T> FixedExtractor<T>::make(std::uint64_t seed, std::span<const std::int64_t> widths) {
  if (widths.empty()) throw std::invalid_argument("extractor needs at least one layer");
  InitStream stream(seed);
  FixedExtractor e;
  std::int64_t in = 3;
  for (std::int64_t w : widths) {
    e.layers.push_back(init_conv<T>(stream, in, w, 3, {2, 1, 1}));
    in = w;
  }
  return e;
}

template <typename T>
std::vector<Tensor<T>> FixedExtractor<T>::features(const Tensor<T>& image) const {
  std::vector<Tensor<T>> out;
  Tensor<T> x = image;
  for (const auto& layer : layers) {
    x = leaky_relu(conv2d(x, layer.weight.detach(), layer.bias.detach(), layer.geometry), slope);
    out.push_back(x);
  }
  return out;
}

template <typename T>
Tensor<T> FixedExtractor<T>::embedding(const Tensor<T>& image) const {
  Tensor<T> pooled = global_avg_pool(features(image).back());
  Shape shape = pooled.shape();
  shape.resize(shape.size() - 2);
  return reshape(pooled, shape);
}

template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& real_img, const Tensor<T>& fake_img,
                          const FixedExtractor<T>& e) {
  if (real_img.shape() != fake_img.shape()) {
    throw ShapeError("perceptual_loss: " + to_string(real_img.shape()) + " vs " +
                     to_string(fake_img.shape()));
  }
  const auto r = e.features(real_img.detach());
  const auto f = e.features(fake_img);
  std::vector<Tensor<T>> per_level;
  for (std::size_t k = 0; k < r.size(); ++k) per_level.push_back(mean(abs(sub(f[k], r[k]))));
  return mean_of(per_level);
}

template <typename T>
Tensor<T> total_generator_loss(const GeneratorLossTerms<T>& terms, const LossWeights& w) {
  w.validate();
  return add(add(scale(terms.cgan, static_cast<T>(w.lambda_cgan)), scale(terms.fm, static_cast<T>(w.lambda_f))),
             scale(terms.perc, static_cast<T>(w.lambda_p)));
}

template <typename T>
std::vector<Tensor<T>> logits_of(const std::vector<ScaleOutput<T>>& outputs) {
  std::vector<Tensor<T>> out;
  for (const auto& o : outputs) out.push_back(o.logits);
  return out;
}

template <typename T>
std::vector<std::vector<Tensor<T>>> features_of(const std::vector<ScaleOutput<T>>& outputs) {
  std::vector<std::vector<Tensor<T>>> out;
  for (const auto& o : outputs) out.push_back(o.features);
  return out;
}

#define DAGAN_INSTANTIATE(T)                                                                          \
  template Tensor<T> hinge_d_loss(std::span<const Tensor<T>>, std::span<const Tensor<T>>);            \
  template Tensor<T> hinge_g_loss(std::span<const Tensor<T>>);                                        \
  template Tensor<T> lsgan_d_loss(std::span<const Tensor<T>>, std::span<const Tensor<T>>);            \
  template Tensor<T> lsgan_g_loss(std::span<const Tensor<T>>);                                        \
  template Tensor<T> d_adversarial_loss(AdversarialLoss, std::span<const Tensor<T>>,                  \
                                        std::span<const Tensor<T>>);                                  \
  template Tensor<T> g_adversarial_loss(AdversarialLoss, std::span<const Tensor<T>>);                 \
  template Tensor<T> feature_matching_loss(std::span<const std::vector<Tensor<T>>>,                   \
                                           std::span<const std::vector<Tensor<T>>>);                  \
  template struct FixedExtractor<T>;                                                                  \
  template Tensor<T> perceptual_loss(const Tensor<T>&, const Tensor<T>&, const FixedExtractor<T>&);   \
  template Tensor<T> total_generator_loss(const GeneratorLossTerms<T>&, const LossWeights&);          \
  template std::vector<Tensor<T>> logits_of(const std::vector<ScaleOutput<T>>&);                      \
  template std::vector<std::vector<Tensor<T>>> features_of(const std::vector<ScaleOutput<T>>&);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
