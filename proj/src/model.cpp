#include "dagan/model.hpp"

#include <stdexcept>

namespace dagan {

AttentionConfig AttentionConfig::from_ablation(std::string_view name) {
  if (name == "B1") return {false, std::nullopt};
  if (name == "B2") return {true, std::nullopt};
  if (name == "B3") return {false, CamVariant::CamI};
  if (name == "B4") return {false, CamVariant::CamII};
  if (name == "B5") return {true, CamVariant::CamI};
  if (name == "B6") return {true, CamVariant::CamII};
  throw std::invalid_argument("unknown ablation '" + std::string(name) + "' (expected B1..B6)");
}

std::string AttentionConfig::ablation_name() const {
  if (!cam) return sam ? "B2" : "B1";
  if (*cam == CamVariant::CamI) return sam ? "B5" : "B3";
  return sam ? "B6" : "B4";
}

void GeneratorConfig::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("generator needs at least 2 scales");
  for (auto w : widths) {
    if (w < 1) throw std::invalid_argument("generator widths must be positive");
  }
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  const std::int64_t factor = std::int64_t{1} << (widths.size() - 1);
  if (height < 1 || width < 1 || height % factor != 0 || width % factor != 0) {
    throw std::invalid_argument("resolution " + std::to_string(height) + "x" +
                                std::to_string(width) + " is not divisible by 2^" +
                                std::to_string(widths.size() - 1));
  }
}

void DiscriminatorConfig::validate() const {
  if (num_scales < 1) throw std::invalid_argument("discriminator needs at least one scale");
  if (widths.empty()) throw std::invalid_argument("discriminator needs at least one layer");
  if (input_channels < 1) throw std::invalid_argument("discriminator input channels must be positive");
}

template <typename T>
GeneratorState<T> init_generator(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  InitStream stream(seed);
  GeneratorState<T> g;
  g.config = config;
  const std::size_t l = config.widths.size();
  std::int64_t in = config.num_classes;
  for (std::size_t i = 0; i + 1 < l; ++i) {
    g.encoder.push_back({init_conv<T>(stream, in, config.widths[i], 3, {2, 1, 1}),
                         init_instance_norm<T>(config.widths[i])});
    in = config.widths[i];
  }
  const std::int64_t c = config.channels();
  g.decoder = {init_conv<T>(stream, in, c, 3, {1, 1, 1}), init_instance_norm<T>(c)};
  if (config.attention.sam) g.sam = init_sam<T>(stream);
  if (config.attention.cam) {
    std::vector<std::int64_t> coarse(config.widths.begin(), config.widths.end() - 1);
    g.cam = init_cam<T>(stream, coarse, c);
  }
  g.out_conv = init_conv<T>(stream, c, 3, 3, {1, 1, 1});
  return g;
}

template <typename T>
DiscriminatorState<T> init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed) {
  config.validate();
  InitStream stream(seed);
  DiscriminatorState<T> d;
  d.config = config;
  for (int s = 0; s < config.num_scales; ++s) {
    PatchDiscriminator<T> p;
    std::int64_t in = config.input_channels;
    for (std::size_t b = 0; b < config.widths.size(); ++b) {
      ConvBlock<T> block{init_conv<T>(stream, in, config.widths[b], 3, {2, 1, 1}), std::nullopt};
      if (b > 0) block.norm = init_instance_norm<T>(config.widths[b]);
      p.blocks.push_back(std::move(block));
      in = config.widths[b];
    }
    p.head = init_conv<T>(stream, in, 1, 3, {1, 1, 1});
    d.scales.push_back(std::move(p));
  }
  return d;
}

namespace {

template <typename T>
Tensor<T> apply_block(const Tensor<T>& x, const ConvBlock<T>& b) {
  Tensor<T> y = conv2d(x, b.conv);
  if (b.norm) y = instance_norm(y, *b.norm);
  return y;
}

}  // namespace

template <typename T>
std::vector<Tensor<T>> backbone_forward(const Tensor<T>& s_onehot, const GeneratorState<T>& g) {
  const auto& cfg = g.config;
  const int channel_axis = s_onehot.rank() - 3;
  if (channel_axis < 0 || s_onehot.dim(channel_axis) != cfg.num_classes ||
      s_onehot.dim(-2) != cfg.height || s_onehot.dim(-1) != cfg.width) {
    throw ShapeError("backbone: expected " + std::to_string(cfg.num_classes) + "×" +
                     std::to_string(cfg.height) + "×" + std::to_string(cfg.width) +
                     " layout, got " + to_string(s_onehot.shape()));
  }
  std::vector<Tensor<T>> features;
  Tensor<T> x = s_onehot;
  for (const auto& stage : g.encoder) {
    x = relu(apply_block(x, stage));
    features.push_back(x);
  }
  x = nearest_resize(x, cfg.height, cfg.width);
  features.push_back(relu(apply_block(x, g.decoder)));
  return features;
}

template <typename T>
GeneratorOutput<T> generator_forward(const Tensor<T>& s_onehot, const GeneratorState<T>& g) {
  const std::vector<Tensor<T>> features = backbone_forward(s_onehot, g);
  const Tensor<T>& f_l = features.back();
  GeneratorOutput<T> out;
  auto& attn = out.attention;
  if (g.sam) {
    SamResult<T> s = sam_forward(f_l, *g.sam);
    attn.f_s = std::move(s.f_s);
    attn.a_s = std::move(s.a_s);
  }
  if (g.cam) {
    std::span<const Tensor<T>> coarse(features.data(), features.size() - 1);
    const Tensor<T> f_tilde = cam_fuse_scales(coarse, *g.cam, g.config.height, g.config.width);
    CamResult<T> c = cam_forward(f_tilde, f_l, *g.cam, *g.config.attention.cam);
    attn.f_c = std::move(c.f_c);
    attn.delta = std::move(c.delta);
  }
  Tensor<T> fused = f_l;
  if (attn.f_s && attn.f_c) {
    fused = dual_fuse(*attn.f_s, *attn.f_c);
  } else if (attn.f_s) {
    fused = *attn.f_s;
  } else if (attn.f_c) {
    fused = *attn.f_c;
  }
  out.image = tanh(conv2d(fused, g.out_conv));
  return out;
}

template <typename T>
std::vector<ScaleOutput<T>> discriminator_forward(const Tensor<T>& s_onehot,
                                                  const Tensor<T>& image,
                                                  const DiscriminatorState<T>& d) {
  if (s_onehot.rank() != image.rank() || s_onehot.dim(-1) != image.dim(-1) ||
      s_onehot.dim(-2) != image.dim(-2)) {
    throw ShapeError("discriminator: layout " + to_string(s_onehot.shape()) +
                     " and image " + to_string(image.shape()) + " disagree");
  }
  const int channel_axis = image.rank() - 3;
  Tensor<T> x = concat({s_onehot, image}, channel_axis);
  if (x.dim(channel_axis) != d.config.input_channels) {
    throw ShapeError("discriminator: expected " + std::to_string(d.config.input_channels) +
                     " input channels, got " + std::to_string(x.dim(channel_axis)));
  }
  const T slope = static_cast<T>(d.config.slope);
  std::vector<ScaleOutput<T>> outputs;
  for (std::size_t s = 0; s < d.scales.size(); ++s) {
    if (s > 0) x = avg_pool2x2(x);
    ScaleOutput<T> o;
    Tensor<T> h = x;
    for (const auto& block : d.scales[s].blocks) {
      h = leaky_relu(apply_block(h, block), slope);
      o.features.push_back(h);
    }
    o.logits = conv2d(h, d.scales[s].head);
    outputs.push_back(std::move(o));
  }
  return outputs;
}

ParamCounts count_params(const GeneratorConfig& g, const DiscriminatorConfig& d) {
  return {param_count(init_generator<float>(g, 0)), param_count(init_discriminator<float>(d, 0))};
}

#define DAGAN_INSTANTIATE(T)                                                                   \
  template GeneratorState<T> init_generator(const GeneratorConfig&, std::uint64_t);            \
  template DiscriminatorState<T> init_discriminator(const DiscriminatorConfig&, std::uint64_t); \
  template std::vector<Tensor<T>> backbone_forward(const Tensor<T>&, const GeneratorState<T>&); \
  template GeneratorOutput<T> generator_forward(const Tensor<T>&, const GeneratorState<T>&);   \
  template std::vector<ScaleOutput<T>> discriminator_forward(const Tensor<T>&, const Tensor<T>&, \
                                                             const DiscriminatorState<T>&);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
