#include "dagan/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dagan/tape.hpp"

namespace dagan {

GeneratorConfig TrainConfig::generator() const {
  GeneratorConfig g;
  g.num_classes = num_classes;
  g.height = height;
  g.width = width;
  g.widths = gen_widths;
  g.attention = attention;
  return g;
}

DiscriminatorConfig TrainConfig::discriminator() const {
  DiscriminatorConfig d;
  d.input_channels = num_classes + 3;
  d.num_scales = disc_scales;
  d.widths = disc_widths;
  return d;
}

void TrainConfig::validate() const {
  generator().validate();
  discriminator().validate();
  weights.validate();
  adam_g().validate();
  adam_d().validate();
  if (!(lr_g > 0) || !(lr_d > 0)) throw std::invalid_argument("learning rates must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  const std::int64_t coarsest = std::int64_t{1} << disc_widths.size();
  if ((height >> (disc_scales - 1)) % coarsest != 0 || (width >> (disc_scales - 1)) % coarsest != 0) {
    throw std::invalid_argument("resolution too small for the discriminator depth");
  }
}

template <typename T>
TrainState<T> init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState<T> s;
  s.g = init_generator<T>(cfg.generator(), derive_seed(cfg.seed, 1));
  s.d = init_discriminator<T>(cfg.discriminator(), derive_seed(cfg.seed, 2));
  s.adam_g = AdamState<T>::zeros_like(s.g);
  s.adam_d = AdamState<T>::zeros_like(s.d);
  s.rng.seed(derive_seed(cfg.seed, 3));
  return s;
}

namespace {

template <typename T, typename State>
std::vector<Tensor<T>*> param_ptrs(State& s) {
  std::vector<Tensor<T>*> out;
  s.for_each_param([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
  return out;
}

/// Copy of `s` whose parameters are leaves of `tape`.
template <typename T, typename State>
State watched(const State& s, Tape<T>& tape) {
  State copy = s;
  copy.for_each_param([&](const std::string&, Tensor<T>& t) { t = tape.watch(t); });
  return copy;
}

template <typename T, typename State>
std::vector<Tensor<T>> grads_of(const Gradients<T>& grads, const State& watched_state) {
  std::vector<Tensor<T>> out;
  watched_state.for_each_param([&](const std::string&, const Tensor<T>& t) { out.push_back(grads.wrt(t)); });
  return out;
}

template <typename T>
double checked(const Tensor<T>& loss, const char* what) {
  const double v = static_cast<double>(loss.item());
  if (!std::isfinite(v)) throw NonFiniteError(what, 0);
  return v;
}

}  // namespace

template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& layouts, const Tensor<T>& images, const Tensor<T>& fake,
                             const DiscriminatorState<T>& d, const TrainConfig& cfg) {
  const auto real_out = discriminator_forward(layouts, images, d);
  const auto fake_out = discriminator_forward(layouts, fake.detach(), d);
  return d_adversarial_loss<T>(cfg.adv_loss, logits_of(real_out), logits_of(fake_out));
}

template <typename T>
GeneratorLossTerms<T> generator_loss_terms(const Tensor<T>& layouts, const Tensor<T>& images, const Tensor<T>& fake,
                                           const DiscriminatorState<T>& d, const TrainConfig& cfg,
                                           const FixedExtractor<T>& extractor) {
  DiscriminatorState<T> frozen = d;
  frozen.for_each_param([](const std::string&, Tensor<T>& t) { t = t.detach(); });
  std::vector<std::vector<Tensor<T>>> real_feats;
  {
    NoGradGuard<T> no_grad;
    real_feats = features_of(discriminator_forward(layouts, images, frozen));
  }
  const auto fake_out = discriminator_forward(layouts, fake, frozen);
  return {g_adversarial_loss<T>(cfg.adv_loss, logits_of(fake_out)),
          feature_matching_loss<T>(real_feats, features_of(fake_out)), perceptual_loss(images, fake, extractor)};
}

template <typename T>
LossRecord train_step(const Tensor<T>& layouts, const Tensor<T>& images, TrainState<T>& state,
                      const TrainConfig& cfg, const FixedExtractor<T>& extractor) {
  LossRecord rec;
  // The generator graph is built once; G's parameters do not change during
  // the discriminator update, so it stays valid for the generator update.
  Tape<T> g_tape;
  const GeneratorState<T> g = watched<T>(state.g, g_tape);
  const Tensor<T> fake = generator_forward(layouts, g).image;

  {
    Tape<T> d_tape;
    const DiscriminatorState<T> d = watched<T>(state.d, d_tape);
    const Tensor<T> d_loss = discriminator_loss(layouts, images, fake, d, cfg);
    rec.d_loss = checked(d_loss, "d_loss");
    const auto grads = grads_of(backward(d_tape, d_loss), d);
    const auto params = param_ptrs<T>(state.d);
    adam_step<T>(params, grads, state.adam_d, cfg.adam_d());
  }

  // Back on g_tape, through the updated discriminator.
  const GeneratorLossTerms<T> terms = generator_loss_terms(layouts, images, fake, state.d, cfg, extractor);
  const Tensor<T> total = total_generator_loss(terms, cfg.weights);
  rec.g_cgan = checked(terms.cgan, "g_cgan");
  rec.g_fm = checked(terms.fm, "g_fm");
  rec.g_perc = checked(terms.perc, "g_perc");
  rec.g_total = checked(total, "g_total");
  const auto grads = grads_of(backward(g_tape, total), g);
  const auto params = param_ptrs<T>(state.g);
  adam_step<T>(params, grads, state.adam_g, cfg.adam_g());
  state.step += 1;
  return rec;
}

std::string format_log_line(std::uint64_t step, const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu %.6f %.6f %.6f %.6f %.6f", static_cast<unsigned long long>(step), r.d_loss,
                r.g_cgan, r.g_fm, r.g_perc, r.g_total);
  return buf;
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  std::vector<Tensor<T>> rows;
  rows.reserve(items.size());
  for (const auto& t : items) {
    Shape s = t.shape();
    s.insert(s.begin(), 1);
    rows.push_back(reshape(t, s));
  }
  return concat<T>(std::span<const Tensor<T>>(rows), 0);
}

template <typename T>
Dataset<T> Dataset<T>::from_scenes(const SceneConfig& scenes, std::uint64_t first, std::uint64_t count) {
  Dataset d;
  for (std::uint64_t i = 0; i < count; ++i) {
    Layout l = generate_layout(scenes, first + i);
    d.onehots.push_back(one_hot<T>(l, scenes.num_classes));
    d.images.push_back(from_rgb<T>(to_rgb(render<double>(l))));
    d.layouts.push_back(std::move(l));
  }
  return d;
}

template <typename T>
Dataset<T> Dataset<T>::from_directory(const std::filesystem::path& dir, std::int64_t num_classes) {
  Dataset d;
  for (const auto& stem : list_layouts(dir)) {
    Layout l = from_pgm(decode_pgm(read_file(dir / "layouts" / (stem.string() + ".pgm"))));
    const RgbImage img = decode_ppm(read_file(dir / "images" / (stem.string() + ".ppm")));
    if (img.width != l.width || img.height != l.height) {
      throw std::runtime_error("image and layout sizes differ for sample " + stem.string());
    }
    d.onehots.push_back(one_hot<T>(l, num_classes));
    d.images.push_back(from_rgb<T>(img));
    d.layouts.push_back(std::move(l));
  }
  if (d.layouts.empty()) throw std::runtime_error("no samples in " + dir.string());
  return d;
}

template <typename T>
void train_epoch(const Dataset<T>& data, TrainState<T>& state, const TrainConfig& cfg,
                 const FixedExtractor<T>& extractor, const StepCallback& on_step) {
  if (data.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle<std::size_t>(order, state.rng);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::vector<Tensor<T>> lay, img;
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
      lay.push_back(data.onehots[order[i]]);
      img.push_back(data.images[order[i]]);
    }
    const LossRecord rec = train_step(stack<T>(lay), stack<T>(img), state, cfg, extractor);
    if (on_step) on_step(state.step, rec);
  }
  state.epoch += 1;
}

template <typename T>
std::vector<Tensor<T>> synthesize_all(const GeneratorState<T>& g, const Dataset<T>& data, std::int64_t batch_size) {
  NoGradGuard<T> no_grad;
  std::vector<Tensor<T>> out;
  const auto bs = static_cast<std::size_t>(std::max<std::int64_t>(1, batch_size));
  for (std::size_t start = 0; start < data.size(); start += bs) {
    const std::size_t n = std::min(bs, data.size() - start);
    const Tensor<T> images =
        generator_forward(stack<T>(std::span<const Tensor<T>>(data.onehots.data() + start, n)), g).image;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(reshape(slice(images, 0, static_cast<std::int64_t>(i), 1),
                            {3, images.dim(2), images.dim(3)}));
    }
  }
  return out;
}

namespace {

template <typename T>
std::vector<double> embeddings(std::span<const Tensor<T>> images, const FixedExtractor<T>& e, std::int64_t& dim) {
  std::vector<double> out;
  for (const auto& img : images) {
    const Tensor<T> emb = e.embedding(img);
    dim = static_cast<std::int64_t>(emb.size());
    for (T v : emb.data()) out.push_back(static_cast<double>(v));
  }
  return out;
}

}  // namespace

template <typename T>
EvalReport evaluate_images(std::span<const Tensor<T>> generated, const Dataset<T>& data,
                           const FixedExtractor<T>& extractor, std::int64_t num_classes) {
  if (generated.size() != data.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(generated.size()) + " generated images for " +
                                std::to_string(data.size()) + " samples");
  }
  NoGradGuard<T> no_grad;
  std::vector<Layout> preds;
  for (const auto& img : generated) preds.push_back(oracle_segment(img, num_classes));
  const ConfusionMatrix cm = confusion(preds, data.layouts, num_classes);
  EvalReport r;
  r.miou = miou(cm).miou;
  r.pixel_acc = pixel_acc(cm);
  std::int64_t d = 0;
  const auto fake_emb = embeddings(generated, extractor, d);
  const auto real_emb = embeddings(std::span<const Tensor<T>>(data.images), extractor, d);
  const auto n = static_cast<std::int64_t>(data.size());
  r.frechet = frechet_distance(gaussian_stats(real_emb, n, d), gaussian_stats(fake_emb, n, d));
  return r;
}

template <typename T>
EvalReport evaluate(const GeneratorState<T>& g, const Dataset<T>& data, const FixedExtractor<T>& extractor,
                    std::int64_t batch_size) {
  const auto fakes = synthesize_all(g, data, batch_size);
  return evaluate_images<T>(fakes, data, extractor, g.config.num_classes);
}

namespace {

template <typename T>
CheckpointEntry float_entry(const std::string& name, const Tensor<T>& t) {
  CheckpointEntry e;
  e.name = name;
  e.type = t.dtype() == DType::F32 ? EntryType::F32 : EntryType::F64;
  for (auto d : t.shape()) e.dims.push_back(static_cast<std::uint32_t>(d));
  const auto data = t.data();
  e.bytes.assign(reinterpret_cast<const char*>(data.data()), data.size_bytes());
  return e;
}

CheckpointEntry u64_entry(const std::string& name, std::span<const std::uint64_t> values) {
  CheckpointEntry e;
  e.name = name;
  e.type = EntryType::U64;
  e.dims = {static_cast<std::uint32_t>(values.size())};
  e.bytes.assign(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  return e;
}

std::vector<std::uint64_t> u64_values(const CheckpointEntry& e) {
  std::vector<std::uint64_t> v(e.bytes.size() / 8);
  std::memcpy(v.data(), e.bytes.data(), e.bytes.size());
  return v;
}

template <typename T>
void load_into(Tensor<T>& t, const CheckpointEntry& e) {
  std::vector<T> v(t.size());
  if (e.bytes.size() != v.size() * sizeof(T)) throw CheckpointError(CheckpointError::Kind::Framing, "size of " + e.name);
  std::memcpy(v.data(), e.bytes.data(), e.bytes.size());
  t = Tensor<T>(t.shape(), std::move(v));
}

std::vector<std::uint64_t> engine_words(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  std::istringstream is(os.str());
  std::vector<std::uint64_t> words;
  for (std::uint64_t w; is >> w;) words.push_back(w);
  return words;
}

template <typename T>
void adam_entries(std::vector<CheckpointEntry>& out, const std::string& prefix, const AdamState<T>& a) {
  for (std::size_t i = 0; i < a.m.size(); ++i) out.push_back(float_entry(prefix + ".m." + a.names[i], a.m[i]));
  for (std::size_t i = 0; i < a.v.size(); ++i) out.push_back(float_entry(prefix + ".v." + a.names[i], a.v[i]));
  const std::uint64_t t = a.t;
  out.push_back(u64_entry(prefix + ".t", std::span<const std::uint64_t>(&t, 1)));
}

template <typename T>
std::size_t restore_adam(AdamState<T>& a, const std::vector<CheckpointEntry>& entries, std::size_t k) {
  for (auto& m : a.m) load_into(m, entries[k++]);
  for (auto& v : a.v) load_into(v, entries[k++]);
  a.t = u64_values(entries[k++]).at(0);
  return k;
}

}  // namespace

template <typename T>
Checkpoint snapshot(const TrainState<T>& state) {
  Checkpoint c;
  state.g.for_each_param([&](const std::string& n, const Tensor<T>& t) { c.params.push_back(float_entry("g." + n, t)); });
  state.d.for_each_param([&](const std::string& n, const Tensor<T>& t) { c.params.push_back(float_entry("d." + n, t)); });
  adam_entries(c.optimizer, "adam_g", state.adam_g);
  adam_entries(c.optimizer, "adam_d", state.adam_d);
  const auto words = engine_words(state.rng);
  c.rng.push_back(u64_entry("rng.engine", words));
  const std::uint64_t progress[2] = {state.epoch, state.step};
  c.rng.push_back(u64_entry("train.epoch", std::span<const std::uint64_t>(progress, 1)));
  c.rng.push_back(u64_entry("train.step", std::span<const std::uint64_t>(progress + 1, 1)));
  return c;
}

template <typename T>
void restore(TrainState<T>& state, const Checkpoint& ckpt) {
  const Checkpoint layout = snapshot(state);
  // Re-validate in case `ckpt` was not parsed against this state.
  (void)parse_checkpoint(serialize_checkpoint(ckpt), layout);
  std::size_t k = 0;
  state.g.for_each_param([&](const std::string&, Tensor<T>& t) { load_into(t, ckpt.params[k++]); });
  state.d.for_each_param([&](const std::string&, Tensor<T>& t) { load_into(t, ckpt.params[k++]); });
  k = restore_adam(state.adam_g, ckpt.optimizer, 0);
  restore_adam(state.adam_d, ckpt.optimizer, k);
  std::ostringstream os;
  for (auto w : u64_values(ckpt.rng[0])) os << w << ' ';
  std::istringstream is(os.str());
  is >> state.rng;
  if (!is) throw CheckpointError(CheckpointError::Kind::Framing, "rng.engine does not hold a valid engine state");
  state.epoch = u64_values(ckpt.rng[1]).at(0);
  state.step = u64_values(ckpt.rng[2]).at(0);
}

#define DAGAN_INSTANTIATE(T)                                                                          \
  template TrainState<T> init_train_state(const TrainConfig&);                                        \
  template Tensor<T> discriminator_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                        const DiscriminatorState<T>&, const TrainConfig&);            \
  template GeneratorLossTerms<T> generator_loss_terms(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                                      const DiscriminatorState<T>&, const TrainConfig&,     \
                                                      const FixedExtractor<T>&);                   \
  template LossRecord train_step(const Tensor<T>&, const Tensor<T>&, TrainState<T>&, const TrainConfig&, \
                                 const FixedExtractor<T>&);                                           \
  template Tensor<T> stack(std::span<const Tensor<T>>);                                               \
  template struct Dataset<T>;                                                                         \
  template void train_epoch(const Dataset<T>&, TrainState<T>&, const TrainConfig&,                    \
                            const FixedExtractor<T>&, const StepCallback&);                           \
  template std::vector<Tensor<T>> synthesize_all(const GeneratorState<T>&, const Dataset<T>&, std::int64_t); \
  template EvalReport evaluate_images(std::span<const Tensor<T>>, const Dataset<T>&,                    \
                                      const FixedExtractor<T>&, std::int64_t);                          \
  template EvalReport evaluate(const GeneratorState<T>&, const Dataset<T>&, const FixedExtractor<T>&,      \
                               std::int64_t);                                                         \
  template Checkpoint snapshot(const TrainState<T>&);                                                 \
  template void restore(TrainState<T>&, const Checkpoint&);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
