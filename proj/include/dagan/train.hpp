#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dagan/adam.hpp"
#include "dagan/checkpoint.hpp"
#include "dagan/data.hpp"
#include "dagan/eval.hpp"
#include "dagan/losses.hpp"
#include "dagan/model.hpp"
#include "dagan/random.hpp"

namespace dagan {

struct TrainConfig {
  std::uint64_t seed = 0;
  std::int64_t num_classes = 5;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::vector<std::int64_t> gen_widths{16, 32, 64, 64};
  std::vector<std::int64_t> disc_widths{32, 64, 128};
  int disc_scales = 2;
  AttentionConfig attention;
  AdversarialLoss adv_loss = AdversarialLoss::Hinge;
  LossWeights weights;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t batch_size = 4;
  std::int64_t epochs = 40;
  /// Seed of the frozen perceptual/Fréchet extractor. Kept apart from `seed`
  /// so metrics are comparable across training seeds.
  std::uint64_t extractor_seed = 7;

  GeneratorConfig generator() const;
  DiscriminatorConfig discriminator() const;
  AdamConfig adam_g() const { return {lr_g, beta1, beta2, eps}; }
  AdamConfig adam_d() const { return {lr_d, beta1, beta2, eps}; }
  /// Throws std::invalid_argument.
  void validate() const;
};

template <typename T>
struct TrainState {
  GeneratorState<T> g;
  DiscriminatorState<T> d;
  AdamState<T> adam_g;
  AdamState<T> adam_d;
  Rng rng;                  // batch order
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // completed steps
};

template <typename T>
TrainState<T> init_train_state(const TrainConfig& cfg);

struct LossRecord {
  double d_loss = 0;
  double g_cgan = 0;
  double g_fm = 0;
  double g_perc = 0;
  double g_total = 0;
};

/// Adversarial loss of `d` on the real pair against the fake pair. `fake` is
/// detached, so no gradient can reach the generator.
template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& layouts, const Tensor<T>& images, const Tensor<T>& fake,
                             const DiscriminatorState<T>& d, const TrainConfig& cfg);

/// The three generator terms. Discriminator weights are used detached, so
/// gradient reaches `fake` (and through it the generator) only.
template <typename T>
GeneratorLossTerms<T> generator_loss_terms(const Tensor<T>& layouts, const Tensor<T>& images, const Tensor<T>& fake,
                                           const DiscriminatorState<T>& d, const TrainConfig& cfg,
                                           const FixedExtractor<T>& extractor);

/// One discriminator update on (real pair, detached fake pair), then one
/// generator update through the freshly updated discriminator.
/// `layouts` is N×K×H×W one-hot, `images` N×3×H×W in [−1, 1].
/// Throws NonFiniteError (from the op that produced it) on a non-finite value.
template <typename T>
LossRecord train_step(const Tensor<T>& layouts, const Tensor<T>& images, TrainState<T>& state,
                      const TrainConfig& cfg, const FixedExtractor<T>& extractor);

/// `step d_loss g_cgan g_fm g_perc g_total`, six decimals, no newline.
std::string format_log_line(std::uint64_t step, const LossRecord& r);

template <typename T>
struct Dataset {
  std::vector<Layout> layouts;
  std::vector<Tensor<T>> onehots;  // K×H×W
  std::vector<Tensor<T>> images;   // 3×H×W

  std::size_t size() const { return layouts.size(); }
  /// Scenes [first, first + count), rendered and passed through 8-bit
  /// quantization so they match what `gen-data` writes.
  static Dataset from_scenes(const SceneConfig& scenes, std::uint64_t first, std::uint64_t count);
  /// Reads <dir>/layouts/*.pgm and the matching <dir>/images/*.ppm.
  static Dataset from_directory(const std::filesystem::path& dir, std::int64_t num_classes);
};

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items);

using StepCallback = std::function<void(std::uint64_t step, const LossRecord&)>;

/// One pass over `data` in an order drawn from state.rng; the last batch may
/// be short. Increments state.epoch when done.
template <typename T>
void train_epoch(const Dataset<T>& data, TrainState<T>& state, const TrainConfig& cfg,
                 const FixedExtractor<T>& extractor, const StepCallback& on_step = {});

struct EvalReport {
  double miou = 0;
  double pixel_acc = 0;
  double frechet = 0;  // generated vs real, over extractor embeddings
};

/// Generated images for every sample of `data`, computed without a tape.
template <typename T>
std::vector<Tensor<T>> synthesize_all(const GeneratorState<T>& g, const Dataset<T>& data, std::int64_t batch_size);

/// Oracle-segments `generated` (one image per sample of `data`, in order)
/// against the ground-truth layouts and compares extractor statistics of
/// generated and real images.
template <typename T>
EvalReport evaluate_images(std::span<const Tensor<T>> generated, const Dataset<T>& data,
                           const FixedExtractor<T>& extractor, std::int64_t num_classes);

/// Oracle-segments the generated images against the ground-truth layouts and
/// compares extractor statistics of generated and real images.
template <typename T>
EvalReport evaluate(const GeneratorState<T>& g, const Dataset<T>& data, const FixedExtractor<T>& extractor,
                    std::int64_t batch_size);

template <typename T>
Checkpoint snapshot(const TrainState<T>& state);
/// Overwrites `state` from `ckpt`; `state` must already have the right shapes.
template <typename T>
void restore(TrainState<T>& state, const Checkpoint& ckpt);

}  // namespace dagan
