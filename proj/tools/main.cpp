#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "dagan/eval.hpp"
#include "dagan/gradcheck.hpp"
#include "dagan/netpbm.hpp"
#include "dagan/train.hpp"

namespace fs = std::filesystem;
using namespace dagan;
using cli::Settings;
using cli::UsageError;

namespace {

// Training and inference run in single precision; the gradient suite is f64.
using Real = float;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

Settings load_settings(const Common& c, const std::optional<fs::path>& fallback = std::nullopt) {
  Settings s;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw UsageError("config file " + c.config + " does not exist");
    cli::apply_text(s, read_file(c.config), c.config);
  } else if (fallback && fs::exists(*fallback)) {
    cli::apply_text(s, read_file(*fallback), fallback->string());
  }
  cli::apply_overrides(s, c.overrides);
  s.validate();
  return s;
}

TrainState<Real> load_state(const Settings& s, const fs::path& checkpoint) {
  TrainState<Real> state = init_train_state<Real>(s.train);
  restore(state, load_checkpoint(checkpoint, snapshot(state)));
  return state;
}

std::string stem(std::uint64_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05llu", static_cast<unsigned long long>(i));
  return buf;
}

/// Log lines up to and including `last_step`; used to trim a log on resume.
std::string log_prefix(const fs::path& log, std::uint64_t last_step) {
  if (!fs::exists(log)) return "";
  std::istringstream in(read_file(log));
  std::string out;
  for (std::string line; std::getline(in, line);) {
    if (std::stoull(line.substr(0, line.find(' '))) > last_step) break;
    out += line + "\n";
  }
  return out;
}

int cmd_gen_data(const Common& c, const fs::path& out, std::uint64_t first, std::uint64_t count) {
  const Settings s = load_settings(c);
  write_split(s.scenes(), first, count, out);
  std::cout << "wrote " << count << " scenes to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& c, const fs::path& data_dir, const fs::path& out, const std::string& resume,
              const std::string& eval_dir) {
  const Settings s = load_settings(c);
  const TrainConfig& cfg = s.train;
  const auto data = Dataset<Real>::from_directory(data_dir, cfg.num_classes);
  std::optional<Dataset<Real>> eval_data;
  if (!eval_dir.empty()) eval_data = Dataset<Real>::from_directory(eval_dir, cfg.num_classes);
  const auto extractor = FixedExtractor<Real>::make(cfg.extractor_seed);

  fs::create_directories(out);
  write_file(out / "config.txt", cli::to_text(s));
  TrainState<Real> state = init_train_state<Real>(cfg);
  const fs::path log_path = out / "train.log";
  std::string log_head;
  if (!resume.empty()) {
    restore(state, load_checkpoint(resume, snapshot(state)));
    log_head = log_prefix(log_path, state.step);
  }
  {
    std::ofstream truncate(log_path, std::ios::binary | std::ios::trunc);
    truncate << log_head;
  }
  std::ofstream log(log_path, std::ios::binary | std::ios::app);
  std::ofstream eval_log;
  if (eval_data) eval_log.open(out / "eval.log", std::ios::binary | std::ios::app);

  while (state.epoch < static_cast<std::uint64_t>(cfg.epochs)) {
    train_epoch(data, state, cfg, extractor, [&](std::uint64_t step, const LossRecord& r) {
      log << format_log_line(step, r) << "\n";
    });
    log.flush();
    const bool last = state.epoch == static_cast<std::uint64_t>(cfg.epochs);
    std::cerr << "epoch " << state.epoch << " step " << state.step << "\n";
    if (last || state.epoch % static_cast<std::uint64_t>(s.checkpoint_every) == 0) {
      const Checkpoint ckpt = snapshot(state);
      save_checkpoint(out / ("epoch_" + stem(state.epoch) + ".dagn"), ckpt);
      if (last) save_checkpoint(out / "final.dagn", ckpt);
      if (eval_data) {
        const EvalReport r = evaluate(state.g, *eval_data, extractor, cfg.batch_size);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%llu %.6f %.6f %.6f\n", static_cast<unsigned long long>(state.epoch), r.miou,
                      r.pixel_acc, r.frechet);
        eval_log << buf << std::flush;
      }
    }
  }
  return 0;
}

int cmd_synthesize(const Common& c, const fs::path& checkpoint, const fs::path& layouts, const fs::path& out) {
  const Settings s = load_settings(c, checkpoint.parent_path() / "config.txt");
  const TrainState<Real> state = load_state(s, checkpoint);
  const auto stems = list_layouts(layouts);
  if (stems.empty()) throw std::runtime_error("no layouts in " + layouts.string());
  fs::create_directories(out / "images");
  for (const auto& st : stems) {
    const Layout l = from_pgm(decode_pgm(read_file(layouts / "layouts" / (st.string() + ".pgm"))));
    Tensor<Real> image;
    {
      NoGradGuard<Real> no_grad;
      image = generator_forward(one_hot<Real>(l, s.train.num_classes), state.g).image;
    }
    write_file(out / "images" / (st.string() + ".ppm"), encode_ppm(to_rgb(image)));
  }
  std::cout << "wrote " << stems.size() << " images to " << (out / "images").string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const fs::path& preds, const fs::path& gts) {
  const Settings s = load_settings(c);
  const auto data = Dataset<Real>::from_directory(gts, s.train.num_classes);
  std::vector<Tensor<Real>> generated;
  for (const auto& st : list_layouts(gts)) {
    const fs::path p = preds / "images" / (st.string() + ".ppm");
    if (!fs::exists(p)) throw std::runtime_error("missing generated image " + p.string());
    generated.push_back(from_rgb<Real>(decode_ppm(read_file(p))));
  }
  const auto extractor = FixedExtractor<Real>::make(s.train.extractor_seed);
  const EvalReport r = evaluate_images<Real>(generated, data, extractor, s.train.num_classes);
  std::printf("mIoU %.6f\nAcc %.6f\nFrechet %.6f\n", r.miou, r.pixel_acc, r.frechet);
  return 0;
}

int cmd_attn_viz(const Common& c, const fs::path& checkpoint, const fs::path& layout, const fs::path& out) {
  const Settings s = load_settings(c, checkpoint.parent_path() / "config.txt");
  const TrainState<Real> state = load_state(s, checkpoint);
  const Layout l = from_pgm(decode_pgm(read_file(layout)));
  GeneratorOutput<Real> result;
  {
    NoGradGuard<Real> no_grad;
    result = generator_forward(one_hot<Real>(l, s.train.num_classes), state.g);
  }
  auto written = export_attention(result.attention, out);
  write_file(out / "image.ppm", encode_ppm(to_rgb(result.image)));
  written.push_back(out / "image.ppm");
  for (const auto& p : written) std::cout << p.string() << "\n";
  return 0;
}

int cmd_gradcheck() {
  int failed = 0;
  for (const auto& r : gradient_suite()) {
    std::printf("%-4s %-24s max_rel_err %.3e  coords %zu\n", r.passed ? "ok" : "FAIL", r.name.c_str(),
                r.max_rel_error, r.coords_checked);
    failed += !r.passed;
  }
  std::printf("%d failed\n", failed);
  return failed == 0 ? 0 : 1;
}

int cmd_params(const Common& c) {
  const Settings s = load_settings(c);
  const ParamCounts p = count_params(s.train.generator(), s.train.discriminator());
  std::printf("Gen. %lld\nDis. %lld\nTotal %lld\n", static_cast<long long>(p.generator),
              static_cast<long long>(p.discriminator), static_cast<long long>(p.total()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual attention GAN for semantic image synthesis on procedural shapes"};
  app.require_subcommand(1);
  Common common;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key = value config file");
    sub->allow_extras();
    return sub;
  };

  fs::path out, data, layouts, preds, gts, checkpoint, layout;
  std::uint64_t first = 0, count = 200;
  std::string resume, eval_dir;

  auto* gen = with_config(app.add_subcommand("gen-data", "Write a shapes-world split"));
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--first", first, "index of the first scene");
  gen->add_option("--count", count, "number of scenes");

  auto* train = with_config(app.add_subcommand("train", "Train a model"));
  train->add_option("--data", data, "training split directory")->required();
  train->add_option("--out", out, "run directory for log, checkpoints and config")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--eval-data", eval_dir, "split evaluated at every checkpoint");

  auto* synth = with_config(app.add_subcommand("synthesize", "Generate images for a directory of layouts"));
  synth->add_option("--checkpoint", checkpoint)->required();
  synth->add_option("--layouts", layouts, "directory containing layouts/")->required();
  synth->add_option("--out", out)->required();

  auto* eval = with_config(app.add_subcommand("eval", "mIoU, accuracy and Frechet distance"));
  eval->add_option("--preds", preds, "directory containing images/")->required();
  eval->add_option("--gts", gts, "split directory with layouts/ and images/")->required();

  auto* viz = with_config(app.add_subcommand("attn-viz", "Export attention maps for one layout"));
  viz->add_option("--checkpoint", checkpoint)->required();
  viz->add_option("--layout", layout, "layout PGM")->required();
  viz->add_option("--out", out)->required();

  auto* grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  auto* params = with_config(app.add_subcommand("params", "Print parameter counts"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) common.overrides = sub->remaining();
    if (*gen) return cmd_gen_data(common, out, first, count);
    if (*train) return cmd_train(common, data, out, resume, eval_dir);
    if (*synth) return cmd_synthesize(common, checkpoint, layouts, out);
    if (*eval) return cmd_eval(common, preds, gts);
    if (*viz) return cmd_attn_viz(common, checkpoint, layout, out);
    if (*grad) return cmd_gradcheck();
    if (*params) return cmd_params(common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
