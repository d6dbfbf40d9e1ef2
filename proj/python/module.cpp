#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dagan/data.hpp"
#include "dagan/eval.hpp"
#include "dagan/gradcheck.hpp"
#include "dagan/netpbm.hpp"
#include "dagan/train.hpp"

namespace py = pybind11;
using namespace dagan;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Layout to_layout(const U8Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("layout must be a 2-D uint8 array");
  Layout l(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), l.ids.begin());
  return l;
}

U8Array from_layout(const Layout& l) {
  U8Array out({l.height, l.width});
  std::copy(l.ids.begin(), l.ids.end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

template <typename T, typename A>
Tensor<T> to_tensor(const A& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<T>(std::move(shape), std::vector<T>(a.data(), a.data() + a.size()));
}

std::vector<Layout> layouts_of(const std::vector<U8Array>& arrays) {
  std::vector<Layout> out;
  for (const auto& a : arrays) out.push_back(to_layout(a));
  return out;
}

TrainConfig make_config(const std::string& ablation, std::uint64_t seed, std::int64_t num_classes, std::int64_t size,
                        std::vector<std::int64_t> gen_widths, std::vector<std::int64_t> disc_widths,
                        std::int64_t batch_size) {
  TrainConfig c;
  c.attention = AttentionConfig::from_ablation(ablation);
  c.seed = seed;
  c.num_classes = num_classes;
  c.height = c.width = size;
  c.gen_widths = std::move(gen_widths);
  c.disc_widths = std::move(disc_widths);
  c.batch_size = batch_size;
  c.validate();
  return c;
}

/// Single-precision training session: models, optimizers and the frozen extractor.
class Session {
 public:
  explicit Session(TrainConfig cfg)
      : cfg_(std::move(cfg)), state_(init_train_state<float>(cfg_)), extractor_(FixedExtractor<float>::make(cfg_.extractor_seed)) {}

  py::dict train_step(const std::vector<U8Array>& layouts, const F32Array& images) {
    std::vector<Tensor<float>> hots;
    for (const auto& l : layouts) hots.push_back(one_hot<float>(to_layout(l), cfg_.num_classes));
    const LossRecord r = dagan::train_step(stack<float>(hots), to_tensor<float>(images), state_, cfg_, extractor_);
    py::dict d;
    d["d_loss"] = r.d_loss;
    d["g_cgan"] = r.g_cgan;
    d["g_fm"] = r.g_fm;
    d["g_perc"] = r.g_perc;
    d["g_total"] = r.g_total;
    return d;
  }

  py::tuple generate(const U8Array& layout) const {
    NoGradGuard<float> no_grad;
    const auto out = generator_forward(one_hot<float>(to_layout(layout), cfg_.num_classes), state_.g);
    py::dict attn;
    if (out.attention.a_s) attn["sam"] = to_numpy(*out.attention.a_s);
    if (out.attention.delta) attn["cam_delta"] = to_numpy(*out.attention.delta);
    return py::make_tuple(to_numpy(out.image), attn);
  }

  void save(const std::string& path) const { save_checkpoint(path, snapshot(state_)); }
  void load(const std::string& path) { restore(state_, load_checkpoint(path, snapshot(state_))); }
  py::bytes checkpoint_bytes() const { return py::bytes(serialize_checkpoint(snapshot(state_))); }
  std::uint64_t step() const { return state_.step; }
  std::int64_t num_classes() const { return cfg_.num_classes; }

 private:
  TrainConfig cfg_;
  TrainState<float> state_;
  FixedExtractor<float> extractor_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dual attention GAN for semantic image synthesis";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NetpbmError>(m, "NetpbmError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);

  m.def("generate_layout", [](std::uint64_t seed, std::uint64_t index, std::int64_t num_classes, std::int64_t size) {
        SceneConfig c;
        c.seed = seed;
        c.num_classes = num_classes;
        c.height = c.width = size;
        c.validate();
        return from_layout(generate_layout(c, index));
      }, py::arg("seed"), py::arg("index"), py::arg("num_classes") = 5, py::arg("size") = 64,
      "Procedural layout (H×W uint8 class ids).");
  m.def("render", [](const U8Array& layout) { return to_numpy(render<double>(to_layout(layout))); },
        py::arg("layout"), "Deterministic 3×H×W image in [-1, 1] for a layout.");
  m.def("oracle_segment", [](const F64Array& image, std::int64_t k) {
        return from_layout(oracle_segment<double>(to_tensor<double>(image), k));
      }, py::arg("image"), py::arg("num_classes"), "Nearest-palette segmentation of a rendered image.");

  m.def("miou", [](const std::vector<U8Array>& preds, const std::vector<U8Array>& gts, std::int64_t k) {
        const auto r = miou(layouts_of(preds), layouts_of(gts), k);
        return py::make_tuple(r.miou, r.per_class);
      }, py::arg("preds"), py::arg("gts"), py::arg("num_classes"), "(mIoU, per-class IoU; NaN where absent)");
  m.def("pixel_acc", [](const std::vector<U8Array>& preds, const std::vector<U8Array>& gts) {
        return pixel_acc(layouts_of(preds), layouts_of(gts));
      }, py::arg("preds"), py::arg("gts"));
  m.def("frechet_distance", [](const F64Array& a, const F64Array& b) {
        if (a.ndim() != 2 || b.ndim() != 2) throw std::invalid_argument("features must be n×d arrays");
        const auto sa = gaussian_stats(std::span<const double>(a.data(), a.size()), a.shape(0), a.shape(1));
        const auto sb = gaussian_stats(std::span<const double>(b.data(), b.size()), b.shape(0), b.shape(1));
        return frechet_distance(sa, sb);
      }, py::arg("features_a"), py::arg("features_b"), "Fréchet distance between Gaussian fits of two n×d samples.");

  m.def("encode_ppm", [](const U8Array& rgb) {
        if (rgb.ndim() != 3 || rgb.shape(2) != 3) throw std::invalid_argument("expected an H×W×3 uint8 array");
        RgbImage img{rgb.shape(1), rgb.shape(0), std::vector<std::uint8_t>(rgb.data(), rgb.data() + rgb.size())};
        return py::bytes(encode_ppm(img));
      }, py::arg("rgb"));
  m.def("decode_ppm", [](const py::bytes& data) {
        const RgbImage img = decode_ppm(std::string(data));
        U8Array out({img.height, img.width, std::int64_t{3}});
        std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
        return out;
      }, py::arg("data"));

  m.def("param_counts", [](const std::string& ablation, std::int64_t num_classes) {
        TrainConfig c;
        c.attention = AttentionConfig::from_ablation(ablation);
        c.num_classes = num_classes;
        const ParamCounts p = count_params(c.generator(), c.discriminator());
        return py::make_tuple(p.generator, p.discriminator, p.total());
      }, py::arg("ablation") = "B6", py::arg("num_classes") = 5, "(generator, discriminator, total)");

  m.def("gradient_suite", [] {
        py::list out;
        for (const auto& r : gradient_suite()) out.append(py::make_tuple(r.name, r.max_rel_error, r.passed));
        return out;
      }, "Runs the finite-difference suite: [(name, max_rel_error, passed)].");

  py::class_<Session>(m, "Session")
      .def(py::init([](const std::string& ablation, std::uint64_t seed, std::int64_t num_classes, std::int64_t size,
                       std::vector<std::int64_t> gen_widths, std::vector<std::int64_t> disc_widths, std::int64_t batch_size) {
             return Session(make_config(ablation, seed, num_classes, size, std::move(gen_widths), std::move(disc_widths),
                                        batch_size));
           }),
           py::arg("ablation") = "B6", py::arg("seed") = 0, py::arg("num_classes") = 5, py::arg("size") = 64,
           py::arg("gen_widths") = std::vector<std::int64_t>{16, 32, 64, 64},
           py::arg("disc_widths") = std::vector<std::int64_t>{32, 64, 128}, py::arg("batch_size") = 4)
      .def("train_step", &Session::train_step, py::arg("layouts"), py::arg("images"),
           "One D update then one G update; images are N×3×H×W in [-1, 1].")
      .def("generate", &Session::generate, py::arg("layout"), "(image 3×H×W, attention maps dict)")
      .def("save", &Session::save, py::arg("path"))
      .def("load", &Session::load, py::arg("path"))
      .def("checkpoint_bytes", &Session::checkpoint_bytes)
      .def_property_readonly("step", &Session::step)
      .def_property_readonly("num_classes", &Session::num_classes);
}
