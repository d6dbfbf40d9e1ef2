#include "dagan/attention.hpp"

#include <stdexcept>

namespace dagan {

namespace {

template <typename T>
int channel_axis(const Tensor<T>& t) {
  if (t.rank() == 3) return 0;
  if (t.rank() == 4) return 1;
  throw ShapeError("expected C×H×W or N×C×H×W, got " + to_string(t.shape()));
}

}  // namespace

std::string_view to_string(CamVariant v) {
  return v == CamVariant::CamI ? "CAM-I" : "CAM-II";
}

CamVariant parse_cam_variant(std::string_view text) {
  if (text == "CAM-I" || text == "cam-i" || text == "I" || text == "1") return CamVariant::CamI;
  if (text == "CAM-II" || text == "cam-ii" || text == "II" || text == "2") return CamVariant::CamII;
  throw std::invalid_argument("unknown CAM variant '" + std::string(text) + "'");
}

template <typename T>
SamResult<T> sam_forward(const Tensor<T>& f_l, const SamState<T>& s) {
  const int axis = channel_axis(f_l);
  const Tensor<T> p_a = channel_reduce_mean(f_l);
  const Tensor<T> p_m = channel_reduce_max(f_l);
  const Tensor<T> p_am = concat({p_a, p_m}, axis);
  Tensor<T> a_s = sigmoid(conv2d(p_am, s.fuse_conv));
  Tensor<T> f_s = mul(a_s, f_l);
  return {std::move(f_s), std::move(a_s)};
}

template <typename T>
Tensor<T> cam_fuse_scales(std::span<const Tensor<T>> features, const CamState<T>& c,
                          std::int64_t out_h, std::int64_t out_w) {
  if (features.size() != c.scale_convs.size()) {
    throw ShapeError("cam_fuse_scales: got " + std::to_string(features.size()) +
                     " features for " + std::to_string(c.scale_convs.size()) + " scale convs");
  }
  if (features.empty()) throw ShapeError("cam_fuse_scales: needs at least one coarse feature");
  std::vector<Tensor<T>> branches;
  branches.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    branches.push_back(conv2d(nearest_resize(features[i], out_h, out_w), c.scale_convs[i]));
  }
  const int axis = channel_axis(branches.front());
  return conv2d(concat<T>(std::span<const Tensor<T>>(branches), axis), c.fuse_conv);
}

template <typename T>
CamResult<T> cam_forward(const Tensor<T>& f_tilde, const Tensor<T>& f_l, const CamState<T>& c,
                         CamVariant variant) {
  if (f_tilde.shape() != f_l.shape()) {
    throw ShapeError("cam_forward: fused feature " + to_string(f_tilde.shape()) +
                     " does not match " + to_string(f_l.shape()));
  }
  const int axis = channel_axis(f_l);
  const Tensor<T> alpha = global_avg_pool(concat({f_tilde, f_l}, axis));
  const Tensor<T> gamma = conv2d(relu(conv2d(alpha, c.reduce_conv_1)), c.reduce_conv_2);
  Tensor<T> delta = sigmoid(gamma);
  Tensor<T> f_c = variant == CamVariant::CamI ? add(mul(delta, f_tilde), f_l)
                                               : add(mul(delta, f_l), f_tilde);
  return {std::move(f_c), std::move(delta)};
}

template <typename T>
Tensor<T> dual_fuse(const Tensor<T>& f_s, const Tensor<T>& f_c) {
  if (f_s.shape() != f_c.shape()) {
    throw ShapeError("dual_fuse: " + to_string(f_s.shape()) + " vs " + to_string(f_c.shape()));
  }
  return add(f_s, f_c);
}

template <typename T>
SamState<T> init_sam(InitStream& stream) {
  return {init_conv<T>(stream, 2, 1, 7, {1, 3, 1})};
}

template <typename T>
CamState<T> init_cam(InitStream& stream, std::span<const std::int64_t> scale_channels,
                     std::int64_t channels) {
  if (scale_channels.empty()) throw std::invalid_argument("init_cam: no coarse scales");
  CamState<T> c;
  for (std::int64_t ci : scale_channels) {
    c.scale_convs.push_back(init_conv<T>(stream, ci, channels, 3, {1, 1, 1}));
  }
  const auto n = static_cast<std::int64_t>(scale_channels.size());
  c.fuse_conv = init_conv<T>(stream, n * channels, channels, 3, {1, 1, 1});
  const std::int64_t bottleneck = std::max<std::int64_t>(1, channels / 2);
  c.reduce_conv_1 = init_conv<T>(stream, 2 * channels, bottleneck, 1, {});
  c.reduce_conv_2 = init_conv<T>(stream, bottleneck, channels, 1, {});
  return c;
}

#define DAGAN_INSTANTIATE(T)                                                                  \
  template SamResult<T> sam_forward(const Tensor<T>&, const SamState<T>&);                    \
  template Tensor<T> cam_fuse_scales(std::span<const Tensor<T>>, const CamState<T>&,          \
                                     std::int64_t, std::int64_t);                             \
  template CamResult<T> cam_forward(const Tensor<T>&, const Tensor<T>&, const CamState<T>&,   \
                                    CamVariant);                                              \
  template Tensor<T> dual_fuse(const Tensor<T>&, const Tensor<T>&);                           \
  template SamState<T> init_sam(InitStream&);                                                 \
  template CamState<T> init_cam(InitStream&, std::span<const std::int64_t>, std::int64_t);

DAGAN_INSTANTIATE(float)
DAGAN_INSTANTIATE(double)

}  // namespace dagan
