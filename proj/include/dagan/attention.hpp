#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dagan/nn.hpp"

namespace dagan {

/// Which operand the channel weights gate before the residual sum.
///   CamI:  f_c = δ ⊗ f̃ ⊕ f_l
///   CamII: f_c = δ ⊗ f_l ⊕ f̃
enum class CamVariant { CamI, CamII };

std::string_view to_string(CamVariant v);
CamVariant parse_cam_variant(std::string_view text);

/// Position-wise spatial attention: one 7×7 conv over the [mean, max] channel
/// pooling of the feature map.
template <typename T>
struct SamState {
  Conv2dParams<T> fuse_conv;  // 2 → 1

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    fuse_conv.for_each_param(prefix + ".fuse_conv", f);
  }
  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) const {
    fuse_conv.for_each_param(prefix + ".fuse_conv", f);
  }
};

/// Scale-wise channel attention over the backbone's coarser scales.
template <typename T>
struct CamState {
  std::vector<Conv2dParams<T>> scale_convs;  // C_i → C, one per coarse scale, unshared
  Conv2dParams<T> fuse_conv;                 // (l−1)·C → C
  Conv2dParams<T> reduce_conv_1;             // 2C → C/2, 1×1
  Conv2dParams<T> reduce_conv_2;             // C/2 → C, 1×1

  std::int64_t channels() const { return fuse_conv.out_channels(); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    visit(*this, prefix, f);
  }
  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) const {
    visit(*this, prefix, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F& f) {
    for (std::size_t i = 0; i < self.scale_convs.size(); ++i) {
      self.scale_convs[i].for_each_param(prefix + ".scale_conv" + std::to_string(i + 1), f);
    }
    self.fuse_conv.for_each_param(prefix + ".fuse_conv", f);
    self.reduce_conv_1.for_each_param(prefix + ".reduce_conv_1", f);
    self.reduce_conv_2.for_each_param(prefix + ".reduce_conv_2", f);
  }
};

template <typename T>
struct SamResult {
  Tensor<T> f_s;  // C×H×W
  Tensor<T> a_s;  // 1×H×W, in (0,1)
};

template <typename T>
struct CamResult {
  Tensor<T> f_c;    // C×H×W
  Tensor<T> delta;  // C×1×1, in (0,1)
};

/// Everything the attention heads produce for one forward pass; kept so the
/// maps can be exported without recomputation. Absent fields mean the module
/// was disabled.
template <typename T>
struct AttentionOutput {
  std::optional<Tensor<T>> f_s;
  std::optional<Tensor<T>> f_c;
  std::optional<Tensor<T>> a_s;
  std::optional<Tensor<T>> delta;
};

/// A_s = σ(conv([mean_c f_l, max_c f_l])), F_s = A_s ⊗ f_l.
template <typename T>
SamResult<T> sam_forward(const Tensor<T>& f_l, const SamState<T>& s);

/// Resizes each coarse feature to (out_h, out_w), applies its scale conv,
/// concatenates along channels and fuses to C channels.
template <typename T>
Tensor<T> cam_fuse_scales(std::span<const Tensor<T>> features, const CamState<T>& c,
                          std::int64_t out_h, std::int64_t out_w);

/// α = GAP([f̃, f_l]); γ = conv2(relu(conv1(α))); δ = σ(γ); then CAM-I or CAM-II.
template <typename T>
CamResult<T> cam_forward(const Tensor<T>& f_tilde, const Tensor<T>& f_l, const CamState<T>& c,
                         CamVariant variant);

template <typename T>
Tensor<T> dual_fuse(const Tensor<T>& f_s, const Tensor<T>& f_c);

template <typename T>
SamState<T> init_sam(InitStream& stream);
template <typename T>
CamState<T> init_cam(InitStream& stream, std::span<const std::int64_t> scale_channels,
                     std::int64_t channels);

}  // namespace dagan
