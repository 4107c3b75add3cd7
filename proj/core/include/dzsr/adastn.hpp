#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

namespace dzsr {

/// Kernel tap positions: column k is (row offset, column offset), enumerating
/// {-1, 0, 1}^2 in row-major order.
using RegularGrid = std::array<std::array<int, 9>, 2>;

RegularGrid regular_grid();

/// The regular grid as a [2, 9] tensor.
torch::Tensor grid_tensor(torch::ScalarType dtype = torch::kFloat32);

/// Per-pixel sampling offsets P = A G + b.
///   A: [N, H, W, 2, 2]   b: [N, H, W, 2]   P: [N, H, W, 2, 9] (pixels)
/// Row 0 of P holds row offsets, row 1 column offsets.
struct OffsetField {
  torch::Tensor A;
  torch::Tensor b;
  torch::Tensor P;
};

OffsetField affine_offsets(const torch::Tensor& A, const torch::Tensor& b);

/// Weights w_k of a 3x3 deformable convolution. weight: [C_out, C_in, 9], bias: [C_out].
struct DeformableKernel {
  torch::Tensor weight;
  torch::Tensor bias;
};

/// y(q) = sum_k w_k x(q + p_k) + bias with bilinear reads and zero outside the
/// feature map. x: [N, C_in, H, W], P: [N, H, W, 2, 9]. Differentiable w.r.t.
/// x, the kernel and P through a hand-written backward pass.
/// Throws NumericError when P contains NaN.
torch::Tensor deformable_sample(const torch::Tensor& x, const DeformableKernel& kernel, const torch::Tensor& P);

/// The P = 0 case: a 1x1 convolution with the collapsed kernel sum_k w_k.
torch::Tensor deformable_sample_zero(const torch::Tensor& x, const DeformableKernel& kernel);

enum class OffsetMode { kAdaSTN, kSTNGlobal, kDeformDirect };

/// "adastn" | "stn_global" | "deform_direct"; anything else is a ConfigError.
OffsetMode parse_offset_mode(std::string_view name);
std::string to_string(OffsetMode mode);

struct AdaSTNConfig {
  int num_stages = 3;
  double zero_prob = 0.3;
  int estimator_channels = 32;
  OffsetMode mode = OffsetMode::kAdaSTN;

  void validate() const;
};

/// One adaptive spatial transformer: an offset estimator on concat(src, guide)
/// followed by deformable sampling of src.
class AdaSTNImpl : public torch::nn::Module {
 public:
  AdaSTNImpl(int in_channels, int guide_channels, int out_channels, int estimator_channels, OffsetMode mode);

  /// With force_zero (or every sample listed in zero_samples) the estimator is
  /// skipped and the P = 0 path runs. zero_samples, when non-empty, has one
  /// flag per batch element; flagged samples get P = 0.
  torch::Tensor forward(const torch::Tensor& src, const torch::Tensor& guide, bool force_zero = false,
                        const std::vector<bool>& zero_samples = {});

  /// Runs the estimator. A and b are undefined in kDeformDirect mode.
  OffsetField estimate(const torch::Tensor& src, const torch::Tensor& guide);

  DeformableKernel kernel() const { return {weight_, bias_}; }
  OffsetMode mode() const { return mode_; }

  std::int64_t estimator_calls() const { return estimator_calls_; }
  void reset_probe() { estimator_calls_ = 0; }

 private:
  OffsetMode mode_;
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
  torch::nn::Conv2d head_{nullptr};
  torch::nn::Linear global_head_{nullptr};
  torch::Tensor weight_;
  torch::Tensor bias_;
  std::int64_t estimator_calls_ = 0;
};
TORCH_MODULE(AdaSTN);

/// Per stage, per sample: true when that unit's offsets are zeroed. Each flag
/// is an independent Bernoulli(p) draw from `seed`.
std::vector<std::vector<bool>> draw_zero_masks(std::uint64_t seed, int stages, int batch, double p);

/// num_stages AdaSTN units (weights not shared) deforming LR features toward
/// the guide. Inference uses P = 0 in every unit and never runs an estimator.
class AlignmentStackImpl : public torch::nn::Module {
 public:
  AlignmentStackImpl(int channels, const AdaSTNConfig& cfg);

  torch::Tensor forward(const torch::Tensor& lr_feat, const torch::Tensor& guide_feat, bool training,
                        std::uint64_t seed);

  const AdaSTNConfig& config() const { return cfg_; }
  std::int64_t estimator_calls() const;
  void reset_probe();
  std::size_t size() const { return units_.size(); }
  AdaSTN unit(std::size_t i) const { return units_[i]; }

 private:
  AdaSTNConfig cfg_;
  std::vector<AdaSTN> units_;
};
TORCH_MODULE(AlignmentStack);

}  // namespace dzsr
