#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

namespace dzsr {

struct DegradationConfig {
  int ratio = 2;  // 2 or 4
  int channels = 32;
  int guidance_channels = 16;
  int kernel_size = 3;

  void validate() const;
};

/// GT -> pseudo-LR network. The backbone is five odd-kernel convolutions with
/// fixed 2x2 average pooling between them (one pool for r = 2, two for r = 4);
/// every hidden conv output is modulated channel-wise by a guidance vector
/// computed from the real LR. A global skip adds the area-downsampled input.
class DegradationNetImpl : public torch::nn::Module {
 public:
  explicit DegradationNetImpl(const DegradationConfig& cfg);

  /// t: [N, 3, rH, rW], s_c: [N, 3, H, W] -> clean pseudo-LR [N, 3, H, W].
  torch::Tensor forward(const torch::Tensor& t, const torch::Tensor& s_c);

  /// Per-layer (scale, shift), each [N, C], from the guidance encoder.
  std::vector<std::pair<torch::Tensor, torch::Tensor>> guidance(const torch::Tensor& s_c);

  /// Backbone conv weights, the set the centroid loss applies to.
  std::vector<torch::Tensor> backbone_kernels() const;

  const DegradationConfig& config() const { return cfg_; }

  std::int64_t forward_calls() const { return forward_calls_; }
  void reset_probe() { forward_calls_ = 0; }

 private:
  DegradationConfig cfg_;
  std::vector<torch::nn::Conv2d> backbone_;
  std::vector<int> pool_after_;  // backbone indices followed by a 2x2 average pool
  torch::nn::Conv2d guide1_{nullptr};
  torch::nn::Conv2d guide2_{nullptr};
  std::vector<torch::nn::Linear> heads_;
  std::int64_t forward_calls_ = 0;
};
TORCH_MODULE(DegradationNet);

/// Sum over (C_out, C_in) pairs of |sum_ij (i - c) w_ij| + |sum_ij (j - c) w_ij|
/// with c = (k - 1) / 2. W: [C_out, C_in, k, k]. Even k -> ConfigError.
torch::Tensor centroid_loss(const torch::Tensor& W);

struct DegradationLoss {
  torch::Tensor total;
  torch::Tensor l1;
  torch::Tensor centroid;  // unweighted sum over kernels
};

/// mean |(pseudo_noisy - residual) - s_c| + lambda_c * sum_l centroid_loss(W_l).
/// An undefined residual counts as zero.
DegradationLoss degradation_loss(const torch::Tensor& pseudo_noisy, const torch::Tensor& s_c,
                                 const torch::Tensor& residual, const std::vector<torch::Tensor>& kernels,
                                 double lambda_c = 100.0);

/// Signed-mass centroid (row, col) of the LR response to an r x r block
/// impulse placed on a uniform gray image, measured relative to the LR pixel
/// the block maps to. A GT-aligned network gives values near (0, 0).
std::array<double, 2> impulse_centroid_offset(DegradationNet& net, int lr_size = 24, double amplitude = 0.05);

}  // namespace dzsr
