#pragma once

#include <utility>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

namespace dzsr {

struct RestorationConfig {
  int ratio = 2;
  int channels = 32;
  int blocks = 16;
  /// Width of each aligned feature map entering the fusion conv; 0 = channels.
  int in_channels = 0;

  void validate() const;
};

using Modulation = std::pair<torch::Tensor, torch::Tensor>;  // (scale, shift), each [N, C]

/// x + scale * f(x) + shift with f = conv, LeakyReLU, conv (second conv zero-initialized).
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x, const Modulation& mod);
  torch::Tensor branch(const torch::Tensor& x);

 private:
  int channels_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Globally pooled fused, Ref and LR-center features -> MLP -> one
/// (1 + s, b) pair per residual block.
class ModulationEncoderImpl : public torch::nn::Module {
 public:
  ModulationEncoderImpl(int channels, int blocks);
  std::vector<Modulation> forward(const torch::Tensor& fused, const torch::Tensor& ref_feat,
                                  const torch::Tensor& lr_center_feat);

 private:
  int channels_;
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  std::vector<torch::nn::Linear> heads_;
};
TORCH_MODULE(ModulationEncoder);

class RestorationNetImpl : public torch::nn::Module {
 public:
  explicit RestorationNetImpl(const RestorationConfig& cfg);

  /// aligned_lr, aligned_ref: [N, in_channels, h, w]; ref_img: [N, 3, h, w]; lr_img:
  /// [N, 3, h, w]. Returns [N, 3, rh, rw], clamped to [0, 1] when clamp is set.
  /// A non-empty `override_mods` replaces the encoder output.
  torch::Tensor forward(const torch::Tensor& aligned_lr, const torch::Tensor& aligned_ref, const torch::Tensor& ref_img,
                        const torch::Tensor& lr_img, bool clamp, const std::vector<Modulation>& override_mods = {});

  std::vector<Modulation> modulations(const torch::Tensor& fused, const torch::Tensor& ref_img,
                                      const torch::Tensor& lr_img);

  const RestorationConfig& config() const { return cfg_; }

 private:
  RestorationConfig cfg_;
  torch::nn::Conv2d fusion_{nullptr};
  torch::nn::Conv2d image_enc1_{nullptr}, image_enc2_{nullptr};
  ModulationEncoder encoder_{nullptr};
  std::vector<ResidualBlock> blocks_;
  std::vector<torch::nn::Conv2d> up_;
  torch::nn::Conv2d tail_{nullptr};
};
TORCH_MODULE(RestorationNet);

/// Bicubic upsampling of an [N, C, H, W] tensor (a = -0.75, half-pixel centers).
torch::Tensor bicubic_up(const torch::Tensor& x, int r);

}  // namespace dzsr
