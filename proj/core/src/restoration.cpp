#include "dzsr/restoration.hpp"


#include <torch/torch.h>

#include "dzsr/error.hpp"
#include "dzsr/ref_matching.hpp"

namespace dzsr {
namespace {

namespace F = torch::nn::functional;

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

torch::nn::Conv2d conv3x3(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Tensor broadcast(const torch::Tensor& v) { return v.unsqueeze(-1).unsqueeze(-1); }

}  // namespace

void RestorationConfig::validate() const {
  if (ratio != 2 && ratio != 4) throw ConfigError("restoration ratio must be 2 or 4");
  if (channels < 1 || blocks < 1 || in_channels < 0) throw ConfigError("restoration channels and blocks must be positive");
}

torch::Tensor bicubic_up(const torch::Tensor& x, int r) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{double(r), double(r)})
                               .mode(torch::kBicubic)
                               .align_corners(false));
}

ResidualBlockImpl::ResidualBlockImpl(int channels) : channels_(channels) {
  conv1_ = register_module("conv1", conv3x3(channels, channels));
  conv2_ = register_module("conv2", conv3x3(channels, channels));
  torch::NoGradGuard no_grad;
  conv2_->weight.zero_();
  conv2_->bias.zero_();
}

torch::Tensor ResidualBlockImpl::branch(const torch::Tensor& x) { return conv2_(lrelu(conv1_(x))); }

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x, const Modulation& mod) {
  const auto& [scale, shift] = mod;
  if (scale.size(-1) != channels_ || shift.size(-1) != channels_) {
    throw DimensionError("residual block: modulation length differs from channel count");
  }
  return x + broadcast(scale) * branch(x) + broadcast(shift);
}

ModulationEncoderImpl::ModulationEncoderImpl(int channels, int blocks) : channels_(channels) {
  fc1_ = register_module("fc1", torch::nn::Linear(3 * channels, channels));
  fc2_ = register_module("fc2", torch::nn::Linear(channels, channels));
  for (int b = 0; b < blocks; ++b) {
    auto head = register_module("head" + std::to_string(b), torch::nn::Linear(channels, 2 * channels));
    // Small but nonzero so every block starts near (1, 0) without cutting the
    // encoder off from the gradient.
    torch::NoGradGuard no_grad;
    head->weight.mul_(0.1);
    head->bias.zero_();
    heads_.push_back(head);
  }
}

std::vector<Modulation> ModulationEncoderImpl::forward(const torch::Tensor& fused, const torch::Tensor& ref_feat,
                                                       const torch::Tensor& lr_center_feat) {
  auto pooled = torch::cat({fused.mean({2, 3}), ref_feat.mean({2, 3}), lr_center_feat.mean({2, 3})}, 1);
  auto h = lrelu(fc2_(lrelu(fc1_(pooled))));
  std::vector<Modulation> mods;
  for (auto& head : heads_) {
    auto v = head(h);
    mods.emplace_back(1.0 + v.narrow(1, 0, channels_), v.narrow(1, channels_, channels_));
  }
  return mods;
}

RestorationNetImpl::RestorationNetImpl(const RestorationConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int C = cfg_.channels;
  const int in = cfg_.in_channels > 0 ? cfg_.in_channels : C;
  fusion_ = register_module("fusion", conv3x3(2 * in, C));
  image_enc1_ = register_module("image_enc1", conv3x3(3, C));
  image_enc2_ = register_module("image_enc2", conv3x3(C, C));
  encoder_ = register_module("encoder", ModulationEncoder(C, cfg_.blocks));
  for (int b = 0; b < cfg_.blocks; ++b) blocks_.push_back(register_module("block" + std::to_string(b), ResidualBlock(C)));
  const int stages = cfg_.ratio == 2 ? 1 : 2;
  for (int s = 0; s < stages; ++s) up_.push_back(register_module("up" + std::to_string(s), conv3x3(C, 4 * C)));
  tail_ = register_module("tail", conv3x3(C, 3));
}

std::vector<Modulation> RestorationNetImpl::modulations(const torch::Tensor& fused, const torch::Tensor& ref_img,
                                                        const torch::Tensor& lr_img) {
  auto image_features = [&](const torch::Tensor& img) { return lrelu(image_enc2_(lrelu(image_enc1_(img)))); };
  return encoder_->forward(fused, image_features(ref_img), image_features(center_crop_tensor(lr_img, cfg_.ratio)));
}

torch::Tensor RestorationNetImpl::forward(const torch::Tensor& aligned_lr, const torch::Tensor& aligned_ref,
                                          const torch::Tensor& ref_img, const torch::Tensor& lr_img, bool clamp,
                                          const std::vector<Modulation>& override_mods) {
  if (aligned_lr.sizes() != aligned_ref.sizes()) throw DimensionError("restore: aligned LR and Ref dims differ");
  if (lr_img.size(2) != aligned_lr.size(2) || lr_img.size(3) != aligned_lr.size(3)) {
    throw DimensionError("restore: LR image and features differ in spatial dims");
  }
  auto fused = lrelu(fusion_(torch::cat({aligned_lr, aligned_ref}, 1)));
  const auto mods = override_mods.empty() ? modulations(fused, ref_img, lr_img) : override_mods;
  if (mods.size() != blocks_.size()) throw DimensionError("restore: one modulation pair per block required");
  auto x = fused;
  for (std::size_t b = 0; b < blocks_.size(); ++b) x = blocks_[b]->forward(x, mods[b]);
  x = x + fused;
  for (auto& up : up_) x = lrelu(F::pixel_shuffle(up(x), 2));
  auto y = tail_(x) + bicubic_up(lr_img, cfg_.ratio);
  return clamp ? y.clamp(0.0, 1.0) : y;
}

}  // namespace dzsr
