#pragma once

#include <cstdint>
#include <vector>

#include <torch/types.h>

namespace dzsr {

struct SWConfig {
  /// Number of projection directions C'; 0 means "equal to the channel count".
  int num_projections = 0;
};

/// Rows drawn uniformly from the unit sphere in R^channels; deterministic in seed.
torch::Tensor random_projections(int count, int channels, std::uint64_t seed,
                                 torch::ScalarType dtype = torch::kFloat32);

/// Sliced Wasserstein-1 between [C, H, W] or [N, C, H, W] maps of equal dims:
/// flatten to [C, HW], project with M [C', C], sort each row, mean |difference|.
/// Batched inputs are averaged over N with the same M.
torch::Tensor sliced_wasserstein(const torch::Tensor& U, const torch::Tensor& V, const SWConfig& cfg,
                                 std::uint64_t seed);

/// Same with an explicit projection matrix M [C', C].
torch::Tensor sliced_wasserstein_with(const torch::Tensor& U, const torch::Tensor& V, const torch::Tensor& M);

/// Fixed random conv pyramid standing in for pretrained perceptual features.
/// Scale s sees the image after s 2x2 average pools; every scale applies a
/// 3x3 conv followed by LeakyReLU. Parameters never receive gradients.
class PerceptualExtractor {
 public:
  explicit PerceptualExtractor(std::uint64_t seed = 2022, int channels = 16, int scales = 3);

  /// img: [N, 3, H, W] -> one [N, C, H / 2^s, W / 2^s] map per scale.
  std::vector<torch::Tensor> operator()(const torch::Tensor& img) const;

  int scales() const { return static_cast<int>(weights_.size()); }
  int channels() const { return channels_; }

 private:
  int channels_;
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
};

struct SelfDZSRLoss {
  torch::Tensor total;
  torch::Tensor l1;
  torch::Tensor sw;  // mean over scales, before lambda
};

/// mean |y_hat - t| + lambda_sw * mean_s SW(phi_s(y_hat), phi_s(t)).
SelfDZSRLoss selfdzsr_loss(const torch::Tensor& y_hat, const torch::Tensor& t, const PerceptualExtractor& ext,
                           const SWConfig& cfg, std::uint64_t seed, double lambda_sw = 0.08);

}  // namespace dzsr
