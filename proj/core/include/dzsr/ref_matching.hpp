#pragma once

#include <cstdint>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "dzsr/adastn.hpp"

namespace dzsr {

struct MatchConfig {
  int patch_size = 3;
  int stride = 1;
  int feature_channels = 32;

  void validate() const;
};

/// Best Ref patch per strided query position.
///   index_map: int64 [N, Hq, Wq] flat index y * ref_width + x of the Ref patch center
///   score_map: float [N, Hq, Wq] cosine similarity
/// with Hq = ceil(query_height / stride); query position (a, b) sits at (a * stride, b * stride).
struct MatchResult {
  torch::Tensor index_map;
  torch::Tensor score_map;
  int query_height = 0;
  int query_width = 0;
  int ref_height = 0;
  int ref_width = 0;
  int stride = 1;
};

/// Three 3x3 convolutions, used for LR, pseudo-LR and Ref alike.
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  FeatureExtractorImpl(int channels);
  torch::Tensor forward(const torch::Tensor& img);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
};
TORCH_MODULE(FeatureExtractor);

/// Cosine similarity between zero-padded patch_size^2 patches of query (at
/// cfg.stride) and ref (at stride 1), argmax per query position. Scores within
/// kTieTolerance of the maximum count as ties and go to the smallest index.
/// No gradient flows through the match.
MatchResult patch_correlation_match(const torch::Tensor& query, const torch::Tensor& ref, const MatchConfig& cfg);

inline constexpr double kTieTolerance = 1e-6;

/// Folds the matched ref patches into a map at query resolution: each strided
/// query center q with match m contributes ref(m + d) to q + d for every patch
/// offset d. Contributions falling outside either map are dropped and overlaps
/// are averaged; positions without contributions are 0. Differentiable in ref.
torch::Tensor warp_ref_features(const torch::Tensor& ref, const MatchResult& match, const MatchConfig& cfg);

/// [N, C, H, W] -> [N, C r^2, H/r, W/r]; element (c, i, j) lands at
/// (c r^2 + (i mod r) r + (j mod r), i / r, j / r).
torch::Tensor inverse_pixel_shuffle(const torch::Tensor& x, int r);
torch::Tensor pixel_shuffle(const torch::Tensor& x, int r);

/// base with the centered window ((H - h) / 2, (W - w) / 2) replaced by center.
torch::Tensor center_paste(const torch::Tensor& base, const torch::Tensor& center);

/// Central 1/r window of an [N, C, H, W] tensor.
torch::Tensor center_crop_tensor(const torch::Tensor& x, int r);

struct RefAlignment {
  torch::Tensor aligned;     // [N, C, h, w]
  torch::Tensor guide_feat;  // [N, C, h, w]
  torch::Tensor pasted;      // [N, C r^2, h, w], input of the refining AdaSTN
  MatchResult match;
};

/// Ref -> GT alignment: extractor features, matching against the guide at LR
/// scale, warp of the inverse-pixel-shuffled Ref features, center paste and
/// one refining AdaSTN.
class RefAlignerImpl : public torch::nn::Module {
 public:
  RefAlignerImpl(int ratio, const MatchConfig& match, int estimator_channels, OffsetMode mode);

  /// ref_img: [N, 3, h, w] (the Ref, HR pixels covering the central h/r x w/r
  /// LR window); guide_img: [N, 3, h, w] at LR scale. zero_samples as in AdaSTN.
  RefAlignment forward(const torch::Tensor& ref_img, const torch::Tensor& guide_img, bool force_zero,
                       const std::vector<bool>& zero_samples = {});

  FeatureExtractor extractor() const { return extractor_; }
  AdaSTN refine() const { return refine_; }
  const MatchConfig& match_config() const { return match_; }

 private:
  int ratio_;
  MatchConfig match_;
  FeatureExtractor extractor_{nullptr};
  AdaSTN refine_{nullptr};
};
TORCH_MODULE(RefAligner);

}  // namespace dzsr
