#include "dzsr/zooming.hpp"

#include <torch/torch.h>

#include "dzsr/error.hpp"
#include "dzsr/rng.hpp"

namespace dzsr {

AblationMode parse_ablation(std::string_view name) {
  if (name == "full") return AblationMode::kFull;
  if (name == "no_lr_align") return AblationMode::kNoLRAlign;
  if (name == "no_ref_align") return AblationMode::kNoRefAlign;
  if (name == "none") return AblationMode::kNone;
  if (name == "stn") return AblationMode::kSTN;
  if (name == "deform_direct") return AblationMode::kDeformDirect;
  throw ConfigError("unknown ablation mode '" + std::string(name) + "'");
}

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull: return "full";
    case AblationMode::kNoLRAlign: return "no_lr_align";
    case AblationMode::kNoRefAlign: return "no_ref_align";
    case AblationMode::kNone: return "none";
    case AblationMode::kSTN: return "stn";
    case AblationMode::kDeformDirect: return "deform_direct";
  }
  return "?";
}

bool lr_align_uses_pseudo(AblationMode mode) {
  return mode != AblationMode::kNoLRAlign && mode != AblationMode::kNone;
}

bool ref_align_uses_pseudo(AblationMode mode) {
  return mode != AblationMode::kNoRefAlign && mode != AblationMode::kNone;
}

bool needs_pseudo_lr(AblationMode mode) { return lr_align_uses_pseudo(mode) || ref_align_uses_pseudo(mode); }

OffsetMode offset_mode_for(AblationMode mode, OffsetMode configured) {
  if (mode == AblationMode::kSTN) return OffsetMode::kSTNGlobal;
  if (mode == AblationMode::kDeformDirect) return OffsetMode::kDeformDirect;
  return configured;
}

ZoomingNetImpl::ZoomingNetImpl(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int C = cfg_.feature_channels;
  const OffsetMode mode = parse_offset_mode(cfg_.offset_mode);
  lr_head_ = register_module("lr_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, C, 3).padding(1)));

  AdaSTNConfig stack;
  stack.num_stages = cfg_.adastn_stages;
  stack.zero_prob = cfg_.zero_prob;
  stack.estimator_channels = cfg_.estimator_channels;
  stack.mode = mode;
  lr_align_ = register_module("lr_align", AlignmentStack(C, stack));

  MatchConfig match;
  match.patch_size = cfg_.match_patch;
  match.stride = cfg_.match_stride;
  match.feature_channels = C;
  ref_align_ = register_module("ref_align", RefAligner(cfg_.ratio, match, cfg_.estimator_channels, mode));

  RestorationConfig rc;
  rc.ratio = cfg_.ratio;
  rc.channels = cfg_.channels;
  rc.blocks = cfg_.blocks;
  rc.in_channels = C;
  restoration_ = register_module("restoration", RestorationNet(rc));
}

torch::Tensor ZoomingNetImpl::forward(const torch::Tensor& lr, const torch::Tensor& ref, const torch::Tensor& lr_guide,
                                      const torch::Tensor& ref_guide, const GraphOptions& opts) {
  if (lr.dim() != 4 || lr.size(1) != 3) throw DimensionError("zooming: LR must be [N, 3, h, w]");
  if (ref.sizes() != lr.sizes() || lr_guide.sizes() != lr.sizes() || ref_guide.sizes() != lr.sizes()) {
    throw DimensionError("zooming: LR, Ref and guides must share dims (Ref is the 1/r center of GT)");
  }
  namespace F = torch::nn::functional;
  auto head = [&](const torch::Tensor& x) {
    return F::leaky_relu(lr_head_(x), F::LeakyReLUFuncOptions().negative_slope(0.2));
  };
  const auto N = static_cast<int>(lr.size(0));
  auto lr_feat = head(lr);
  auto lr_guide_feat = lr_guide.is_same(lr) ? lr_feat : head(lr_guide);
  auto aligned_lr = lr_align_->forward(lr_feat, lr_guide_feat, opts.training, derive_seed(opts.seed, 1));

  std::vector<bool> ref_zero;
  if (opts.training) ref_zero = draw_zero_masks(derive_seed(opts.seed, 2), 1, N, cfg_.zero_prob).front();
  auto ref_out = ref_align_->forward(ref, ref_guide, /*force_zero=*/!opts.training, ref_zero);
  return restoration_->forward(aligned_lr, ref_out.aligned, ref, lr, opts.clamp);
}

std::int64_t ZoomingNetImpl::estimator_calls() const {
  return lr_align_->estimator_calls() + ref_align_->refine()->estimator_calls();
}

void ZoomingNetImpl::reset_probe() {
  lr_align_->reset_probe();
  ref_align_->refine()->reset_probe();
}

}  // namespace dzsr
