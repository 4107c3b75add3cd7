#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "dzsr/adastn.hpp"
#include "dzsr/config.hpp"
#include "dzsr/ref_matching.hpp"
#include "dzsr/restoration.hpp"

namespace dzsr {

/// Which alignment paths are guided by the pseudo-LR during training, and
/// which offset parameterization the AdaSTN units use.
enum class AblationMode { kFull, kNoLRAlign, kNoRefAlign, kNone, kSTN, kDeformDirect };

/// "full" | "no_lr_align" | "no_ref_align" | "none" | "stn" | "deform_direct".
AblationMode parse_ablation(std::string_view name);
std::string to_string(AblationMode mode);

bool lr_align_uses_pseudo(AblationMode mode);
bool ref_align_uses_pseudo(AblationMode mode);
/// False only for kNone: the degradation network is never needed.
bool needs_pseudo_lr(AblationMode mode);
/// The offset mode a run should use; stn and deform_direct override the config.
OffsetMode offset_mode_for(AblationMode mode, OffsetMode configured);

struct GraphOptions {
  /// Training graph: per-sample zero-offset dropout drawn from `seed`.
  /// Otherwise every AdaSTN runs with P = 0 and no estimator.
  bool training = false;
  std::uint64_t seed = 0;
  bool clamp = false;
};

/// The zooming network: LR feature head, three-stage LR alignment, Ref
/// alignment and the modulated restoration body.
class ZoomingNetImpl : public torch::nn::Module {
 public:
  explicit ZoomingNetImpl(const TrainConfig& cfg);

  /// lr, ref, lr_guide, ref_guide: [N, 3, h, w]. The guides are the pseudo-LR
  /// or the LR itself. Returns [N, 3, rh, rw].
  torch::Tensor forward(const torch::Tensor& lr, const torch::Tensor& ref, const torch::Tensor& lr_guide,
                        const torch::Tensor& ref_guide, const GraphOptions& opts);

  const TrainConfig& config() const { return cfg_; }
  std::int64_t estimator_calls() const;
  void reset_probe();

  AlignmentStack lr_align() const { return lr_align_; }
  RefAligner ref_align() const { return ref_align_; }
  RestorationNet restoration() const { return restoration_; }

 private:
  TrainConfig cfg_;
  torch::nn::Conv2d lr_head_{nullptr};
  AlignmentStack lr_align_{nullptr};
  RefAligner ref_align_{nullptr};
  RestorationNet restoration_{nullptr};
};
TORCH_MODULE(ZoomingNet);

}  // namespace dzsr
