#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "dzsr/config.hpp"
#include "dzsr/dataset.hpp"
#include "dzsr/degradation.hpp"
#include "dzsr/losses.hpp"
#include "dzsr/zooming.hpp"

namespace dzsr {

DegradationConfig degradation_config(const TrainConfig& cfg);

/// One training batch cut from dataset samples.
///   lr: [N, 3, P, P] from the short-focus image
///   gt: [N, 3, rP, rP] from the telephoto at the same location
///   ref: [N, 3, P, P] central 1/r window of gt
struct PatchBatch {
  torch::Tensor lr;
  torch::Tensor gt;
  torch::Tensor ref;
};

/// Seeded patch sampler: epochs walk a shuffled sample order, each draw picks
/// a random location and (if enabled) a random flip/rotation applied to both
/// patches alike.
class PatchSampler {
 public:
  PatchSampler(const std::vector<NamedSample>& data, const TrainConfig& cfg, std::uint64_t seed);

  int iterations_per_epoch() const;
  PatchBatch next();

 private:
  const std::vector<NamedSample>& data_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct DegradationEpoch {
  int epoch = 0;
  double l1 = 0.0;
  double centroid = 0.0;  // unweighted
  double total = 0.0;
};

struct DegradationRun {
  DegradationNet net{nullptr};
  TrainConfig config;
  std::vector<double> iteration_loss;
  std::vector<DegradationEpoch> epochs;
  double initial_centroid = 0.0;
};

/// Stage 1: Adam on mean-l1(D(t, s_c), s_c) + lambda_c * centroid terms.
/// Throws DataError for an empty dataset.
DegradationRun train_degradation(const std::vector<NamedSample>& data, const TrainConfig& cfg);

struct ZoomingEpoch {
  int epoch = 0;
  double loss = 0.0;
  double l1 = 0.0;
  double sw = 0.0;
};

struct ZoomingRun {
  ZoomingNet net{nullptr};
  TrainConfig config;  // offset_mode already resolved for the ablation
  AblationMode mode = AblationMode::kFull;
  std::vector<double> iteration_loss;
  std::vector<ZoomingEpoch> epochs;
  std::int64_t pseudo_lr_built = 0;
  std::int64_t degradation_calls = 0;
};

/// Stage 2 with a frozen degradation network. `degradation` may be empty
/// only for AblationMode::kNone, which never builds a pseudo-LR.
ZoomingRun train_selfdzsr(const std::vector<NamedSample>& data, DegradationNet degradation, const TrainConfig& cfg,
                          AblationMode mode);

/// Test graph: LR stands in for the pseudo-LR, every AdaSTN runs with P = 0,
/// output clamped. The telephoto may be r x the LR dims (its center crop is
/// the Ref) or already the Ref at LR dims; anything else is an InputError.
Image infer(ZoomingNet& net, const Image& short_focus, const Image& telephoto);

void save_degradation(const std::filesystem::path& path, DegradationNet& net, const TrainConfig& cfg);
/// With `expected`, the stored architecture must match it (CheckpointError otherwise).
DegradationNet load_degradation(const std::filesystem::path& path, const TrainConfig* expected = nullptr);

void save_zooming(const std::filesystem::path& path, ZoomingNet& net);
ZoomingNet load_zooming(const std::filesystem::path& path);

/// Mean of the first and last `window` entries.
std::pair<double, double> smoothed_endpoints(const std::vector<double>& values, std::size_t window = 20);

}  // namespace dzsr
