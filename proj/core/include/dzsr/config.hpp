#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dzsr/adastn.hpp"

namespace dzsr {

/// Every knob of both training stages. Defaults are desk scale;
/// configs/full_scale.cfg holds the full training scale.
struct TrainConfig {
  int ratio = 2;
  int lr_patch = 32;
  int batch = 4;
  int epochs = 250;      // stage 2
  int deg_epochs = 150;  // stage 1
  double lr = 5e-4;
  double lr_decayed = 2.5e-4;  // applied from the midpoint epoch on
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double zero_prob = 0.3;
  double lambda_c = 100.0;
  double lambda_sw = 0.08;
  std::uint64_t seed = 0;
  bool hflip = true;
  bool vflip = true;
  bool rot90 = true;
  bool pseudo_noise = true;  // inject synthetic noise into the pseudo-LR

  // Zooming network
  int channels = 24;
  int blocks = 4;
  int feature_channels = 16;
  int estimator_channels = 16;
  int adastn_stages = 3;
  std::string offset_mode = "adastn";
  int match_patch = 3;
  int match_stride = 1;

  // Degradation network
  int deg_channels = 32;
  int deg_guidance_channels = 16;
  int deg_kernel = 3;

  // Loss
  int perceptual_channels = 16;
  int perceptual_scales = 3;
  std::uint64_t perceptual_seed = 2022;
  int sw_projections = 0;  // 0 = channel count

  int log_every = 50;

  void validate() const;
};

/// Parses "key=value" lines; '#' starts a comment, blank lines are skipped.
/// Unknown keys and malformed values throw ConfigError. Missing keys keep
/// their defaults.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path);

/// All fields, one "key=value" per line, in a fixed order.
std::string serialize_config(const TrainConfig& cfg);

enum class NetKind : std::uint32_t { kDegradation = 1, kZooming = 2 };

/// FNV-1a over the fields that determine the parameter layout of `kind`.
std::uint64_t architecture_fingerprint(const TrainConfig& cfg, NetKind kind);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace dzsr
