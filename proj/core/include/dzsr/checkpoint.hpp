#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/nn/module.h>

#include "dzsr/config.hpp"

namespace dzsr {

/// Binary layout (little endian):
///   "DZSRCKPT" | u32 version | u32 kind | u64 fingerprint
///   u32 config length | config text (serialize_config)
///   u32 tensor count | per tensor: u32 name length, name, u32 ndim, i64 dims..., float32 data
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  NetKind kind = NetKind::kZooming;
  std::uint64_t fingerprint = 0;
  std::string config_text;
  std::vector<std::pair<std::string, torch::Tensor>> params;

  TrainConfig config() const { return parse_config(config_text); }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of a module's parameters (float32, detached copies).
Checkpoint capture_checkpoint(const torch::nn::Module& module, NetKind kind, const TrainConfig& cfg);

/// Copies parameters into `module`. Throws CheckpointError on a kind or
/// fingerprint mismatch, or when names or shapes disagree.
void apply_checkpoint(torch::nn::Module& module, const Checkpoint& ckpt, NetKind kind, std::uint64_t fingerprint);

/// FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace dzsr
