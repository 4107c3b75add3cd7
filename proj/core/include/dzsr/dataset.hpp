#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dzsr/dualzoom.hpp"

namespace dzsr {

/// Dataset directory layout:
///   <root>/<sample_id>/short.png   16-bit RGB, LR (short-focus center crop)
///   <root>/<sample_id>/tele.png    16-bit RGB, telephoto / ground truth
///   <root>/<sample_id>/warp.bin    "DZWF" + u16 H + u16 W, then float32 LE [H, W, 2]
///   <root>/<sample_id>/meta.txt    key=value lines
namespace dataset_files {
inline constexpr const char* kShort = "short.png";
inline constexpr const char* kTele = "tele.png";
inline constexpr const char* kWarp = "warp.bin";
inline constexpr const char* kMeta = "meta.txt";
}  // namespace dataset_files

void write_warp(const std::filesystem::path& path, const WarpField& warp);
WarpField read_warp(const std::filesystem::path& path);

void write_sample(const std::filesystem::path& dir, const DualZoomSample& sample);
DualZoomSample read_sample(const std::filesystem::path& dir);

struct NamedSample {
  std::string id;
  DualZoomSample sample;
};

void write_dataset(const std::filesystem::path& root, const std::vector<NamedSample>& samples);
/// Samples sorted by id. Throws DataError if the directory is missing or empty.
std::vector<NamedSample> read_dataset(const std::filesystem::path& root);

std::string sample_id(int index);

/// Parameters of a synthetic dataset build.
struct GenerateOptions {
  int scenes = 32;
  int ratio = 2;
  /// Scene (telephoto) side length in pixels.
  int size = 128;
  std::uint64_t seed = 0;
  PairConfig pair;
};

/// Deterministic in options; sample i uses scene seed derive_seed(seed, i).
std::vector<NamedSample> generate_dataset(const GenerateOptions& opts);

}  // namespace dzsr
