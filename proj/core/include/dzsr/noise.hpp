#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dzsr/image.hpp"

namespace dzsr {

/// Ranges for the three synthetic noise sources.
struct NoiseSpec {
  std::array<double, 2> gaussian_sigma_range{5.0 / 255.0, 30.0 / 255.0};
  /// Quality >= 100 disables the JPEG stage.
  std::array<int, 2> jpeg_quality_range{60, 95};
  /// Heteroscedastic sensor noise, variance a * x + b.
  std::array<double, 2> sensor_a_range{1e-4, 1e-3};
  std::array<double, 2> sensor_b_range{1e-6, 1e-5};

  static NoiseSpec disabled();
  void validate() const;
};

enum class NoiseStage : std::uint8_t { kGaussian, kJpeg, kSensor };

/// Concrete parameters drawn for one inject_noise call.
struct NoiseDraw {
  std::array<NoiseStage, 3> order{NoiseStage::kGaussian, NoiseStage::kJpeg, NoiseStage::kSensor};
  double gaussian_sigma = 0.0;
  int jpeg_quality = 100;
  double sensor_a = 0.0;
  double sensor_b = 0.0;

  /// e.g. "gaussian,jpeg,sensor"
  std::string order_string() const;
  static std::array<NoiseStage, 3> parse_order(const std::string& s);
};

struct NoisyImage {
  Image noisy;
  /// noisy - clean; clean + residual == noisy holds exactly in float.
  std::vector<float> residual;
  NoiseDraw draw;
};

NoisyImage inject_noise(const Image& img, const NoiseSpec& spec, std::uint64_t seed);

/// 8-bit baseline JPEG encode/decode round trip at the given quality.
Image jpeg_roundtrip(const Image& img, int quality);

}  // namespace dzsr
