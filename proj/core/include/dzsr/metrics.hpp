#pragma once

#include <cstdint>
#include <vector>

#include "dzsr/image.hpp"

namespace dzsr {

/// Pixel selection for region metrics; 1 = included.
struct RegionMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> keep;

  std::int64_t count() const;
};

RegionMask full_mask(int height, int width);

/// Everything except the centered (H / r) x (W / r) window.
RegionMask corner_mask(int height, int width, int ratio);

/// Mean squared error over all channels of the masked pixels, in double.
double masked_mse(const Image& a, const Image& b, const RegionMask& mask);

/// 10 log10(1 / MSE); +infinity when the images agree on the region.
double psnr(const Image& a, const Image& b);
double masked_psnr(const Image& a, const Image& b, const RegionMask& mask);

/// Per-pixel SSIM averaged over channels (K1 = 0.01, K2 = 0.03, 11x11
/// Gaussian window with sigma 1.5). Near borders the window is clipped to the
/// image and renormalized, so the map has the image's size.
std::vector<double> ssim_map(const Image& a, const Image& b);

double ssim(const Image& a, const Image& b);
double masked_ssim(const Image& a, const Image& b, const RegionMask& mask);

}  // namespace dzsr
