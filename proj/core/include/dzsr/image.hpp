#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <torch/types.h>

namespace dzsr {

/// Linear-RGB float raster, interleaved HWC with three channels.
struct Image {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Throws NumericError on non-finite values and DimensionError when either
/// side is smaller than 8 pixels.
void validate(const Image& img);

Image clamp01(Image img);

/// Rounds every value to the nearest multiple of 1/65535 so that a 16-bit PNG
/// round trip reproduces the floats bit-exactly.
Image quantize16(Image img);

Image crop(const Image& img, int y0, int x0, int h, int w);

/// Mean over non-overlapping factor x factor blocks.
Image area_downsample(const Image& img, int factor);

/// Separable Gaussian blur with replicated borders; sigma <= 0 is a copy.
Image gaussian_blur(const Image& img, double sigma);

/// Bicubic (a = -0.75, half-pixel centers) upsampling by an integer factor.
Image bicubic_upsample(const Image& img, int factor);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
/// Counter-clockwise quarter turn: out(i, j) = in(j, W - 1 - i).
Image rotate90(const Image& img);

double mean_value(const Image& img);

/// [3, H, W] float32 tensor sharing no storage with the image.
torch::Tensor to_tensor(const Image& img);
/// Accepts [3, H, W] or [1, 3, H, W].
Image from_tensor(const torch::Tensor& t);

/// Stacks equally sized images into [N, 3, H, W].
torch::Tensor to_batch(std::span<const Image> images);

}  // namespace dzsr
