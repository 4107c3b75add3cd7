#include "dzsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <torch/torch.h>

#include "dzsr/error.hpp"

namespace dzsr {

Image::Image(int h, int w, float fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * kChannels, fill) {
  if (h < 0 || w < 0) throw DimensionError("negative image dimensions");
}

void validate(const Image& img) {
  if (img.height < 8 || img.width < 8) {
    throw DimensionError("image must be at least 8x8, got " + std::to_string(img.height) + "x" +
                         std::to_string(img.width));
  }
  if (img.pixels.size() != static_cast<std::size_t>(img.height) * img.width * Image::kChannels) {
    throw DimensionError("pixel buffer does not match image dimensions");
  }
  for (float v : img.pixels) {
    if (!std::isfinite(v)) throw NumericError("image contains non-finite values");
  }
}

Image clamp01(Image img) {
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

Image quantize16(Image img) {
  for (float& v : img.pixels) {
    const float q = std::nearbyint(std::clamp(v, 0.0f, 1.0f) * 65535.0f);
    v = q / 65535.0f;
  }
  return img;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > img.height || x0 + w > img.width) {
    throw DimensionError("crop window outside image");
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = &img.pixels[(static_cast<std::size_t>(y0 + y) * img.width + x0) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.pixels[static_cast<std::size_t>(y) * w * 3]);
  }
  return out;
}

Image area_downsample(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("downsample factor must be >= 1");
  if (img.height % factor != 0) throw DimensionError("height not divisible by downsample factor");
  if (img.width % factor != 0) throw DimensionError("width not divisible by downsample factor");
  const int h = img.height / factor;
  const int w = img.width / factor;
  Image out(h, w);
  const double norm = 1.0 / (static_cast<double>(factor) * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += img.at(y * factor + dy, x * factor + dx, c);
        }
        out.at(y, x, c) = static_cast<float>(acc * norm);
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  Image tmp(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * img.at(y, std::clamp(x + i, 0, img.width - 1), c);
        }
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(std::clamp(y + i, 0, img.height - 1), x, c);
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image bicubic_upsample(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("upsample factor must be >= 1");
  if (factor == 1) return img;
  namespace F = torch::nn::functional;
  torch::NoGradGuard no_grad;
  auto up = F::interpolate(to_tensor(img).unsqueeze(0),
                           F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{img.height * factor, img.width * factor})
                               .mode(torch::kBicubic)
                               .align_corners(false));
  return from_tensor(up);
}

Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Image rotate90(const Image& img) {
  Image out(img.width, img.height);
  for (int i = 0; i < out.height; ++i)
    for (int j = 0; j < out.width; ++j)
      for (int c = 0; c < 3; ++c) out.at(i, j, c) = img.at(j, img.width - 1 - i, c);
  return out;
}

double mean_value(const Image& img) {
  double acc = 0.0;
  for (float v : img.pixels) acc += v;
  return img.pixels.empty() ? 0.0 : acc / static_cast<double>(img.pixels.size());
}

torch::Tensor to_tensor(const Image& img) {
  auto hwc = torch::from_blob(const_cast<float*>(img.pixels.data()), {img.height, img.width, 3},
                              torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous();
}

Image from_tensor(const torch::Tensor& t) {
  torch::Tensor chw = t.dim() == 4 ? t.squeeze(0) : t;
  if (chw.dim() != 3 || chw.size(0) != 3) {
    throw DimensionError("expected a [3, H, W] tensor");
  }
  chw = chw.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(chw.size(0)), static_cast<int>(chw.size(1)));
  std::copy(chw.data_ptr<float>(), chw.data_ptr<float>() + chw.numel(), out.pixels.begin());
  return out;
}

torch::Tensor to_batch(std::span<const Image> images) {
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const Image& img : images) parts.push_back(to_tensor(img));
  return torch::stack(parts);
}

}  // namespace dzsr
