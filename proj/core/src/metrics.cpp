#include "dzsr/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "dzsr/error.hpp"

namespace dzsr {
namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_pair(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("metric inputs differ in dims");
}

void check_mask(const Image& a, const RegionMask& m) {
  if (m.height != a.height || m.width != a.width) throw DimensionError("mask dims differ from image dims");
}

std::array<double, 2 * kRadius + 1> gaussian_taps() {
  std::array<double, 2 * kRadius + 1> g{};
  for (int d = -kRadius; d <= kRadius; ++d) g[d + kRadius] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
  return g;
}

// Separable filtering along one axis with the window clipped to the image and
// its weights renormalized.
std::vector<double> filter_axis(const std::vector<double>& in, int H, int W, bool along_rows) {
  static const auto g = gaussian_taps();
  std::vector<double> out(in.size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int d = -kRadius; d <= kRadius; ++d) {
        const int yy = along_rows ? y + d : y;
        const int xx = along_rows ? x : x + d;
        if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
        acc += g[d + kRadius] * in[static_cast<std::size_t>(yy) * W + xx];
        norm += g[d + kRadius];
      }
      out[static_cast<std::size_t>(y) * W + x] = acc / norm;
    }
  }
  return out;
}

std::vector<double> local_mean(const std::vector<double>& v, int H, int W) {
  return filter_axis(filter_axis(v, H, W, true), H, W, false);
}

}  // namespace

std::int64_t RegionMask::count() const {
  std::int64_t n = 0;
  for (auto k : keep) n += k;
  return n;
}

RegionMask full_mask(int height, int width) {
  return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1)};
}

RegionMask corner_mask(int height, int width, int ratio) {
  if (ratio < 1) throw ConfigError("corner_mask: ratio must be >= 1");
  if (height % ratio != 0) throw DimensionError("corner_mask: height not divisible by ratio");
  if (width % ratio != 0) throw DimensionError("corner_mask: width not divisible by ratio");
  RegionMask m = full_mask(height, width);
  const int h = height / ratio, w = width / ratio;
  const int y0 = (height - h) / 2, x0 = (width - w) / 2;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m.keep[static_cast<std::size_t>(y) * width + x] = 0;
  return m;
}

double masked_mse(const Image& a, const Image& b, const RegionMask& mask) {
  check_pair(a, b);
  check_mask(a, mask);
  double sum = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!mask.keep[static_cast<std::size_t>(y) * a.width + x]) continue;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double d = static_cast<double>(a.at(y, x, c)) - b.at(y, x, c);
        sum += d * d;
      }
      n += Image::kChannels;
    }
  }
  if (n == 0) throw DimensionError("masked metric over an empty region");
  return sum / static_cast<double>(n);
}

double masked_psnr(const Image& a, const Image& b, const RegionMask& mask) {
  const double mse = masked_mse(a, b, mask);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const Image& a, const Image& b) { return masked_psnr(a, b, full_mask(a.height, a.width)); }

std::vector<double> ssim_map(const Image& a, const Image& b) {
  check_pair(a, b);
  const int H = a.height, W = a.width;
  const std::size_t n = static_cast<std::size_t>(H) * W;
  std::vector<double> map(n, 0.0);
  for (int c = 0; c < Image::kChannels; ++c) {
    std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
      va[i] = a.pixels[i * Image::kChannels + c];
      vb[i] = b.pixels[i * Image::kChannels + c];
      aa[i] = va[i] * va[i];
      bb[i] = vb[i] * vb[i];
      ab[i] = va[i] * vb[i];
    }
    const auto mu_a = local_mean(va, H, W), mu_b = local_mean(vb, H, W);
    const auto e_aa = local_mean(aa, H, W), e_bb = local_mean(bb, H, W), e_ab = local_mean(ab, H, W);
    for (std::size_t i = 0; i < n; ++i) {
      const double s_aa = e_aa[i] - mu_a[i] * mu_a[i];
      const double s_bb = e_bb[i] - mu_b[i] * mu_b[i];
      const double s_ab = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * s_ab + kC2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (s_aa + s_bb + kC2);
      map[i] += num / den;
    }
  }
  for (auto& v : map) v /= Image::kChannels;
  return map;
}

double masked_ssim(const Image& a, const Image& b, const RegionMask& mask) {
  check_pair(a, b);
  check_mask(a, mask);
  const auto map = ssim_map(a, b);
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!mask.keep[i]) continue;
    sum += map[i];
    ++n;
  }
  if (n == 0) throw DimensionError("masked metric over an empty region");
  return sum / static_cast<double>(n);
}

double ssim(const Image& a, const Image& b) { return masked_ssim(a, b, full_mask(a.height, a.width)); }

}  // namespace dzsr
