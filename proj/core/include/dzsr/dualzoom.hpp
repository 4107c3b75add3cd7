#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dzsr/image.hpp"
#include "dzsr/noise.hpp"

namespace dzsr {

/// Per-pixel displacement [H, W, 2] in pixels; component 0 is the row offset.
/// A warped image samples its source at (y + dy, x + dx).
struct WarpField {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  WarpField() = default;
  WarpField(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 2, 0.0f) {}

  float& dy(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  float& dx(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
  float dy(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  float dx(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }

  float max_abs() const;

  friend bool operator==(const WarpField&, const WarpField&) = default;
};

/// Blur and noise draws that produced a sample.
struct DegradationMeta {
  double blur_sigma = 0.0;
  NoiseDraw noise;
};

/// One capture pair as it looks after color matching and flow pre-alignment.
///
/// `short_focus` is the center crop of the short-focus capture (the LR input).
/// `telephoto` shows the same field of view at `ratio` times the resolution
/// and doubles as ground truth; its own center crop is the Ref image.
struct DualZoomSample {
  Image short_focus;
  Image telephoto;
  int ratio = 2;
  WarpField true_warp;
  std::uint64_t gen_seed = 0;
  double warp_bound = 0.0;
  DegradationMeta meta;
  /// Noise-free LR (blur + downsample of the unwarped scene). Not persisted.
  Image clean_short;

  Image reference() const;
};

/// Knobs of the synthetic capture model.
struct PairConfig {
  double warp_bound = 3.0;
  /// Blur sigma (HR pixels) drawn uniformly from this range; {0, 0} disables blur.
  std::array<double, 2> blur_sigma_range{0.8, 2.4};
  bool noise_enabled = true;
  NoiseSpec noise;
  /// Amplitude of a random per-channel gain applied to the telephoto before
  /// color matching it back to the short-focus statistics. 0 disables.
  double color_cast = 0.0;
  /// Control points per side of the smooth warp lattice.
  int warp_control_points = 4;
};

/// Center window of H/ratio x W/ratio. Throws DimensionError naming the axis
/// that is not divisible by ratio.
Image center_crop(const Image& img, int ratio);

/// Gaussian PSF sigma (pixels) applied to every synthesized scene.
inline constexpr double kScenePsfSigma = 0.7;

/// Procedural scene (gradients, rectangles, ellipses, sinusoids, gratings),
/// blurred by kScenePsfSigma.
/// Requires dims divisible by `multiple` (4 * r_max by default).
Image synthesize_scene(std::uint64_t seed, int height, int width, int multiple = 16);

/// Smooth random displacement field with max |component| <= bound.
WarpField random_smooth_warp(std::uint64_t seed, int height, int width, double bound,
                             int control_points = 4);

/// Bilinear resampling at (y + dy, x + dx) with clamped borders.
Image warp_image(const Image& img, const WarpField& warp);

/// Builds a dual-zoom pair from a scene rendered at telephoto resolution.
DualZoomSample make_dualzoom_pair(const Image& hr, int ratio, const PairConfig& cfg,
                                  std::uint64_t seed);

/// Per-channel affine map matching mean and std of `target`, then clamped.
/// A zero-variance source channel only gets its mean shifted (with a warning).
Image color_match(const Image& src, const Image& target);

enum class Augment : std::uint8_t { kHFlip = 1, kVFlip = 2, kRot90 = 4 };

/// Applies the flags (hflip, then vflip, then rot90) to short, tele, warp and
/// the clean LR consistently.
DualZoomSample augment(const DualZoomSample& s, unsigned flags);

WarpField flip_horizontal(const WarpField& w);
WarpField flip_vertical(const WarpField& w);
WarpField rotate90(const WarpField& w);

}  // namespace dzsr
