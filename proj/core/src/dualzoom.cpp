#include "dzsr/dualzoom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>


#include "dzsr/error.hpp"
#include "dzsr/log.hpp"
#include "dzsr/rng.hpp"

namespace dzsr {
namespace {

using Rgb = std::array<float, 3>;

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  return {u(rng), u(rng), u(rng)};
}

void blend(Image& img, int y, int x, const Rgb& c, float alpha) {
  for (int k = 0; k < 3; ++k) img.at(y, x, k) = (1.0f - alpha) * img.at(y, x, k) + alpha * c[k];
}

double bspline_weight(int i, double t) {
  switch (i) {
    case 0: return (1 - t) * (1 - t) * (1 - t) / 6.0;
    case 1: return (3 * t * t * t - 6 * t * t + 4) / 6.0;
    case 2: return (-3 * t * t * t + 3 * t * t + 3 * t + 1) / 6.0;
    default: return t * t * t / 6.0;
  }
}

}  // namespace

float WarpField::max_abs() const {
  float m = 0.0f;
  for (float v : data) m = std::max(m, std::abs(v));
  return m;
}

Image DualZoomSample::reference() const { return center_crop(telephoto, ratio); }

Image center_crop(const Image& img, int ratio) {
  if (ratio < 1) throw ConfigError("crop ratio must be >= 1");
  if (img.height % ratio != 0) {
    throw DimensionError("center_crop: height " + std::to_string(img.height) +
                         " not divisible by ratio " + std::to_string(ratio));
  }
  if (img.width % ratio != 0) {
    throw DimensionError("center_crop: width " + std::to_string(img.width) +
                         " not divisible by ratio " + std::to_string(ratio));
  }
  const int h = img.height / ratio;
  const int w = img.width / ratio;
  return crop(img, (img.height - h) / 2, (img.width - w) / 2, h, w);
}

Image synthesize_scene(std::uint64_t seed, int height, int width, int multiple) {
  if (height <= 0 || width <= 0 || height % multiple != 0) {
    throw DimensionError("synthesize_scene: height must be a positive multiple of " +
                         std::to_string(multiple));
  }
  if (width % multiple != 0) {
    throw DimensionError("synthesize_scene: width must be a positive multiple of " +
                         std::to_string(multiple));
  }
  std::mt19937_64 rng(derive_seed(seed, 0x5ce7e));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = std::min(height, width);

  Image img(height, width);
  {
    const Rgb c0 = random_color(rng), c1 = random_color(rng);
    const double angle = u(rng) * 2.0 * std::numbers::pi;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double t = std::clamp(0.5 + ((x - width / 2.0) * ca + (y - height / 2.0) * sa) / scale, 0.0, 1.0);
        for (int k = 0; k < 3; ++k) img.at(y, x, k) = static_cast<float>((1 - t) * c0[k] + t * c1[k]);
      }
    }
  }

  // Sinusoidal texture patches.
  const int n_tex = 2 + static_cast<int>(u(rng) * 3);
  for (int n = 0; n < n_tex; ++n) {
    const int h = static_cast<int>((0.2 + 0.4 * u(rng)) * height);
    const int w = static_cast<int>((0.2 + 0.4 * u(rng)) * width);
    const int y0 = static_cast<int>(u(rng) * (height - h));
    const int x0 = static_cast<int>(u(rng) * (width - w));
    const double fy = (0.05 + 0.45 * u(rng)) * (u(rng) < 0.5 ? -1 : 1);
    const double fx = 0.05 + 0.45 * u(rng);
    const double phase = u(rng) * 2 * std::numbers::pi;
    const Rgb ca = random_color(rng), cb = random_color(rng);
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        const double s = 0.5 + 0.5 * std::sin(fy * y + fx * x + phase);
        for (int k = 0; k < 3; ++k) img.at(y, x, k) = static_cast<float>(s * ca[k] + (1 - s) * cb[k]);
      }
    }
  }

  // Rectangles, some outlined.
  const int n_rect = 5 + static_cast<int>(u(rng) * 6);
  for (int n = 0; n < n_rect; ++n) {
    const int h = std::max(2, static_cast<int>((0.05 + 0.25 * u(rng)) * height));
    const int w = std::max(2, static_cast<int>((0.05 + 0.25 * u(rng)) * width));
    const int y0 = static_cast<int>(u(rng) * (height - h));
    const int x0 = static_cast<int>(u(rng) * (width - w));
    const Rgb c = random_color(rng);
    const bool outline = u(rng) < 0.3;
    const int thick = 1 + static_cast<int>(u(rng) * 3);
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        const bool edge = y - y0 < thick || y0 + h - 1 - y < thick || x - x0 < thick || x0 + w - 1 - x < thick;
        if (!outline || edge) blend(img, y, x, c, 1.0f);
      }
    }
  }

  // Ellipses.
  const int n_ell = 4 + static_cast<int>(u(rng) * 5);
  for (int n = 0; n < n_ell; ++n) {
    const double cy = u(rng) * height, cx = u(rng) * width;
    const double ry = (0.03 + 0.15 * u(rng)) * scale, rx = (0.03 + 0.15 * u(rng)) * scale;
    const Rgb c = random_color(rng);
    const int ylo = std::max(0, static_cast<int>(cy - ry - 1)), yhi = std::min(height - 1, static_cast<int>(cy + ry + 1));
    const int xlo = std::max(0, static_cast<int>(cx - rx - 1)), xhi = std::min(width - 1, static_cast<int>(cx + rx + 1));
    for (int y = ylo; y <= yhi; ++y) {
      for (int x = xlo; x <= xhi; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        if (dy * dy + dx * dx <= 1.0) blend(img, y, x, c, 1.0f);
      }
    }
  }

  // Line gratings: a square patch of parallel stripes.
  const int n_grat = 1 + static_cast<int>(u(rng) * 2);
  for (int n = 0; n < n_grat; ++n) {
    const int side = std::max(8, static_cast<int>((0.15 + 0.2 * u(rng)) * scale));
    const int y0 = static_cast<int>(u(rng) * (height - side));
    const int x0 = static_cast<int>(u(rng) * (width - side));
    const int period = 3 + static_cast<int>(u(rng) * 6);
    const bool vertical = u(rng) < 0.5;
    const Rgb ca = random_color(rng), cb = random_color(rng);
    for (int y = y0; y < y0 + side; ++y) {
      for (int x = x0; x < x0 + side; ++x) {
        const int coord = vertical ? x - x0 : y - y0;
        blend(img, y, x, (coord % period) * 2 < period ? ca : cb, 1.0f);
      }
    }
  }

  // Thin random lines.
  const int n_lines = 3 + static_cast<int>(u(rng) * 5);
  for (int n = 0; n < n_lines; ++n) {
    const double y0 = u(rng) * height, x0 = u(rng) * width;
    const double y1 = u(rng) * height, x1 = u(rng) * width;
    const Rgb c = random_color(rng);
    const int steps = static_cast<int>(std::hypot(y1 - y0, x1 - x0) * 2) + 1;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const int y = std::clamp(static_cast<int>(y0 + t * (y1 - y0)), 0, height - 1);
      const int x = std::clamp(static_cast<int>(x0 + t * (x1 - x0)), 0, width - 1);
      blend(img, y, x, c, 1.0f);
    }
  }

  // Lens PSF of the telephoto camera; the pixel-sharp primitives above would
  // otherwise alias far more than any real capture.
  img = gaussian_blur(img, kScenePsfSigma);
  return quantize16(clamp01(std::move(img)));
}

WarpField random_smooth_warp(std::uint64_t seed, int height, int width, double bound, int control_points) {
  if (bound < 0.0) throw ConfigError("warp_bound must be >= 0");
  WarpField field(height, width);
  if (bound == 0.0) return field;
  if (control_points < 1) throw ConfigError("warp lattice needs at least one control point");

  std::mt19937_64 rng(derive_seed(seed, 0x3a4b));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = control_points + 3;
  std::vector<double> lattice(static_cast<std::size_t>(n) * n * 2);
  for (double& v : lattice) v = u(rng);

  std::vector<double> raw(field.data.size());
  double peak = 0.0;
  for (int y = 0; y < height; ++y) {
    const double gy = (y + 0.5) / height * control_points;
    const int iy = std::min(static_cast<int>(gy), control_points - 1);
    const double ty = gy - iy;
    for (int x = 0; x < width; ++x) {
      const double gx = (x + 0.5) / width * control_points;
      const int ix = std::min(static_cast<int>(gx), control_points - 1);
      const double tx = gx - ix;
      for (int comp = 0; comp < 2; ++comp) {
        double acc = 0.0;
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            acc += bspline_weight(a, ty) * bspline_weight(b, tx) *
                   lattice[((static_cast<std::size_t>(iy + a) * n) + (ix + b)) * 2 + comp];
          }
        }
        raw[(static_cast<std::size_t>(y) * width + x) * 2 + comp] = acc;
        peak = std::max(peak, std::abs(acc));
      }
    }
  }
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  const double target = bound * amp(rng);
  const double s = peak > 0.0 ? target / peak : 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    field.data[i] = static_cast<float>(std::clamp(raw[i] * s, -bound, bound));
  }
  return field;
}

Image warp_image(const Image& img, const WarpField& warp) {
  if (warp.height != img.height || warp.width != img.width) {
    throw DimensionError("warp field dims differ from image dims");
  }
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dy = warp.dy(y, x), dx = warp.dx(y, x);
      if (dy == 0.0 && dx == 0.0) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, c);
        continue;
      }
      const double py = std::clamp(y + dy, 0.0, img.height - 1.0);
      const double px = std::clamp(x + dx, 0.0, img.width - 1.0);
      const int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
      const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
      const double ly = py - y0, lx = px - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - ly) * ((1 - lx) * img.at(y0, x0, c) + lx * img.at(y0, x1, c)) +
                         ly * ((1 - lx) * img.at(y1, x0, c) + lx * img.at(y1, x1, c));
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

DualZoomSample make_dualzoom_pair(const Image& hr, int ratio, const PairConfig& cfg, std::uint64_t seed) {
  validate(hr);
  if (ratio < 2) throw ConfigError("zoom ratio must be >= 2");
  if (cfg.warp_bound < 0.0) throw ConfigError("warp_bound must be >= 0");
  const int sq = ratio * ratio;
  if (hr.height % sq != 0) throw DimensionError("make_dualzoom_pair: height not divisible by ratio^2");
  if (hr.width % sq != 0) throw DimensionError("make_dualzoom_pair: width not divisible by ratio^2");
  if (cfg.noise_enabled) cfg.noise.validate();

  std::mt19937_64 rng(derive_seed(seed, 0xd2));
  DualZoomSample s;
  s.ratio = ratio;
  s.gen_seed = seed;
  s.warp_bound = cfg.warp_bound;

  const auto [blur_lo, blur_hi] = cfg.blur_sigma_range;
  s.meta.blur_sigma = blur_hi > blur_lo ? std::uniform_real_distribution<double>(blur_lo, blur_hi)(rng) : blur_lo;
  s.clean_short = area_downsample(gaussian_blur(hr, s.meta.blur_sigma), ratio);

  if (cfg.noise_enabled) {
    NoisyImage noisy = inject_noise(s.clean_short, cfg.noise, derive_seed(seed, 0x0153));
    s.short_focus = quantize16(std::move(noisy.noisy));
    s.meta.noise = noisy.draw;
  } else {
    s.short_focus = quantize16(s.clean_short);
  }

  s.true_warp = random_smooth_warp(derive_seed(seed, 0x3a7), hr.height, hr.width, cfg.warp_bound,
                                   cfg.warp_control_points);
  Image tele = warp_image(hr, s.true_warp);
  if (cfg.color_cast > 0.0) {
    std::uniform_real_distribution<double> gain(1.0 - cfg.color_cast, 1.0 + cfg.color_cast);
    for (int c = 0; c < 3; ++c) {
      const float g = static_cast<float>(gain(rng));
      for (int y = 0; y < tele.height; ++y)
        for (int x = 0; x < tele.width; ++x) tele.at(y, x, c) *= g;
    }
    tele = color_match(clamp01(std::move(tele)), s.clean_short);
  }
  s.telephoto = quantize16(std::move(tele));
  return s;
}

Image color_match(const Image& src, const Image& target) {
  Image out = src;
  for (int c = 0; c < 3; ++c) {
    auto stats = [c](const Image& img) {
      double sum = 0.0, sq = 0.0;
      const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
      for (std::size_t i = 0; i < n; ++i) sum += img.pixels[i * 3 + c];
      const double mean = sum / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = img.pixels[i * 3 + c] - mean;
        sq += d * d;
      }
      return std::pair{mean, std::sqrt(sq / static_cast<double>(n))};
    };
    const auto [ms, ss] = stats(src);
    const auto [mt, st] = stats(target);
    double gain = 1.0;
    if (ss < 1e-12) {
      log::warn("color_match: source channel " + std::to_string(c) + " has zero variance; shifting mean only");
    } else {
      gain = st / ss;
    }
    const std::size_t n = static_cast<std::size_t>(src.height) * src.width;
    for (std::size_t i = 0; i < n; ++i) {
      out.pixels[i * 3 + c] = static_cast<float>((src.pixels[i * 3 + c] - ms) * gain + mt);
    }
  }
  return clamp01(std::move(out));
}

WarpField flip_horizontal(const WarpField& w) {
  WarpField out(w.height, w.width);
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) {
      out.dy(y, x) = w.dy(y, w.width - 1 - x);
      out.dx(y, x) = -w.dx(y, w.width - 1 - x);
    }
  return out;
}

WarpField flip_vertical(const WarpField& w) {
  WarpField out(w.height, w.width);
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) {
      out.dy(y, x) = -w.dy(w.height - 1 - y, x);
      out.dx(y, x) = w.dx(w.height - 1 - y, x);
    }
  return out;
}

WarpField rotate90(const WarpField& w) {
  WarpField out(w.width, w.height);
  for (int i = 0; i < out.height; ++i)
    for (int j = 0; j < out.width; ++j) {
      out.dy(i, j) = -w.dx(j, w.width - 1 - i);
      out.dx(i, j) = w.dy(j, w.width - 1 - i);
    }
  return out;
}

DualZoomSample augment(const DualZoomSample& s, unsigned flags) {
  DualZoomSample out = s;
  auto apply = [&out](auto&& img_op, auto&& warp_op) {
    out.short_focus = img_op(out.short_focus);
    out.telephoto = img_op(out.telephoto);
    if (out.clean_short.size() > 0) out.clean_short = img_op(out.clean_short);
    if (!out.true_warp.data.empty()) out.true_warp = warp_op(out.true_warp);
  };
  if (flags & static_cast<unsigned>(Augment::kHFlip)) {
    apply([](const Image& i) { return flip_horizontal(i); }, [](const WarpField& w) { return flip_horizontal(w); });
  }
  if (flags & static_cast<unsigned>(Augment::kVFlip)) {
    apply([](const Image& i) { return flip_vertical(i); }, [](const WarpField& w) { return flip_vertical(w); });
  }
  if (flags & static_cast<unsigned>(Augment::kRot90)) {
    apply([](const Image& i) { return rotate90(i); }, [](const WarpField& w) { return rotate90(w); });
  }
  return out;
}

}  // namespace dzsr
