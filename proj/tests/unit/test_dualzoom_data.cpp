#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dzsr/dataset.hpp"
#include "dzsr/dualzoom.hpp"
#include "dzsr/error.hpp"
#include "dzsr/noise.hpp"
#include "dzsr/rng.hpp"
#include "test_util.hpp"

using namespace dzsr;
using dzsr::testing::random_image;

namespace {

Image horizontal_gradient(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(x) / static_cast<float>(w - 1);
  return img;
}

double image_psnr(const Image& a, const Image& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  return 10.0 * std::log10(1.0 / mse);
}

std::array<double, 6> channel_stats(const Image& img) {
  std::array<double, 6> out{};
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) {
    double s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += img.pixels[i * 3 + c];
    const double m = s / n;
    for (std::size_t i = 0; i < n; ++i) sq += (img.pixels[i * 3 + c] - m) * (img.pixels[i * 3 + c] - m);
    out[c] = m;
    out[3 + c] = std::sqrt(sq / n);
  }
  return out;
}

PairConfig clean_config(double warp) {
  PairConfig cfg;
  cfg.warp_bound = warp;
  cfg.noise_enabled = false;
  cfg.blur_sigma_range = {0.0, 0.0};
  return cfg;
}

}  // namespace

TEST(CenterCrop, TakesMiddleWindow) {
  const Image img = random_image(400, 400, 1);
  const Image out = center_crop(img, 4);
  ASSERT_EQ(out.height, 100);
  ASSERT_EQ(out.width, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(y, x, c), img.at(y + 150, x + 150, c));
}

TEST(CenterCrop, RatioOneIsCopy) {
  const Image img = random_image(24, 40, 2);
  EXPECT_EQ(center_crop(img, 1), img);
}

TEST(CenterCrop, GradientOrigin) {
  const Image out = center_crop(horizontal_gradient(400, 400), 4);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 150.0f / 399.0f);
}

TEST(CenterCrop, NonDivisibleNamesAxis) {
  try {
    center_crop(random_image(402, 400, 3), 4);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
  try {
    center_crop(random_image(400, 398, 3), 4);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
  }
}

TEST(SynthesizeScene, Deterministic) {
  EXPECT_EQ(synthesize_scene(7, 256, 256), synthesize_scene(7, 256, 256));
}

TEST(SynthesizeScene, SeedSensitive) {
  const Image a = synthesize_scene(7, 256, 256);
  const Image b = synthesize_scene(8, 256, 256);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differ += a.pixels[i] != b.pixels[i];
  EXPECT_GE(static_cast<double>(differ), 0.01 * static_cast<double>(a.size()));
}

TEST(SynthesizeScene, RangeAndContrastOverHundredSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Image img = synthesize_scene(seed, 64, 64);
    const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
    ASSERT_GE(*lo, 0.0f) << seed;
    ASSERT_LE(*hi, 1.0f) << seed;
    const double m = mean_value(img);
    double sq = 0.0;
    for (float v : img.pixels) sq += (v - m) * (v - m);
    ASSERT_GE(std::sqrt(sq / img.size()), 0.05) << seed;
  }
}

TEST(SynthesizeScene, RejectsBadSize) {
  EXPECT_THROW(synthesize_scene(1, 100, 64), DimensionError);
}

TEST(DualZoomPair, ZeroWarpIdentity) {
  const Image hr = quantize16(synthesize_scene(3, 128, 128));
  const auto s = make_dualzoom_pair(hr, 2, clean_config(0.0), 5);
  EXPECT_EQ(s.telephoto, hr);
  EXPECT_EQ(s.reference(), center_crop(hr, 2));
  EXPECT_EQ(s.true_warp.max_abs(), 0.0f);
}

TEST(DualZoomPair, GeometryRatioFour) {
  PairConfig cfg;
  const auto s = make_dualzoom_pair(synthesize_scene(4, 256, 256), 4, cfg, 9);
  EXPECT_EQ(s.short_focus.height, 64);
  EXPECT_EQ(s.short_focus.width, 64);
  EXPECT_EQ(s.telephoto.height, 256);
  EXPECT_EQ(s.telephoto.width, 256);
  EXPECT_EQ(s.reference().height, 64);
  EXPECT_EQ(s.ratio, 4);
}

TEST(DualZoomPair, WarpWithinBound) {
  for (double bound : {0.5, 3.0, 6.0}) {
    PairConfig cfg;
    cfg.warp_bound = bound;
    const auto s = make_dualzoom_pair(synthesize_scene(5, 128, 128), 2, cfg, 21);
    EXPECT_LE(s.true_warp.max_abs(), bound + 1e-6);
    EXPECT_GT(s.true_warp.max_abs(), 0.0f);
  }
}

TEST(DualZoomPair, SameContentFloor) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Image hr = synthesize_scene(derive_seed(100, i), 128, 128);
    const auto s = make_dualzoom_pair(hr, 2, clean_config(0.0), i);
    const Image up = bicubic_upsample(s.short_focus, 2);
    EXPECT_GE(image_psnr(up, s.telephoto), 25.0) << i;
  }
}

TEST(DualZoomPair, Deterministic) {
  const Image hr = synthesize_scene(6, 128, 128);
  PairConfig cfg;
  cfg.color_cast = 0.1;
  const auto a = make_dualzoom_pair(hr, 2, cfg, 44);
  const auto b = make_dualzoom_pair(hr, 2, cfg, 44);
  EXPECT_EQ(a.short_focus, b.short_focus);
  EXPECT_EQ(a.telephoto, b.telephoto);
  EXPECT_EQ(a.true_warp, b.true_warp);
  EXPECT_EQ(a.meta.noise.order_string(), b.meta.noise.order_string());
  const auto c = make_dualzoom_pair(hr, 2, cfg, 45);
  EXPECT_NE(a.short_focus, c.short_focus);
}

TEST(DualZoomPair, Errors) {
  const Image hr = synthesize_scene(6, 128, 128);
  PairConfig cfg;
  cfg.warp_bound = -1.0;
  EXPECT_THROW(make_dualzoom_pair(hr, 2, cfg, 1), ConfigError);
  EXPECT_THROW(make_dualzoom_pair(hr, 1, PairConfig{}, 1), ConfigError);
  EXPECT_THROW(make_dualzoom_pair(random_image(120, 128, 1), 4, PairConfig{}, 1), DimensionError);
}

TEST(InjectNoise, ZeroStrengthIsIdentity) {
  const Image img = random_image(32, 32, 4);
  NoiseSpec spec = NoiseSpec::disabled();
  const auto out = inject_noise(img, spec, 3);
  EXPECT_EQ(out.noisy, img);
  for (float r : out.residual) ASSERT_EQ(r, 0.0f);
}

TEST(InjectNoise, ResidualExact) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Image img = random_image(48, 40, seed);
    const auto out = inject_noise(img, NoiseSpec{}, seed);
    for (std::size_t i = 0; i < img.size(); ++i) ASSERT_EQ(img.pixels[i] + out.residual[i], out.noisy.pixels[i]);
    for (float v : out.noisy.pixels) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(InjectNoise, GaussianStd) {
  NoiseSpec spec = NoiseSpec::disabled();
  spec.gaussian_sigma_range = {10.0 / 255.0, 10.0 / 255.0};
  const auto out = inject_noise(Image(256, 256, 0.5f), spec, 17);
  double s = 0.0, sq = 0.0;
  for (float r : out.residual) s += r;
  const double m = s / out.residual.size();
  for (float r : out.residual) sq += (r - m) * (r - m);
  const double sd = std::sqrt(sq / out.residual.size());
  EXPECT_NEAR(sd, 10.0 / 255.0, 0.05 * 10.0 / 255.0);
}

TEST(InjectNoise, OrderDrawnFromSeed) {
  const Image img = random_image(16, 16, 1);
  std::set<std::string> orders;
  for (std::uint64_t seed = 0; seed < 40; ++seed) orders.insert(inject_noise(img, NoiseSpec{}, seed).draw.order_string());
  EXPECT_EQ(orders.size(), 6u);
  for (const auto& o : orders) EXPECT_EQ(NoiseDraw::parse_order(o).size(), 3u);
}

TEST(InjectNoise, DrawsInsideRanges) {
  const NoiseSpec spec;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = inject_noise(random_image(16, 16, seed), spec, seed).draw;
    EXPECT_GE(d.gaussian_sigma, spec.gaussian_sigma_range[0]);
    EXPECT_LE(d.gaussian_sigma, spec.gaussian_sigma_range[1]);
    EXPECT_GE(d.jpeg_quality, spec.jpeg_quality_range[0]);
    EXPECT_LE(d.jpeg_quality, spec.jpeg_quality_range[1]);
    EXPECT_GE(d.sensor_a, spec.sensor_a_range[0]);
    EXPECT_LE(d.sensor_b, spec.sensor_b_range[1]);
  }
}

TEST(ColorMatch, FixedPoint) {
  const Image img = random_image(32, 32, 5);
  const Image out = color_match(img, img);
  for (std::size_t i = 0; i < img.size(); ++i) ASSERT_NEAR(out.pixels[i], img.pixels[i], 1e-6);
}

TEST(ColorMatch, MatchesTargetStats) {
  Image src = random_image(40, 40, 6);
  for (auto& v : src.pixels) v = 0.3f + 0.2f * v;
  Image target = random_image(24, 24, 7);
  for (auto& v : target.pixels) v = 0.4f + 0.3f * v;
  const auto out = channel_stats(color_match(src, target));
  const auto want = channel_stats(target);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(out[i], want[i], 1e-6) << i;
}

TEST(ColorMatch, ZeroVarianceShiftsMean) {
  const Image out = color_match(Image(16, 16, 0.2f), Image(8, 8, 0.6f));
  for (float v : out.pixels) ASSERT_NEAR(v, 0.6f, 1e-6);
}

TEST(Augment, ConsistentAcrossViews) {
  const Image hr = synthesize_scene(8, 64, 64);
  PairConfig cfg;
  cfg.warp_bound = 2.0;
  const auto s = make_dualzoom_pair(hr, 2, cfg, 3);
  for (unsigned flags = 0; flags < 8; ++flags) {
    const auto a = augment(s, flags);
    Image sh = s.short_focus, te = s.telephoto, hr2 = hr;
    WarpField w = s.true_warp;
    if (flags & static_cast<unsigned>(Augment::kHFlip)) {
      sh = flip_horizontal(sh); te = flip_horizontal(te); hr2 = flip_horizontal(hr2); w = flip_horizontal(w);
    }
    if (flags & static_cast<unsigned>(Augment::kVFlip)) {
      sh = flip_vertical(sh); te = flip_vertical(te); hr2 = flip_vertical(hr2); w = flip_vertical(w);
    }
    if (flags & static_cast<unsigned>(Augment::kRot90)) {
      sh = rotate90(sh); te = rotate90(te); hr2 = rotate90(hr2); w = rotate90(w);
    }
    EXPECT_EQ(a.short_focus, sh) << flags;
    EXPECT_EQ(a.telephoto, te) << flags;
    EXPECT_EQ(a.true_warp, w) << flags;
    // The transformed field still explains the transformed telephoto.
    const Image rewarped = quantize16(warp_image(hr2, w));
    double worst = 0.0;
    for (std::size_t i = 0; i < te.size(); ++i) worst = std::max(worst, std::abs(double(rewarped.pixels[i]) - te.pixels[i]));
    EXPECT_LT(worst, 1e-4) << flags;
  }
}

TEST(Dataset, RoundTrip) {
  dzsr::testing::TempDir dir("ds");
  GenerateOptions opts;
  opts.scenes = 3;
  opts.size = 64;
  opts.seed = 12;
  const auto samples = generate_dataset(opts);
  write_dataset(dir.path(), samples);
  const auto back = read_dataset(dir.path());
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back[i].id, samples[i].id);
    EXPECT_EQ(back[i].sample.short_focus, samples[i].sample.short_focus);
    EXPECT_EQ(back[i].sample.telephoto, samples[i].sample.telephoto);
    EXPECT_EQ(back[i].sample.true_warp, samples[i].sample.true_warp);
    EXPECT_EQ(back[i].sample.ratio, samples[i].sample.ratio);
    EXPECT_EQ(back[i].sample.gen_seed, samples[i].sample.gen_seed);
    EXPECT_DOUBLE_EQ(back[i].sample.meta.blur_sigma, samples[i].sample.meta.blur_sigma);
    EXPECT_EQ(back[i].sample.meta.noise.order_string(), samples[i].sample.meta.noise.order_string());
    EXPECT_EQ(back[i].sample.meta.noise.jpeg_quality, samples[i].sample.meta.noise.jpeg_quality);
  }
}

TEST(Dataset, GenerationDeterministic) {
  GenerateOptions opts;
  opts.scenes = 2;
  opts.size = 64;
  const auto a = generate_dataset(opts);
  const auto b = generate_dataset(opts);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].sample.telephoto, b[i].sample.telephoto);
}

TEST(Dataset, MissingDirectory) {
  EXPECT_THROW(read_dataset("/nonexistent/dzsr"), DataError);
}

TEST(Dataset, CorruptWarpRejected) {
  dzsr::testing::TempDir dir("warp");
  const auto p = dir.path() / "w.bin";
  { std::ofstream(p, std::ios::binary) << "XXXX"; }
  EXPECT_THROW(read_warp(p), DataError);
}
