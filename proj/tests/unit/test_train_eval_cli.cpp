#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <sys/wait.h>

#include <torch/torch.h>

#include "dzsr/checkpoint.hpp"
#include "dzsr/config.hpp"
#include "dzsr/dataset.hpp"
#include "dzsr/error.hpp"
#include "dzsr/evaluation.hpp"
#include "dzsr/metrics.hpp"
#include "dzsr/png_io.hpp"
#include "dzsr/runtime.hpp"
#include "dzsr/training.hpp"
#include "test_util.hpp"

using namespace dzsr;
using dzsr::testing::TempDir;
using dzsr::testing::max_abs_diff;
using dzsr::testing::random_image;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.lr_patch = 16;
  cfg.batch = 2;
  cfg.epochs = 2;
  cfg.deg_epochs = 2;
  cfg.channels = 8;
  cfg.blocks = 2;
  cfg.feature_channels = 8;
  cfg.estimator_channels = 8;
  cfg.deg_channels = 8;
  cfg.deg_guidance_channels = 4;
  cfg.perceptual_channels = 4;
  cfg.log_every = 1000;
  return cfg;
}

std::vector<NamedSample> tiny_dataset(int scenes = 3, double warp = 2.0, std::uint64_t seed = 5) {
  GenerateOptions opts;
  opts.scenes = scenes;
  opts.size = 64;
  opts.seed = seed;
  opts.pair.warp_bound = warp;
  return generate_dataset(opts);
}

// Direct single-pixel SSIM formula with a clipped, renormalized Gaussian window.
double ssim_oracle(const Image& a, const Image& b) {
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double total = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        double wsum = 0.0, ma = 0.0, mb = 0.0;
        for (int dy = -5; dy <= 5; ++dy)
          for (int dx = -5; dx <= 5; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= a.height || xx < 0 || xx >= a.width) continue;
            const double w = std::exp(-(dy * dy + dx * dx) / (2 * 1.5 * 1.5));
            wsum += w;
            ma += w * a.at(yy, xx, c);
            mb += w * b.at(yy, xx, c);
          }
        ma /= wsum;
        mb /= wsum;
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (int dy = -5; dy <= 5; ++dy)
          for (int dx = -5; dx <= 5; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= a.height || xx < 0 || xx >= a.width) continue;
            const double w = std::exp(-(dy * dy + dx * dx) / (2 * 1.5 * 1.5)) / wsum;
            const double da = a.at(yy, xx, c) - ma, db = b.at(yy, xx, c) - mb;
            va += w * da * da;
            vb += w * db * db;
            cov += w * da * db;
          }
        total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
      }
  return total / (3.0 * a.height * a.width);
}

Image checkerboard(int n, float lo, float hi) {
  Image img(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (y + x) % 2 ? hi : lo;
  return img;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("DZSR_THREADS=1 ") + DZSR_CLI_PATH + " --log-level warn " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Psnr, ClosedForm) {
  Image a = random_image(16, 16, 1);
  for (auto& v : a.pixels) v *= 0.9f;
  Image b = a;
  for (auto& v : b.pixels) v += 10.0f / 255.0f;
  EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(25.5), 1e-3);
  EXPECT_NEAR(psnr(a, b), 28.131, 1e-3);
  EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_THROW(psnr(a, random_image(16, 8, 1)), DimensionError);
}

TEST(Ssim, IdentityAnticorrelationAndOracle) {
  const Image a = random_image(20, 20, 2);
  EXPECT_EQ(ssim(a, a), 1.0);
  Image bin = checkerboard(16, 0.0f, 1.0f), inv = bin;
  for (auto& v : inv.pixels) v = 1.0f - v;
  EXPECT_LT(ssim(bin, inv), 0.0);
  const Image cb = checkerboard(8, 0.2f, 0.8f);
  Image off = cb;
  for (auto& v : off.pixels) v += 0.1f;
  EXPECT_NEAR(ssim(cb, off), ssim_oracle(cb, off), 1e-6);
  const Image r1 = random_image(12, 9, 3), r2 = random_image(12, 9, 4);
  EXPECT_NEAR(ssim(r1, r2), ssim_oracle(r1, r2), 1e-6);
  EXPECT_THROW(ssim(a, random_image(20, 16, 1)), DimensionError);
}

TEST(RegionMask, Counts) {
  EXPECT_EQ(full_mask(64, 48).count(), 64 * 48);
  EXPECT_EQ(corner_mask(64, 48, 2).count(), 64 * 48 * 3 / 4);
  EXPECT_EQ(corner_mask(64, 64, 4).count(), 64 * 64 * 15 / 16);
  const auto m = corner_mask(8, 8, 2);
  EXPECT_EQ(m.keep[0], 1);
  EXPECT_EQ(m.keep[2 * 8 + 2], 0);
  EXPECT_EQ(m.keep[5 * 8 + 5], 0);
  EXPECT_EQ(m.keep[6 * 8 + 6], 1);
}

TEST(Evaluation, InfAndMaskCases) {
  const auto data = tiny_dataset(2);
  std::vector<Image> outputs;
  for (const auto& s : data) outputs.push_back(s.sample.telephoto);
  const auto exact = score_outputs(data, outputs);
  EXPECT_TRUE(std::isinf(exact.rows[0].full_psnr));
  EXPECT_TRUE(std::isinf(exact.rows[0].corner_psnr));
  EXPECT_EQ(exact.mean_full_psnr().infinite, 2);
  EXPECT_EQ(exact.mean_full_psnr().finite, 0);
  EXPECT_NE(exact.csv().find("inf"), std::string::npos);
  EXPECT_EQ(exact.full_pixels, 64 * 64);
  EXPECT_EQ(exact.corner_pixels, 64 * 64 * 3 / 4);

  // Corrupt only the central window.
  for (auto& o : outputs) {
    for (int y = 16; y < 48; ++y)
      for (int x = 16; x < 48; ++x) o.at(y, x, 1) = 1.0f - o.at(y, x, 1);
  }
  const auto center = score_outputs(data, outputs);
  EXPECT_TRUE(std::isfinite(center.rows[0].full_psnr));
  EXPECT_TRUE(std::isinf(center.rows[0].corner_psnr));
  EXPECT_EQ(center.mean_full_psnr().finite, 2);
}

TEST(Evaluation, ReportFiles) {
  const auto data = tiny_dataset(2);
  std::vector<Image> outputs;
  for (const auto& s : data) outputs.push_back(clamp01(bicubic_upsample(s.sample.short_focus, 2)));
  auto report = score_outputs(data, outputs);
  EXPECT_NEAR(report.rows[0].full_psnr, report.rows[0].bicubic_full_psnr, 1e-9);
  report.seconds = 1.5;
  TempDir dir("report");
  write_report(dir.path() / "r.csv", report);
  const auto csv = read_file(dir.path() / "r.csv");
  EXPECT_EQ(csv, report.csv());
  EXPECT_NE(csv.find("mean,"), std::string::npos);
  EXPECT_EQ(csv.find("runtime"), std::string::npos);
  EXPECT_NE(read_file(dir.path() / "r.csv.summary.txt").find("runtime"), std::string::npos);
}

TEST(Config, ShippedConfigsLoad) {
  const auto desk = load_config(DZSR_SOURCE_DIR "/configs/desk.cfg");
  EXPECT_EQ(serialize_config(desk), serialize_config(TrainConfig{}));
  const auto full = load_config(DZSR_SOURCE_DIR "/configs/full_scale.cfg");
  EXPECT_EQ(full.lr_patch, 48);
  EXPECT_EQ(full.batch, 16);
  EXPECT_EQ(full.epochs, 400);
  EXPECT_EQ(full.blocks, 16);
  EXPECT_DOUBLE_EQ(full.lr_decayed, 5e-5);
}

TEST(Config, ParseSerializeValidate) {
  const auto cfg = parse_config("# desk\nratio=4\n\nbatch = 8\noffset_mode=stn_global\nhflip=false\nseed=12345678901\n");
  EXPECT_EQ(cfg.ratio, 4);
  EXPECT_EQ(cfg.batch, 8);
  EXPECT_EQ(cfg.offset_mode, "stn_global");
  EXPECT_FALSE(cfg.hflip);
  EXPECT_EQ(cfg.seed, 12345678901ULL);
  EXPECT_EQ(cfg.lr_patch, TrainConfig{}.lr_patch);
  const auto back = parse_config(serialize_config(cfg));
  EXPECT_EQ(serialize_config(back), serialize_config(cfg));
  EXPECT_THROW(parse_config("bogus=1"), ConfigError);
  EXPECT_THROW(parse_config("batch=four"), ConfigError);
  EXPECT_THROW(parse_config("batch"), ConfigError);
  TrainConfig bad;
  bad.zero_prob = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.ratio = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.offset_mode = "sideways";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Config, FingerprintTracksArchitectureOnly) {
  TrainConfig a;
  TrainConfig b = a;
  b.lr = 1.0;
  b.seed = 99;
  EXPECT_EQ(architecture_fingerprint(a, NetKind::kZooming), architecture_fingerprint(b, NetKind::kZooming));
  b.channels = 48;
  EXPECT_NE(architecture_fingerprint(a, NetKind::kZooming), architecture_fingerprint(b, NetKind::kZooming));
  EXPECT_EQ(architecture_fingerprint(a, NetKind::kDegradation), architecture_fingerprint(b, NetKind::kDegradation));
  b.deg_channels = 8;
  EXPECT_NE(architecture_fingerprint(a, NetKind::kDegradation), architecture_fingerprint(b, NetKind::kDegradation));
}

TEST(Ablation, Modes) {
  for (auto m : {AblationMode::kFull, AblationMode::kNoLRAlign, AblationMode::kNoRefAlign, AblationMode::kNone,
                 AblationMode::kSTN, AblationMode::kDeformDirect})
    EXPECT_EQ(parse_ablation(to_string(m)), m);
  EXPECT_THROW(parse_ablation("half"), ConfigError);
  EXPECT_TRUE(lr_align_uses_pseudo(AblationMode::kFull));
  EXPECT_TRUE(ref_align_uses_pseudo(AblationMode::kFull));
  EXPECT_FALSE(lr_align_uses_pseudo(AblationMode::kNoLRAlign));
  EXPECT_TRUE(ref_align_uses_pseudo(AblationMode::kNoLRAlign));
  EXPECT_TRUE(lr_align_uses_pseudo(AblationMode::kNoRefAlign));
  EXPECT_FALSE(ref_align_uses_pseudo(AblationMode::kNoRefAlign));
  EXPECT_FALSE(needs_pseudo_lr(AblationMode::kNone));
  EXPECT_TRUE(needs_pseudo_lr(AblationMode::kSTN));
  EXPECT_EQ(offset_mode_for(AblationMode::kSTN, OffsetMode::kAdaSTN), OffsetMode::kSTNGlobal);
  EXPECT_EQ(offset_mode_for(AblationMode::kDeformDirect, OffsetMode::kAdaSTN), OffsetMode::kDeformDirect);
  EXPECT_EQ(offset_mode_for(AblationMode::kFull, OffsetMode::kSTNGlobal), OffsetMode::kSTNGlobal);
}

TEST(PatchSampler, GeometryAndAugmentation) {
  GenerateOptions opts;
  opts.scenes = 2;
  opts.size = 64;
  opts.pair.warp_bound = 0.0;
  opts.pair.noise_enabled = false;
  opts.pair.blur_sigma_range = {0.0, 0.0};
  const auto data = generate_dataset(opts);
  auto cfg = tiny_config();
  cfg.batch = 3;
  PatchSampler sampler(data, cfg, 7);
  EXPECT_EQ(sampler.iterations_per_epoch(), 1);
  for (int i = 0; i < 10; ++i) {
    const auto b = sampler.next();
    ASSERT_EQ(b.lr.sizes(), (std::vector<std::int64_t>{3, 3, 16, 16}));
    ASSERT_EQ(b.gt.sizes(), (std::vector<std::int64_t>{3, 3, 32, 32}));
    EXPECT_TRUE(torch::equal(b.ref, b.gt.slice(2, 8, 24).slice(3, 8, 24)));
    // Without blur, noise or warp the LR patch is the area-downsampled GT patch.
    EXPECT_LE(max_abs_diff(torch::avg_pool2d(b.gt, 2), b.lr), 1e-4);
  }
  auto small = tiny_config();
  small.lr_patch = 64;
  EXPECT_THROW(PatchSampler(data, small, 1), DataError);
}

TEST(Training, EmptyDatasetAndMissingDegradation) {
  EXPECT_THROW(train_degradation({}, tiny_config()), DataError);
  const auto data = tiny_dataset(2);
  EXPECT_THROW(train_selfdzsr(data, DegradationNet(nullptr), tiny_config(), AblationMode::kFull), CheckpointError);
}

TEST(Training, NoneModeNeverBuildsPseudoLR) {
  configure_threads();
  const auto data = tiny_dataset(2);
  auto cfg = tiny_config();
  cfg.epochs = 1;
  const auto run = train_selfdzsr(data, DegradationNet(nullptr), cfg, AblationMode::kNone);
  EXPECT_EQ(run.pseudo_lr_built, 0);
  EXPECT_EQ(run.iteration_loss.size(), 1u);

  cfg.deg_epochs = 1;
  auto deg = train_degradation(data, cfg);
  const auto full = train_selfdzsr(data, deg.net, cfg, AblationMode::kFull);
  EXPECT_EQ(full.pseudo_lr_built, 1);
  EXPECT_EQ(full.degradation_calls, 1);
  const auto stn = train_selfdzsr(data, deg.net, cfg, AblationMode::kSTN);
  EXPECT_EQ(stn.config.offset_mode, "stn_global");
}

TEST(Training, DeterministicCheckpoints) {
  configure_threads();
  const auto data = tiny_dataset(2);
  const auto cfg = tiny_config();
  TempDir dir("det");
  std::vector<std::string> digests;
  for (int rep = 0; rep < 2; ++rep) {
    auto deg = train_degradation(data, cfg);
    const auto dp = dir.path() / ("deg" + std::to_string(rep));
    save_degradation(dp, deg.net, cfg);
    auto run = train_selfdzsr(data, deg.net, cfg, AblationMode::kFull);
    const auto zp = dir.path() / ("z" + std::to_string(rep));
    save_zooming(zp, run.net);
    digests.push_back(file_digest(dp) + file_digest(zp));
  }
  EXPECT_EQ(digests[0], digests[1]);
}

TEST(Checkpoint, RoundTripAndMismatch) {
  const auto cfg = tiny_config();
  torch::manual_seed(1);
  ZoomingNet net(cfg);
  TempDir dir("ckpt");
  const auto path = dir.path() / "z.ckpt";
  save_zooming(path, net);
  auto loaded = load_zooming(path);
  const auto lr = torch::rand({1, 3, 16, 16});
  const auto ref = torch::rand({1, 3, 16, 16});
  GraphOptions opts;
  opts.clamp = true;
  EXPECT_TRUE(torch::equal(net->forward(lr, ref, lr, lr, opts), loaded->forward(lr, ref, lr, lr, opts)));

  const auto ckpt = load_checkpoint(path);
  EXPECT_EQ(ckpt.kind, NetKind::kZooming);
  EXPECT_EQ(serialize_config(ckpt.config()), serialize_config(cfg));
  auto other_cfg = cfg;
  other_cfg.blocks = 3;
  ZoomingNet other(other_cfg);
  EXPECT_THROW(apply_checkpoint(*other, ckpt, NetKind::kZooming, architecture_fingerprint(other_cfg, NetKind::kZooming)),
               CheckpointError);
  EXPECT_THROW(apply_checkpoint(*other, ckpt, NetKind::kDegradation, ckpt.fingerprint), CheckpointError);

  DegradationNet deg(degradation_config(cfg));
  const auto dpath = dir.path() / "d.ckpt";
  save_degradation(dpath, deg, cfg);
  EXPECT_NO_THROW(load_degradation(dpath, &cfg));
  auto wider = cfg;
  wider.deg_channels = 16;
  EXPECT_THROW(load_degradation(dpath, &wider), CheckpointError);
  EXPECT_THROW(load_degradation(path), CheckpointError);

  // Truncated files are rejected.
  const auto bytes = read_file(path);
  { std::ofstream(dir.path() / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2); }
  EXPECT_THROW(load_checkpoint(dir.path() / "cut.ckpt"), CheckpointError);
  { std::ofstream(dir.path() / "junk.ckpt", std::ios::binary) << "NOTACKPT0000"; }
  EXPECT_THROW(load_checkpoint(dir.path() / "junk.ckpt"), CheckpointError);
}

TEST(Infer, MatchesTrainingGraphWithZeroOffsets) {
  auto cfg = tiny_config();
  cfg.zero_prob = 1.0;
  torch::manual_seed(2);
  ZoomingNet net(cfg);
  {
    torch::NoGradGuard ng;
    for (auto& p : net->parameters()) p.add_(0.02 * torch::randn_like(p));
  }
  const auto data = tiny_dataset(1);
  const auto& s = data[0].sample;
  net->reset_probe();
  const Image out = infer(net, s.short_focus, s.telephoto);
  EXPECT_EQ(net->estimator_calls(), 0);
  EXPECT_EQ(out.height, 64);
  EXPECT_EQ(out.width, 64);

  const auto lr = to_tensor(s.short_focus).unsqueeze(0);
  const auto ref = to_tensor(s.reference()).unsqueeze(0);
  GraphOptions train_graph;
  train_graph.training = true;
  train_graph.seed = 77;
  train_graph.clamp = true;
  torch::NoGradGuard ng;
  const auto y = net->forward(lr, ref, lr, lr, train_graph);
  EXPECT_TRUE(torch::equal(to_tensor(out), y.squeeze(0)));
  EXPECT_EQ(infer(net, s.short_focus, s.telephoto), out);
  EXPECT_EQ(infer(net, s.short_focus, s.reference()), out);
}

TEST(Infer, InputErrors) {
  ZoomingNet net(tiny_config());
  EXPECT_THROW(infer(net, random_image(16, 16, 1), random_image(24, 24, 2)), InputError);
  EXPECT_THROW(infer(net, random_image(15, 16, 1), random_image(30, 32, 2)), InputError);
}

TEST(Cli, EndToEnd) {
  TempDir dir("cli");
  const auto d = dir.path();
  {
    std::ofstream cfg(d / "tiny.cfg");
    cfg << serialize_config(tiny_config());
  }
  const std::string D = d.string();
  ASSERT_EQ(run_cli("gen-data --scenes 2 --size 64 --seed 3 --out " + D + "/data"), 0);
  ASSERT_EQ(run_cli("train-degradation --data " + D + "/data --config " + D + "/tiny.cfg --out " + D + "/deg.ckpt"), 0);
  EXPECT_TRUE(std::filesystem::exists(d / "deg.ckpt.log.csv"));
  ASSERT_EQ(run_cli("train --data " + D + "/data --deg-ckpt " + D + "/deg.ckpt --config " + D + "/tiny.cfg --out " + D +
                    "/z.ckpt"),
            0);
  ASSERT_EQ(run_cli("train --data " + D + "/data --ablation none --config " + D + "/tiny.cfg --out " + D + "/n.ckpt"), 0);
  const auto sample = d / "data" / sample_id(0);
  ASSERT_EQ(run_cli("infer --short " + (sample / "short.png").string() + " --tele " + (sample / "tele.png").string() +
                    " --ckpt " + D + "/z.ckpt --out " + D + "/sr.png"),
            0);
  const Image sr = read_png(d / "sr.png");
  EXPECT_EQ(sr.height, 64);
  ASSERT_EQ(run_cli("eval --data " + D + "/data --ckpt " + D + "/z.ckpt --report " + D + "/rep.csv"), 0);
  EXPECT_NE(read_file(d / "rep.csv").find("mean,"), std::string::npos);

  // Library errors exit with 2.
  EXPECT_EQ(run_cli("train --data " + D + "/nowhere --ablation none --out " + D + "/x.ckpt"), 2);
  EXPECT_EQ(run_cli("train --data " + D + "/data --ablation full --config " + D + "/tiny.cfg --out " + D + "/x.ckpt"), 2);
  EXPECT_EQ(run_cli("eval --data " + D + "/data --ckpt " + D + "/deg.ckpt --report " + D + "/bad.csv"), 2);
  EXPECT_NE(run_cli("train --ablation sideways --data " + D + "/data --out " + D + "/x.ckpt"), 0);
}
