#include "dzsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <torch/torch.h>

#include "dzsr/checkpoint.hpp"
#include "dzsr/error.hpp"
#include "dzsr/log.hpp"
#include "dzsr/noise.hpp"
#include "dzsr/rng.hpp"

namespace dzsr {
namespace {

void set_learning_rate(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

double epoch_learning_rate(const TrainConfig& cfg, int epoch, int total) {
  return epoch < total / 2 ? cfg.lr : cfg.lr_decayed;
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& cfg) {
  return torch::optim::Adam(params, torch::optim::AdamOptions(cfg.lr).betas({cfg.adam_beta1, cfg.adam_beta2}));
}

Image apply_flags(Image img, unsigned flags) {
  if (flags & static_cast<unsigned>(Augment::kHFlip)) img = flip_horizontal(img);
  if (flags & static_cast<unsigned>(Augment::kVFlip)) img = flip_vertical(img);
  if (flags & static_cast<unsigned>(Augment::kRot90)) img = rotate90(img);
  return img;
}

std::string fmt_double(double v, int precision = 5) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace

DegradationConfig degradation_config(const TrainConfig& cfg) {
  DegradationConfig d;
  d.ratio = cfg.ratio;
  d.channels = cfg.deg_channels;
  d.guidance_channels = cfg.deg_guidance_channels;
  d.kernel_size = cfg.deg_kernel;
  return d;
}

PatchSampler::PatchSampler(const std::vector<NamedSample>& data, const TrainConfig& cfg, std::uint64_t seed)
    : data_(data), cfg_(cfg), rng_(seed) {
  if (data_.empty()) throw DataError("training dataset is empty");
  for (const auto& s : data_) {
    const auto& sample = s.sample;
    if (sample.ratio != cfg_.ratio) throw DataError("sample " + s.id + " has a ratio different from the config");
    if (sample.short_focus.height < cfg_.lr_patch || sample.short_focus.width < cfg_.lr_patch) {
      throw DataError("sample " + s.id + " is smaller than lr_patch");
    }
  }
  order_.resize(data_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  cursor_ = order_.size();
}

int PatchSampler::iterations_per_epoch() const {
  return static_cast<int>((data_.size() + cfg_.batch - 1) / cfg_.batch);
}

PatchBatch PatchSampler::next() {
  const int P = cfg_.lr_patch, r = cfg_.ratio;
  std::vector<Image> lrs, gts, refs;
  unsigned allowed = 0;
  if (cfg_.hflip) allowed |= static_cast<unsigned>(Augment::kHFlip);
  if (cfg_.vflip) allowed |= static_cast<unsigned>(Augment::kVFlip);
  if (cfg_.rot90) allowed |= static_cast<unsigned>(Augment::kRot90);
  for (int k = 0; k < cfg_.batch; ++k) {
    if (cursor_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const auto& s = data_[order_[cursor_++]].sample;
    std::uniform_int_distribution<int> ys(0, s.short_focus.height - P), xs(0, s.short_focus.width - P);
    const int y = ys(rng_), x = xs(rng_);
    const unsigned flags = static_cast<unsigned>(std::uniform_int_distribution<int>(0, 7)(rng_)) & allowed;
    Image lr = apply_flags(crop(s.short_focus, y, x, P, P), flags);
    Image gt = apply_flags(crop(s.telephoto, r * y, r * x, r * P, r * P), flags);
    refs.push_back(center_crop(gt, r));
    lrs.push_back(std::move(lr));
    gts.push_back(std::move(gt));
  }
  return {to_batch(lrs), to_batch(gts), to_batch(refs)};
}

DegradationRun train_degradation(const std::vector<NamedSample>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("training dataset is empty");
  torch::manual_seed(cfg.seed);
  DegradationRun run;
  run.config = cfg;
  run.net = DegradationNet(degradation_config(cfg));
  run.net->train();
  PatchSampler sampler(data, cfg, derive_seed(cfg.seed, 0xde9));
  auto opt = make_adam(run.net->parameters(), cfg);
  const auto kernels = run.net->backbone_kernels();
  {
    torch::NoGradGuard no_grad;
    double c = 0.0;
    for (const auto& W : kernels) c += centroid_loss(W).item<double>();
    run.initial_centroid = c;
  }
  const int iters = sampler.iterations_per_epoch();
  for (int epoch = 0; epoch < cfg.deg_epochs; ++epoch) {
    set_learning_rate(opt, epoch_learning_rate(cfg, epoch, cfg.deg_epochs));
    DegradationEpoch log{epoch, 0.0, 0.0, 0.0};
    for (int it = 0; it < iters; ++it) {
      const auto batch = sampler.next();
      opt.zero_grad();
      auto pseudo = run.net->forward(batch.gt, batch.lr);
      auto loss = degradation_loss(pseudo, batch.lr, torch::Tensor(), kernels, cfg.lambda_c);
      loss.total.backward();
      opt.step();
      const double total = loss.total.item<double>();
      run.iteration_loss.push_back(total);
      log.total += total / iters;
      log.l1 += loss.l1.item<double>() / iters;
      log.centroid += loss.centroid.item<double>() / iters;
    }
    run.epochs.push_back(log);
    if ((epoch + 1) % cfg.log_every == 0 || epoch + 1 == cfg.deg_epochs) {
      log::info("degradation epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.deg_epochs) +
                " l1=" + fmt_double(log.l1) + " centroid=" + fmt_double(log.centroid, 6) +
                " total=" + fmt_double(log.total));
    }
  }
  run.net->eval();
  return run;
}

ZoomingRun train_selfdzsr(const std::vector<NamedSample>& data, DegradationNet degradation, const TrainConfig& cfg,
                          AblationMode mode) {
  cfg.validate();
  if (data.empty()) throw DataError("training dataset is empty");
  const bool pseudo = needs_pseudo_lr(mode);
  if (pseudo && degradation.is_empty()) {
    throw CheckpointError("ablation mode '" + to_string(mode) + "' needs a trained degradation network");
  }
  if (pseudo && degradation->config().ratio != cfg.ratio) {
    throw CheckpointError("degradation network ratio differs from the training config");
  }

  ZoomingRun run;
  run.mode = mode;
  run.config = cfg;
  run.config.offset_mode = to_string(offset_mode_for(mode, parse_offset_mode(cfg.offset_mode)));
  torch::manual_seed(cfg.seed);
  run.net = ZoomingNet(run.config);
  run.net->train();
  if (pseudo) {
    degradation->eval();
    degradation->reset_probe();
    for (auto& p : degradation->parameters()) p.set_requires_grad(false);
  }

  PerceptualExtractor ext(cfg.perceptual_seed, cfg.perceptual_channels, cfg.perceptual_scales);
  SWConfig sw;
  sw.num_projections = cfg.sw_projections;
  PatchSampler sampler(data, cfg, derive_seed(cfg.seed, 0x200));
  auto opt = make_adam(run.net->parameters(), cfg);
  const NoiseSpec noise_spec;

  const int iters = sampler.iterations_per_epoch();
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    set_learning_rate(opt, epoch_learning_rate(cfg, epoch, cfg.epochs));
    ZoomingEpoch log{epoch, 0.0, 0.0, 0.0};
    for (int it = 0; it < iters; ++it, ++step) {
      const auto batch = sampler.next();
      torch::Tensor pseudo_lr = batch.lr;
      if (pseudo) {
        torch::NoGradGuard no_grad;
        auto clean = degradation->forward(batch.gt, batch.lr);
        if (cfg.pseudo_noise) {
          std::vector<Image> noisy;
          for (std::int64_t n = 0; n < clean.size(0); ++n) {
            noisy.push_back(inject_noise(clamp01(from_tensor(clean[n])), noise_spec,
                                         derive_seed(cfg.seed, (step << 8) + static_cast<std::uint64_t>(n)))
                                .noisy);
          }
          pseudo_lr = to_batch(noisy);
        } else {
          pseudo_lr = clean;
        }
        ++run.pseudo_lr_built;
      }
      const auto& lr_guide = lr_align_uses_pseudo(mode) ? pseudo_lr : batch.lr;
      const auto& ref_guide = ref_align_uses_pseudo(mode) ? pseudo_lr : batch.lr;

      GraphOptions opts;
      opts.training = true;
      opts.seed = derive_seed(cfg.seed, 0x5eed0000 + step);
      opt.zero_grad();
      auto y = run.net->forward(batch.lr, batch.ref, lr_guide, ref_guide, opts);
      auto loss = selfdzsr_loss(y, batch.gt, ext, sw, derive_seed(cfg.seed, 0x55000000 + step), cfg.lambda_sw);
      loss.total.backward();
      opt.step();

      const double total = loss.total.item<double>();
      run.iteration_loss.push_back(total);
      log.loss += total / iters;
      log.l1 += loss.l1.item<double>() / iters;
      log.sw += loss.sw.item<double>() / iters;
    }
    run.epochs.push_back(log);
    if ((epoch + 1) % cfg.log_every == 0 || epoch + 1 == cfg.epochs) {
      log::info("train[" + to_string(mode) + "] epoch " + std::to_string(epoch + 1) + "/" +
                std::to_string(cfg.epochs) + " loss=" + fmt_double(log.loss) + " l1=" + fmt_double(log.l1) +
                " sw=" + fmt_double(log.sw));
    }
  }
  if (pseudo) run.degradation_calls = degradation->forward_calls();
  run.net->eval();
  return run;
}

Image infer(ZoomingNet& net, const Image& short_focus, const Image& telephoto) {
  const int r = net->config().ratio;
  validate(short_focus);
  validate(telephoto);
  if (short_focus.height % r != 0 || short_focus.width % r != 0) {
    throw InputError("infer: short-focus dims must be divisible by the ratio " + std::to_string(r));
  }
  Image ref;
  if (telephoto.height == r * short_focus.height && telephoto.width == r * short_focus.width) {
    ref = center_crop(telephoto, r);
  } else if (telephoto.same_shape(short_focus)) {
    ref = telephoto;
  } else {
    throw InputError("infer: telephoto must be " + std::to_string(r) + "x the short-focus dims (or equal to them)");
  }
  torch::NoGradGuard no_grad;
  net->eval();
  auto lr = to_tensor(short_focus).unsqueeze(0);
  auto rf = to_tensor(ref).unsqueeze(0);
  GraphOptions opts;
  opts.training = false;
  opts.clamp = true;
  return from_tensor(net->forward(lr, rf, lr, lr, opts));
}

void save_degradation(const std::filesystem::path& path, DegradationNet& net, const TrainConfig& cfg) {
  save_checkpoint(path, capture_checkpoint(*net, NetKind::kDegradation, cfg));
}

DegradationNet load_degradation(const std::filesystem::path& path, const TrainConfig* expected) {
  const auto ckpt = load_checkpoint(path);
  if (ckpt.kind != NetKind::kDegradation) throw CheckpointError(path.string() + " is not a degradation checkpoint");
  const TrainConfig stored = ckpt.config();
  if (expected && architecture_fingerprint(*expected, NetKind::kDegradation) != ckpt.fingerprint) {
    throw CheckpointError("degradation checkpoint does not match the configured architecture");
  }
  DegradationNet net(degradation_config(stored));
  apply_checkpoint(*net, ckpt, NetKind::kDegradation, architecture_fingerprint(stored, NetKind::kDegradation));
  net->eval();
  return net;
}

void save_zooming(const std::filesystem::path& path, ZoomingNet& net) {
  save_checkpoint(path, capture_checkpoint(*net, NetKind::kZooming, net->config()));
}

ZoomingNet load_zooming(const std::filesystem::path& path) {
  const auto ckpt = load_checkpoint(path);
  if (ckpt.kind != NetKind::kZooming) throw CheckpointError(path.string() + " is not a zooming checkpoint");
  const TrainConfig stored = ckpt.config();
  ZoomingNet net(stored);
  apply_checkpoint(*net, ckpt, NetKind::kZooming, architecture_fingerprint(stored, NetKind::kZooming));
  net->eval();
  return net;
}

std::pair<double, double> smoothed_endpoints(const std::vector<double>& values, std::size_t window) {
  if (values.empty()) throw DataError("smoothed_endpoints: no values");
  const std::size_t w = std::min(window, values.size());
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    head += values[i];
    tail += values[values.size() - w + i];
  }
  return {head / w, tail / w};
}

}  // namespace dzsr
