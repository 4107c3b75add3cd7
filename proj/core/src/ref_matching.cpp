#include "dzsr/ref_matching.hpp"

#include <torch/torch.h>

#include "dzsr/error.hpp"

namespace dzsr {
namespace {

namespace F = torch::nn::functional;

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

// [N, C k^2, H * W] patches with zero padding, columns normalized to unit length
// (all-zero patches stay zero).
torch::Tensor normalized_patches(const torch::Tensor& x, int k) {
  auto cols = F::unfold(x, F::UnfoldFuncOptions({k, k}).padding(k / 2));
  auto norm = cols.norm(2, 1, /*keepdim=*/true).clamp_min(1e-12);
  return cols / norm;
}

}  // namespace

void MatchConfig::validate() const {
  if (patch_size < 1 || patch_size % 2 == 0) throw ConfigError("match patch_size must be odd");
  if (stride < 1) throw ConfigError("match stride must be >= 1");
  if (feature_channels < 1) throw ConfigError("feature_channels must be >= 1");
}

FeatureExtractorImpl::FeatureExtractorImpl(int channels) {
  conv1_ = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, channels, 3).padding(1)));
  conv2_ = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  conv3_ = register_module("conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor FeatureExtractorImpl::forward(const torch::Tensor& img) {
  return conv3_(lrelu(conv2_(lrelu(conv1_(img)))));
}

MatchResult patch_correlation_match(const torch::Tensor& query, const torch::Tensor& ref, const MatchConfig& cfg) {
  cfg.validate();
  if (query.dim() != 4 || ref.dim() != 4) throw DimensionError("match: expected [N, C, H, W] maps");
  if (query.size(0) != ref.size(0) || query.size(1) != ref.size(1)) {
    throw DimensionError("match: query and ref must share batch and channel count");
  }
  if (ref.size(2) < cfg.patch_size || ref.size(3) < cfg.patch_size) {
    throw DimensionError("match: ref is smaller than one patch");
  }
  torch::NoGradGuard no_grad;
  const int k = cfg.patch_size, s = cfg.stride;
  const auto N = query.size(0);
  const int H = static_cast<int>(query.size(2)), W = static_cast<int>(query.size(3));
  const int Hq = (H + s - 1) / s, Wq = (W + s - 1) / s;

  auto q = normalized_patches(query.to(torch::kFloat32), k);
  if (s > 1) {
    auto rows = torch::arange(0, H, s, torch::kLong);
    auto cols = torch::arange(0, W, s, torch::kLong);
    auto flat = (rows.view({-1, 1}) * W + cols.view({1, -1})).reshape({-1});
    q = q.index_select(2, flat);
  }
  auto r = normalized_patches(ref.to(torch::kFloat32), k);
  auto sim = torch::matmul(q.transpose(1, 2), r).contiguous();  // [N, Lq, Lr]

  const auto Lq = sim.size(1), Lr = sim.size(2);
  auto index = torch::empty({N, Lq}, torch::kLong);
  auto score = torch::empty({N, Lq}, torch::kFloat32);
  const float* sp = sim.data_ptr<float>();
  auto* ip = index.data_ptr<std::int64_t>();
  auto* scp = score.data_ptr<float>();
  for (std::int64_t row = 0; row < N * Lq; ++row) {
    const float* v = sp + row * Lr;
    float best = v[0];
    for (std::int64_t j = 1; j < Lr; ++j) best = std::max(best, v[j]);
    const float threshold = static_cast<float>(best - kTieTolerance);
    std::int64_t arg = 0;
    while (v[arg] < threshold) ++arg;
    ip[row] = arg;
    scp[row] = v[arg];
  }
  MatchResult out;
  out.index_map = index.view({N, Hq, Wq});
  out.score_map = score.view({N, Hq, Wq});
  out.query_height = H;
  out.query_width = W;
  out.ref_height = static_cast<int>(ref.size(2));
  out.ref_width = static_cast<int>(ref.size(3));
  out.stride = s;
  return out;
}

torch::Tensor warp_ref_features(const torch::Tensor& ref, const MatchResult& match, const MatchConfig& cfg) {
  cfg.validate();
  if (ref.dim() != 4 || ref.size(2) != match.ref_height || ref.size(3) != match.ref_width) {
    throw DimensionError("warp_ref_features: ref dims differ from the matched ref");
  }
  const auto N = ref.size(0), C = ref.size(1);
  const int H = match.query_height, W = match.query_width;
  const int Hr = match.ref_height, Wr = match.ref_width;
  const int Hq = static_cast<int>(match.index_map.size(1)), Wq = static_cast<int>(match.index_map.size(2));
  const int half = cfg.patch_size / 2, s = match.stride;
  const auto idx = match.index_map.to(torch::kLong).contiguous();
  const auto* ip = idx.data_ptr<std::int64_t>();

  std::vector<torch::Tensor> outputs;
  for (std::int64_t n = 0; n < N; ++n) {
    std::vector<std::int64_t> dst, src;
    for (int a = 0; a < Hq; ++a) {
      for (int b = 0; b < Wq; ++b) {
        const std::int64_t m = ip[(n * Hq + a) * Wq + b];
        if (m < 0 || m >= static_cast<std::int64_t>(Hr) * Wr) throw DimensionError("warp_ref_features: index out of range");
        const int my = static_cast<int>(m / Wr), mx = static_cast<int>(m % Wr);
        const int qy = a * s, qx = b * s;
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx) {
            const int ty = qy + dy, tx = qx + dx, sy = my + dy, sx = mx + dx;
            if (ty < 0 || ty >= H || tx < 0 || tx >= W || sy < 0 || sy >= Hr || sx < 0 || sx >= Wr) continue;
            dst.push_back(static_cast<std::int64_t>(ty) * W + tx);
            src.push_back(static_cast<std::int64_t>(sy) * Wr + sx);
          }
        }
      }
    }
    auto dst_t = torch::tensor(dst, torch::kLong);
    auto src_t = torch::tensor(src, torch::kLong);
    auto flat = ref[n].reshape({C, Hr * Wr});
    auto acc = torch::zeros({C, static_cast<std::int64_t>(H) * W}, ref.options()).index_add(1, dst_t, flat.index_select(1, src_t));
    auto count = torch::zeros({static_cast<std::int64_t>(H) * W}, ref.options())
                     .index_add(0, dst_t, torch::ones({static_cast<std::int64_t>(dst.size())}, ref.options()));
    outputs.push_back((acc / count.clamp_min(1.0)).view({C, H, W}));
  }
  return torch::stack(outputs);
}

torch::Tensor inverse_pixel_shuffle(const torch::Tensor& x, int r) {
  if (x.dim() != 4) throw DimensionError("inverse_pixel_shuffle: expected [N, C, H, W]");
  if (r < 1) throw ConfigError("inverse_pixel_shuffle: r must be >= 1");
  if (x.size(2) % r != 0) throw DimensionError("inverse_pixel_shuffle: height not divisible by r");
  if (x.size(3) % r != 0) throw DimensionError("inverse_pixel_shuffle: width not divisible by r");
  const auto N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  return x.view({N, C, H / r, r, W / r, r}).permute({0, 1, 3, 5, 2, 4}).reshape({N, C * r * r, H / r, W / r});
}

torch::Tensor pixel_shuffle(const torch::Tensor& x, int r) {
  if (x.dim() != 4 || x.size(1) % (r * r) != 0) throw DimensionError("pixel_shuffle: channels not divisible by r^2");
  const auto N = x.size(0), C = x.size(1) / (r * r), h = x.size(2), w = x.size(3);
  return x.view({N, C, r, r, h, w}).permute({0, 1, 4, 2, 5, 3}).reshape({N, C, h * r, w * r});
}

torch::Tensor center_paste(const torch::Tensor& base, const torch::Tensor& center) {
  if (base.dim() != 4 || center.dim() != 4) throw DimensionError("center_paste: expected [N, C, H, W]");
  if (base.size(0) != center.size(0) || base.size(1) != center.size(1)) {
    throw DimensionError("center_paste: batch or channel mismatch");
  }
  const auto H = base.size(2), W = base.size(3), h = center.size(2), w = center.size(3);
  if (h > H || w > W) throw DimensionError("center_paste: center larger than base");
  const auto y0 = (H - h) / 2, x0 = (W - w) / 2;
  // Built from pieces instead of an in-place copy so autograd sees both inputs.
  auto top = base.slice(2, 0, y0);
  auto bottom = base.slice(2, y0 + h, H);
  auto mid = base.slice(2, y0, y0 + h);
  auto row = torch::cat({mid.slice(3, 0, x0), center, mid.slice(3, x0 + w, W)}, 3);
  return torch::cat({top, row, bottom}, 2);
}

torch::Tensor center_crop_tensor(const torch::Tensor& x, int r) {
  const auto H = x.size(-2), W = x.size(-1);
  if (H % r != 0) throw DimensionError("center crop: height not divisible by ratio");
  if (W % r != 0) throw DimensionError("center crop: width not divisible by ratio");
  const auto h = H / r, w = W / r;
  return x.slice(-2, (H - h) / 2, (H - h) / 2 + h).slice(-1, (W - w) / 2, (W - w) / 2 + w);
}

RefAlignerImpl::RefAlignerImpl(int ratio, const MatchConfig& match, int estimator_channels, OffsetMode mode)
    : ratio_(ratio), match_(match) {
  match_.validate();
  const int C = match_.feature_channels;
  extractor_ = register_module("extractor", FeatureExtractor(C));
  refine_ = register_module("refine", AdaSTN(C * ratio * ratio, C, C, estimator_channels, mode));
}

RefAlignment RefAlignerImpl::forward(const torch::Tensor& ref_img, const torch::Tensor& guide_img, bool force_zero,
                                     const std::vector<bool>& zero_samples) {
  if (ref_img.sizes() != guide_img.sizes()) {
    throw DimensionError("align_ref: Ref and guide must have equal dims (Ref covers the central 1/r window)");
  }
  const int r = ratio_;
  auto ref_feat = extractor_(ref_img);
  auto ref_small = extractor_(F::avg_pool2d(ref_img, F::AvgPool2dFuncOptions(r)));
  auto guide_feat = extractor_(guide_img);

  RefAlignment out;
  out.match = patch_correlation_match(guide_feat, ref_small, match_);
  auto ref_ips = inverse_pixel_shuffle(ref_feat, r);
  auto warped = warp_ref_features(ref_ips, out.match, match_);
  out.pasted = center_paste(warped, ref_ips);
  out.guide_feat = guide_feat;
  out.aligned = refine_->forward(out.pasted, guide_feat, force_zero, zero_samples);
  return out;
}

}  // namespace dzsr
