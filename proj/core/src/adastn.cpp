#include "dzsr/adastn.hpp"

#include <cmath>
#include <random>

#include <torch/torch.h>

#include "dzsr/error.hpp"
#include "dzsr/rng.hpp"

namespace dzsr {
namespace {

constexpr int kTaps = 9;

// Bilinear taps for every (kernel tap k, pixel q): four flat source indices and
// weights. Corners outside the map get weight 0 and index 0, and `valid` marks
// which corners exist so the offset gradient can treat them as reading 0.
template <typename T>
struct TapTable {
  std::vector<std::int32_t> index;  // [9, HW, 4]
  std::vector<T> weight;            // [9, HW, 4]
  std::vector<T> ly, lx;            // [9, HW] fractional parts
  std::vector<std::uint8_t> valid;  // [9, HW, 4]

  void build(const T* P, int H, int W) {
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    index.assign(kTaps * HW * 4, 0);
    weight.assign(kTaps * HW * 4, T(0));
    ly.assign(kTaps * HW, T(0));
    lx.assign(kTaps * HW, T(0));
    valid.assign(kTaps * HW * 4, 0);
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        const std::size_t q = static_cast<std::size_t>(i) * W + j;
        const T* p = P + q * 2 * kTaps;
        for (int k = 0; k < kTaps; ++k) {
          const T py = T(i) + p[k], px = T(j) + p[kTaps + k];
          // Entirely outside: every corner reads zero and nothing is recorded.
          if (!(py > T(-1)) || !(py < T(H)) || !(px > T(-1)) || !(px < T(W))) continue;
          const T fy = std::floor(py), fx = std::floor(px);
          const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
          const T a = py - fy, b = px - fx;
          const std::size_t t = k * HW + q;
          ly[t] = a;
          lx[t] = b;
          const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
          const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
          const T ws[4] = {(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b};
          for (int c = 0; c < 4; ++c) {
            if (ys[c] < 0 || ys[c] >= H || xs[c] < 0 || xs[c] >= W) continue;
            index[t * 4 + c] = ys[c] * W + xs[c];
            weight[t * 4 + c] = ws[c];
            valid[t * 4 + c] = 1;
          }
        }
      }
    }
  }
};

// Channels-last column matrix for one sample: xt is [HW, C], cols is
// [HW, 9 * C] with entry (q, k * C + c) = x_c bilinearly read at q + p_k.
template <typename T>
void gather_columns(const T* xt, const TapTable<T>& taps, T* cols, int C, std::size_t HW) {
  for (std::size_t q = 0; q < HW; ++q) {
    for (int k = 0; k < kTaps; ++k) {
      const std::size_t t = k * HW + q;
      const std::int32_t* idx = taps.index.data() + t * 4;
      const T* w = taps.weight.data() + t * 4;
      const T* r0 = xt + static_cast<std::size_t>(idx[0]) * C;
      const T* r1 = xt + static_cast<std::size_t>(idx[1]) * C;
      const T* r2 = xt + static_cast<std::size_t>(idx[2]) * C;
      const T* r3 = xt + static_cast<std::size_t>(idx[3]) * C;
      T* out = cols + (q * kTaps + k) * C;
      for (int c = 0; c < C; ++c) out[c] = w[0] * r0[c] + w[1] * r1[c] + w[2] * r2[c] + w[3] * r3[c];
    }
  }
}

// Scatters column gradients (same layout as the columns) back to the
// channels-last input gradient and to the offsets (grad_P: [HW, 2, 9]).
template <typename T>
void scatter_columns(const T* xt, const TapTable<T>& taps, const T* grad_cols, T* grad_xt, T* grad_P, int C,
                     std::size_t HW) {
  for (std::size_t q = 0; q < HW; ++q) {
    for (int k = 0; k < kTaps; ++k) {
      const std::size_t t = k * HW + q;
      const std::uint8_t* ok = taps.valid.data() + t * 4;
      if (!(ok[0] | ok[1] | ok[2] | ok[3])) continue;
      const std::int32_t* idx = taps.index.data() + t * 4;
      const T* w = taps.weight.data() + t * 4;
      const T* g = grad_cols + (q * kTaps + k) * C;
      T dy = 0, dx = 0;
      // Corners outside the map read 0: they get no input gradient and enter
      // the offset gradient as zero values.
      const T a = taps.ly[t], b = taps.lx[t];
      const T cy[4] = {-(1 - b), -b, (1 - b), b};  // d(weight)/d(py)
      const T cx[4] = {-(1 - a), (1 - a), -a, a};  // d(weight)/d(px)
      for (int corner = 0; corner < 4; ++corner) {
        if (!ok[corner]) continue;
        const T* row = xt + static_cast<std::size_t>(idx[corner]) * C;
        T* grow = grad_xt + static_cast<std::size_t>(idx[corner]) * C;
        const T wc = w[corner];
        T dot = 0;
        for (int c = 0; c < C; ++c) {
          grow[c] += wc * g[c];
          dot += g[c] * row[c];
        }
        dy += cy[corner] * dot;
        dx += cx[corner] * dot;
      }
      grad_P[q * 2 * kTaps + k] += dy;
      grad_P[q * 2 * kTaps + kTaps + k] += dx;
    }
  }
}

class DeformableSampleFunction : public torch::autograd::Function<DeformableSampleFunction> {
 public:
  // weight is passed as [C_out, 9, C_in] flattened to [C_out, 9 * C_in] to
  // match the channels-last column layout.
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, torch::Tensor x, torch::Tensor weight,
                               torch::Tensor bias, torch::Tensor P) {
    P = P.contiguous();
    const int N = static_cast<int>(x.size(0)), C = static_cast<int>(x.size(1));
    const int H = static_cast<int>(x.size(2)), W = static_cast<int>(x.size(3));
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    const auto Co = weight.size(0);
    auto xt = x.permute({0, 2, 3, 1}).contiguous();  // [N, H, W, C]
    auto cols = torch::empty({N, static_cast<std::int64_t>(HW), kTaps * C}, x.options());
    AT_DISPATCH_FLOATING_TYPES(x.scalar_type(), "deformable_sample_forward", [&] {
      TapTable<scalar_t> taps;
      for (int n = 0; n < N; ++n) {
        taps.build(P[n].data_ptr<scalar_t>(), H, W);
        gather_columns<scalar_t>(xt[n].data_ptr<scalar_t>(), taps, cols[n].data_ptr<scalar_t>(), C, HW);
      }
    });
    auto w2 = weight.reshape({Co, kTaps * C});
    auto y = torch::matmul(cols, w2.t()) + bias;  // [N, HW, Co]
    ctx->save_for_backward({xt, w2, P, cols});
    ctx->saved_data["C"] = static_cast<std::int64_t>(C);
    ctx->saved_data["H"] = static_cast<std::int64_t>(H);
    ctx->saved_data["W"] = static_cast<std::int64_t>(W);
    return y.view({N, H, W, Co}).permute({0, 3, 1, 2}).contiguous();
  }

  static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::variable_list grad_outputs) {
    const auto saved = ctx->get_saved_variables();
    const auto& xt = saved[0];
    const auto& w2 = saved[1];
    const auto& P = saved[2];
    const auto& cols = saved[3];
    const int C = static_cast<int>(ctx->saved_data["C"].toInt());
    const int H = static_cast<int>(ctx->saved_data["H"].toInt());
    const int W = static_cast<int>(ctx->saved_data["W"].toInt());
    const std::size_t HW = static_cast<std::size_t>(H) * W;
    const int N = static_cast<int>(xt.size(0));
    const auto Co = w2.size(0);

    auto gy = grad_outputs[0].permute({0, 2, 3, 1}).reshape({N, static_cast<std::int64_t>(HW), Co});
    auto grad_w2 = torch::matmul(gy.transpose(1, 2), cols).sum(0);  // [Co, 9C]
    auto grad_bias = gy.sum({0, 1});
    auto grad_cols = torch::matmul(gy, w2).contiguous();  // [N, HW, 9C]
    auto grad_xt = torch::zeros_like(xt);
    auto grad_P = torch::zeros_like(P);
    AT_DISPATCH_FLOATING_TYPES(xt.scalar_type(), "deformable_sample_backward", [&] {
      TapTable<scalar_t> taps;
      for (int n = 0; n < N; ++n) {
        taps.build(P[n].data_ptr<scalar_t>(), H, W);
        scatter_columns<scalar_t>(xt[n].data_ptr<scalar_t>(), taps, grad_cols[n].data_ptr<scalar_t>(),
                                  grad_xt[n].data_ptr<scalar_t>(), grad_P[n].data_ptr<scalar_t>(), C, HW);
      }
    });
    return {grad_xt.permute({0, 3, 1, 2}), grad_w2.view({Co, kTaps, C}), grad_bias, grad_P};
  }
};

void check_spatial(const torch::Tensor& x, const torch::Tensor& P) {
  if (x.dim() != 4) throw DimensionError("deformable_sample: x must be [N, C, H, W]");
  if (P.dim() != 5 || P.size(0) != x.size(0) || P.size(1) != x.size(2) || P.size(2) != x.size(3) ||
      P.size(3) != 2 || P.size(4) != kTaps) {
    throw DimensionError("deformable_sample: offsets must be [N, H, W, 2, 9] matching x");
  }
}

void check_kernel(const torch::Tensor& x, const DeformableKernel& k) {
  if (k.weight.dim() != 3 || k.weight.size(1) != x.size(1) || k.weight.size(2) != kTaps) {
    throw DimensionError("deformable kernel must be [C_out, C_in, 9] with C_in matching x");
  }
  if (k.bias.dim() != 1 || k.bias.size(0) != k.weight.size(0)) {
    throw DimensionError("deformable kernel bias must be [C_out]");
  }
}

torch::nn::Conv2d conv3x3(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

}  // namespace

RegularGrid regular_grid() {
  RegularGrid g{};
  for (int k = 0; k < kTaps; ++k) {
    g[0][k] = k / 3 - 1;
    g[1][k] = k % 3 - 1;
  }
  return g;
}

torch::Tensor grid_tensor(torch::ScalarType dtype) {
  const RegularGrid g = regular_grid();
  auto t = torch::empty({2, kTaps}, torch::kFloat64);
  auto acc = t.accessor<double, 2>();
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < kTaps; ++k) acc[r][k] = g[r][k];
  return t.to(dtype);
}

OffsetField affine_offsets(const torch::Tensor& A, const torch::Tensor& b) {
  if (A.dim() < 2 || A.size(-1) != 2 || A.size(-2) != 2) throw DimensionError("A must end in [2, 2]");
  if (b.dim() != A.dim() - 1 || b.size(-1) != 2) throw DimensionError("b must end in [2]");
  for (int d = 0; d < b.dim() - 1; ++d) {
    if (A.size(d) != b.size(d)) throw DimensionError("A and b spatial dims differ");
  }
  auto G = grid_tensor(A.scalar_type()).to(A.device());
  auto P = torch::matmul(A, G) + b.unsqueeze(-1);
  return {A, b, P};
}

torch::Tensor deformable_sample(const torch::Tensor& x, const DeformableKernel& kernel, const torch::Tensor& P) {
  check_spatial(x, P);
  check_kernel(x, kernel);
  if (torch::isnan(P).any().item<bool>()) throw NumericError("deformable_sample: NaN in offsets");
  // Column layout is channels-last, so hand the kernel over as [C_out, 9, C_in].
  auto w = kernel.weight.permute({0, 2, 1});
  return DeformableSampleFunction::apply(x, w, kernel.bias, P);
}

torch::Tensor deformable_sample_zero(const torch::Tensor& x, const DeformableKernel& kernel) {
  if (x.dim() != 4) throw DimensionError("deformable_sample: x must be [N, C, H, W]");
  check_kernel(x, kernel);
  auto collapsed = kernel.weight.sum(2);
  return torch::conv2d(x, collapsed.view({collapsed.size(0), collapsed.size(1), 1, 1}), kernel.bias);
}

OffsetMode parse_offset_mode(std::string_view name) {
  if (name == "adastn") return OffsetMode::kAdaSTN;
  if (name == "stn_global" || name == "stn") return OffsetMode::kSTNGlobal;
  if (name == "deform_direct") return OffsetMode::kDeformDirect;
  throw ConfigError("unknown offset mode '" + std::string(name) + "'");
}

std::string to_string(OffsetMode mode) {
  switch (mode) {
    case OffsetMode::kAdaSTN: return "adastn";
    case OffsetMode::kSTNGlobal: return "stn_global";
    case OffsetMode::kDeformDirect: return "deform_direct";
  }
  return "?";
}

void AdaSTNConfig::validate() const {
  if (num_stages < 1) throw ConfigError("AdaSTN stack needs at least one stage");
  if (!(zero_prob >= 0.0 && zero_prob <= 1.0)) throw ConfigError("zero_prob must lie in [0, 1]");
  if (estimator_channels < 1) throw ConfigError("estimator_channels must be >= 1");
}

AdaSTNImpl::AdaSTNImpl(int in_channels, int guide_channels, int out_channels, int estimator_channels,
                       OffsetMode mode)
    : mode_(mode) {
  conv1_ = register_module("conv1", conv3x3(in_channels + guide_channels, estimator_channels));
  conv2_ = register_module("conv2", conv3x3(estimator_channels, estimator_channels));
  switch (mode_) {
    case OffsetMode::kAdaSTN:
      head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(estimator_channels, 6, 1)));
      break;
    case OffsetMode::kDeformDirect:
      head_ = register_module("head",
                              torch::nn::Conv2d(torch::nn::Conv2dOptions(estimator_channels, 2 * kTaps, 1)));
      break;
    case OffsetMode::kSTNGlobal:
      global_head_ = register_module("global_head", torch::nn::Linear(estimator_channels, 6));
      break;
  }
  {
    torch::NoGradGuard no_grad;
    if (head_) {
      head_->weight.zero_();
      head_->bias.zero_();
    }
    if (global_head_) {
      global_head_->weight.zero_();
      global_head_->bias.zero_();
    }
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * kTaps);
  weight_ = register_parameter("weight", torch::empty({out_channels, in_channels, kTaps}).uniform_(-bound, bound));
  bias_ = register_parameter("bias", torch::zeros({out_channels}));
}

OffsetField AdaSTNImpl::estimate(const torch::Tensor& src, const torch::Tensor& guide) {
  if (src.size(0) != guide.size(0) || src.size(2) != guide.size(2) || src.size(3) != guide.size(3)) {
    throw DimensionError("AdaSTN: src and guide must share batch and spatial dims");
  }
  ++estimator_calls_;
  namespace F = torch::nn::functional;
  auto lrelu = [](const torch::Tensor& t) { return F::leaky_relu(t, F::LeakyReLUFuncOptions().negative_slope(0.2)); };
  auto feat = lrelu(conv2_(lrelu(conv1_(torch::cat({src, guide}, 1)))));
  const auto N = src.size(0), H = src.size(2), W = src.size(3);
  switch (mode_) {
    case OffsetMode::kAdaSTN: {
      auto h = head_(feat).permute({0, 2, 3, 1});  // [N, H, W, 6]
      auto A = h.narrow(3, 0, 4).reshape({N, H, W, 2, 2});
      auto b = h.narrow(3, 4, 2);
      return affine_offsets(A, b);
    }
    case OffsetMode::kSTNGlobal: {
      auto g = global_head_(feat.mean({2, 3}));  // [N, 6]
      auto A = g.narrow(1, 0, 4).reshape({N, 1, 1, 2, 2}).expand({N, H, W, 2, 2});
      auto b = g.narrow(1, 4, 2).reshape({N, 1, 1, 2}).expand({N, H, W, 2});
      return affine_offsets(A, b);
    }
    case OffsetMode::kDeformDirect: {
      auto P = head_(feat).permute({0, 2, 3, 1}).reshape({N, H, W, 2, kTaps});
      return {torch::Tensor(), torch::Tensor(), P};
    }
  }
  throw ConfigError("unknown offset mode");
}

torch::Tensor AdaSTNImpl::forward(const torch::Tensor& src, const torch::Tensor& guide, bool force_zero,
                                  const std::vector<bool>& zero_samples) {
  if (!zero_samples.empty() && static_cast<std::int64_t>(zero_samples.size()) != src.size(0)) {
    throw DimensionError("AdaSTN: zero_samples must have one flag per batch element");
  }
  bool all_zero = force_zero;
  if (!all_zero && !zero_samples.empty()) {
    all_zero = std::all_of(zero_samples.begin(), zero_samples.end(), [](bool z) { return z; });
  }
  if (all_zero) return deformable_sample_zero(src, kernel());

  auto P = estimate(src, guide).P;
  if (!zero_samples.empty() && std::any_of(zero_samples.begin(), zero_samples.end(), [](bool z) { return z; })) {
    std::vector<float> keep(zero_samples.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = zero_samples[i] ? 0.0f : 1.0f;
    auto mask = torch::tensor(keep, P.options()).view({-1, 1, 1, 1, 1});
    P = P * mask;
  }
  return deformable_sample(src, kernel(), P);
}

std::vector<std::vector<bool>> draw_zero_masks(std::uint64_t seed, int stages, int batch, double p) {
  std::mt19937_64 rng(derive_seed(seed, 0xada57));
  std::bernoulli_distribution coin(std::clamp(p, 0.0, 1.0));
  std::vector<std::vector<bool>> masks(static_cast<std::size_t>(stages), std::vector<bool>(static_cast<std::size_t>(batch)));
  for (auto& stage : masks)
    for (std::size_t n = 0; n < stage.size(); ++n) stage[n] = coin(rng);
  return masks;
}

AlignmentStackImpl::AlignmentStackImpl(int channels, const AdaSTNConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  for (int s = 0; s < cfg_.num_stages; ++s) {
    units_.push_back(register_module("unit" + std::to_string(s),
                                     AdaSTN(channels, channels, channels, cfg_.estimator_channels, cfg_.mode)));
  }
}

torch::Tensor AlignmentStackImpl::forward(const torch::Tensor& lr_feat, const torch::Tensor& guide_feat,
                                          bool training, std::uint64_t seed) {
  if (guide_feat.defined() && guide_feat.sizes() != lr_feat.sizes()) {
    throw DimensionError("alignment stack: LR and guide features must have equal shapes");
  }
  torch::Tensor feat = lr_feat;
  if (!training) {
    for (auto& unit : units_) feat = unit->forward(feat, guide_feat, /*force_zero=*/true);
    return feat;
  }
  const auto masks = draw_zero_masks(seed, cfg_.num_stages, static_cast<int>(lr_feat.size(0)), cfg_.zero_prob);
  for (std::size_t s = 0; s < units_.size(); ++s) feat = units_[s]->forward(feat, guide_feat, false, masks[s]);
  return feat;
}

std::int64_t AlignmentStackImpl::estimator_calls() const {
  std::int64_t n = 0;
  for (const auto& u : units_) n += u->estimator_calls();
  return n;
}

void AlignmentStackImpl::reset_probe() {
  for (auto& u : units_) u->reset_probe();
}

}  // namespace dzsr
