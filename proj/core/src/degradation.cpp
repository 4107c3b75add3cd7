#include "dzsr/degradation.hpp"

#include <cmath>

#include <torch/torch.h>

#include "dzsr/error.hpp"

namespace dzsr {
namespace {

namespace F = torch::nn::functional;

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

torch::nn::Conv2d make_conv(int in, int out, int k) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, k).padding(k / 2).padding_mode(torch::kReplicate));
}

}  // namespace

void DegradationConfig::validate() const {
  if (ratio != 2 && ratio != 4) throw ConfigError("degradation ratio must be 2 or 4");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("degradation kernel size must be odd");
  if (channels < 1 || guidance_channels < 1) throw ConfigError("degradation channel counts must be positive");
}

DegradationNetImpl::DegradationNetImpl(const DegradationConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int C = cfg_.channels, k = cfg_.kernel_size;
  const int widths[6] = {3, C, C, C, C, 3};
  for (int l = 0; l < 5; ++l) {
    backbone_.push_back(register_module("conv" + std::to_string(l + 1), make_conv(widths[l], widths[l + 1], k)));
  }
  pool_after_ = cfg_.ratio == 2 ? std::vector<int>{1} : std::vector<int>{1, 2};

  const int G = cfg_.guidance_channels;
  guide1_ = register_module("guide1", make_conv(3, G, 3));
  guide2_ = register_module("guide2", make_conv(G, G, 3));
  for (int l = 0; l < 4; ++l) {
    auto head = register_module("mod" + std::to_string(l + 1), torch::nn::Linear(G, 2 * C));
    torch::NoGradGuard no_grad;
    head->weight.zero_();
    head->bias.zero_();
    heads_.push_back(head);
  }
}

std::vector<std::pair<torch::Tensor, torch::Tensor>> DegradationNetImpl::guidance(const torch::Tensor& s_c) {
  auto g = lrelu(guide2_(lrelu(guide1_(s_c)))).mean({2, 3});
  std::vector<std::pair<torch::Tensor, torch::Tensor>> mods;
  for (auto& head : heads_) {
    auto v = head(g);
    mods.emplace_back(1.0 + v.narrow(1, 0, cfg_.channels), v.narrow(1, cfg_.channels, cfg_.channels));
  }
  return mods;
}

torch::Tensor DegradationNetImpl::forward(const torch::Tensor& t, const torch::Tensor& s_c) {
  if (t.dim() != 4 || s_c.dim() != 4 || t.size(1) != 3 || s_c.size(1) != 3) {
    throw DimensionError("degrade: expected [N, 3, H, W] inputs");
  }
  const int r = cfg_.ratio;
  if (t.size(0) != s_c.size(0) || t.size(2) != r * s_c.size(2) || t.size(3) != r * s_c.size(3)) {
    throw DimensionError("degrade: telephoto dims must be ratio x LR dims");
  }
  ++forward_calls_;
  const auto mods = guidance(s_c);
  torch::Tensor x = t;
  for (std::size_t l = 0; l < backbone_.size(); ++l) {
    x = backbone_[l](x);
    if (l + 1 < backbone_.size()) {
      const auto& [scale, shift] = mods[l];
      x = lrelu(x * scale.unsqueeze(-1).unsqueeze(-1) + shift.unsqueeze(-1).unsqueeze(-1));
    }
    if (std::find(pool_after_.begin(), pool_after_.end(), static_cast<int>(l)) != pool_after_.end()) {
      x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
    }
  }
  return F::avg_pool2d(t, F::AvgPool2dFuncOptions(r)) + x;
}

std::vector<torch::Tensor> DegradationNetImpl::backbone_kernels() const {
  std::vector<torch::Tensor> out;
  for (const auto& conv : backbone_) out.push_back(conv->weight);
  return out;
}

torch::Tensor centroid_loss(const torch::Tensor& W) {
  if (W.dim() != 4 || W.size(2) != W.size(3)) throw DimensionError("centroid_loss: expected [C_out, C_in, k, k]");
  const auto k = W.size(2);
  if (k % 2 == 0) throw ConfigError("centroid_loss: kernel size must be odd");
  // With integer k/2, i - k/2 + 0.5 is i - c for c = (k - 1) / 2. Pairing each
  // tap with its point mirror gives sum_{i<c} (i - c)(w_ij - w_mirror), which
  // is the same moment but vanishes exactly on centro-symmetric kernels.
  const auto c = (k - 1) / 2;
  if (c == 0) return torch::zeros({}, W.options());
  auto diff = W - W.flip({2, 3});
  auto pos = torch::arange(-c, 0, W.options());  // i - c for i < c
  auto row_moment = (diff.slice(2, 0, c) * pos.view({1, 1, c, 1})).sum({2, 3});
  auto col_moment = (diff.slice(3, 0, c) * pos.view({1, 1, 1, c})).sum({2, 3});
  return row_moment.abs().sum() + col_moment.abs().sum();
}

DegradationLoss degradation_loss(const torch::Tensor& pseudo_noisy, const torch::Tensor& s_c,
                                 const torch::Tensor& residual, const std::vector<torch::Tensor>& kernels,
                                 double lambda_c) {
  if (pseudo_noisy.sizes() != s_c.sizes()) throw DimensionError("degradation_loss: pseudo-LR and LR dims differ");
  auto clean = residual.defined() ? pseudo_noisy - residual : pseudo_noisy;
  auto l1 = (clean - s_c).abs().mean();
  torch::Tensor centroid = torch::zeros({}, pseudo_noisy.options());
  for (const auto& W : kernels) centroid = centroid + centroid_loss(W);
  return {l1 + lambda_c * centroid, l1, centroid};
}

std::array<double, 2> impulse_centroid_offset(DegradationNet& net, int lr_size, double amplitude) {
  torch::NoGradGuard no_grad;
  const int r = net->config().ratio;
  const int hr = lr_size * r;
  const int c = lr_size / 2;
  auto background = torch::full({1, 3, hr, hr}, 0.5);
  auto impulse = background.clone();
  impulse.slice(2, c * r, c * r + r).slice(3, c * r, c * r + r) += amplitude;
  auto guide = torch::full({1, 3, lr_size, lr_size}, 0.5);
  auto response = (net->forward(impulse, guide) - net->forward(background, guide)).sum(1).squeeze(0).to(torch::kFloat64);
  auto rows = torch::arange(lr_size, response.options()).view({-1, 1});
  auto cols = torch::arange(lr_size, response.options()).view({1, -1});
  const double mass = response.sum().item<double>();
  if (std::abs(mass) < 1e-12) throw NumericError("impulse response has no mass");
  const double cy = (response * rows).sum().item<double>() / mass;
  const double cx = (response * cols).sum().item<double>() / mass;
  return {cy - c, cx - c};
}

}  // namespace dzsr
