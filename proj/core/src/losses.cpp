#include "dzsr/losses.hpp"

#include <cmath>
#include <random>

#include <torch/torch.h>

#include "dzsr/error.hpp"
#include "dzsr/rng.hpp"

namespace dzsr {
namespace {

namespace F = torch::nn::functional;

torch::Tensor as_batch(const torch::Tensor& x) {
  if (x.dim() == 3) return x.unsqueeze(0);
  if (x.dim() == 4) return x;
  throw DimensionError("sliced_wasserstein: expected [C, H, W] or [N, C, H, W]");
}

}  // namespace

torch::Tensor random_projections(int count, int channels, std::uint64_t seed, torch::ScalarType dtype) {
  if (count < 1 || channels < 1) throw ConfigError("random_projections: sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto M = torch::empty({count, channels}, torch::kFloat64);
  auto acc = M.accessor<double, 2>();
  for (int i = 0; i < count; ++i) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int c = 0; c < channels; ++c) {
        acc[i][c] = normal(rng);
        norm += acc[i][c] * acc[i][c];
      }
    } while (norm < 1e-24);
    norm = std::sqrt(norm);
    for (int c = 0; c < channels; ++c) acc[i][c] /= norm;
  }
  return M.to(dtype);
}

torch::Tensor sliced_wasserstein_with(const torch::Tensor& U, const torch::Tensor& V, const torch::Tensor& M) {
  if (U.sizes() != V.sizes()) throw DimensionError("sliced_wasserstein: U and V dims differ");
  auto u = as_batch(U);
  auto v = as_batch(V);
  const auto N = u.size(0), C = u.size(1);
  if (M.dim() != 2 || M.size(1) != C) throw DimensionError("sliced_wasserstein: projection width differs from C");
  auto Mt = M.to(u.scalar_type());
  // Accumulate channel by channel so every pixel sees the same arithmetic;
  // a GEMM may round edge columns differently, which would break exact
  // invariance under spatial permutations.
  auto project = [&](const torch::Tensor& x) {
    auto flat = x.reshape({N, C, -1});
    torch::Tensor acc;
    for (std::int64_t c = 0; c < C; ++c) {
      auto term = Mt.select(1, c).view({1, -1, 1}) * flat.select(1, c).unsqueeze(1);
      acc = c == 0 ? term : acc + term;
    }
    return acc;
  };
  auto pu = project(u);
  auto pv = project(v);
  // The stable variant is markedly faster on CPU; the sorted values are the same.
  // The optional<bool> spelling matters: sort(true, -1) would bind to the
  // (dim, descending) overload.
  auto su = std::get<0>(pu.sort(std::optional<bool>(true), -1, false));
  auto sv = std::get<0>(pv.sort(std::optional<bool>(true), -1, false));
  return (su - sv).abs().mean();
}

torch::Tensor sliced_wasserstein(const torch::Tensor& U, const torch::Tensor& V, const SWConfig& cfg,
                                 std::uint64_t seed) {
  const int C = static_cast<int>(as_batch(U).size(1));
  const int count = cfg.num_projections > 0 ? cfg.num_projections : C;
  return sliced_wasserstein_with(U, V, random_projections(count, C, seed, U.scalar_type()));
}

PerceptualExtractor::PerceptualExtractor(std::uint64_t seed, int channels, int scales) : channels_(channels) {
  if (channels < 1 || scales < 1) throw ConfigError("perceptual extractor sizes must be positive");
  std::mt19937_64 rng(seed);
  int in = 3;
  for (int s = 0; s < scales; ++s) {
    const double bound = std::sqrt(6.0 / (in * 9));
    std::uniform_real_distribution<float> u(-bound, bound);
    auto w = torch::empty({channels, in, 3, 3});
    auto* p = w.data_ptr<float>();
    for (std::int64_t i = 0; i < w.numel(); ++i) p[i] = u(rng);
    weights_.push_back(w);
    biases_.push_back(torch::zeros({channels}));
    in = channels;
  }
}

std::vector<torch::Tensor> PerceptualExtractor::operator()(const torch::Tensor& img) const {
  if (img.dim() != 4 || img.size(1) != 3) throw DimensionError("perceptual features: expected [N, 3, H, W]");
  std::vector<torch::Tensor> out;
  torch::Tensor x = img;
  for (std::size_t s = 0; s < weights_.size(); ++s) {
    if (s > 0) x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
    x = F::leaky_relu(F::conv2d(x, weights_[s].to(x.scalar_type()), F::Conv2dFuncOptions().bias(biases_[s].to(x.scalar_type())).padding(1)),
                      F::LeakyReLUFuncOptions().negative_slope(0.2));
    out.push_back(x);
  }
  return out;
}

SelfDZSRLoss selfdzsr_loss(const torch::Tensor& y_hat, const torch::Tensor& t, const PerceptualExtractor& ext,
                           const SWConfig& cfg, std::uint64_t seed, double lambda_sw) {
  if (y_hat.sizes() != t.sizes()) throw DimensionError("selfdzsr_loss: prediction and target dims differ");
  auto l1 = (y_hat - t).abs().mean();
  const auto fy = ext(y_hat);
  const auto ft = ext(t);
  torch::Tensor sw = torch::zeros({}, y_hat.options());
  for (std::size_t s = 0; s < fy.size(); ++s) sw = sw + sliced_wasserstein(fy[s], ft[s], cfg, derive_seed(seed, s));
  sw = sw / static_cast<double>(fy.size());
  return {l1 + lambda_sw * sw, l1, sw};
}

}  // namespace dzsr
