#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <torch/torch.h>

#include "dzsr/image.hpp"

namespace dzsr::testing {

inline Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w);
  for (auto& v : img.pixels) v = u(rng);
  return img;
}

inline double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

/// Central differences of a scalar function w.r.t. every element of `t`
/// (modified in place and restored).
inline torch::Tensor numeric_gradient(const std::function<double()>& f, torch::Tensor t, double eps) {
  torch::NoGradGuard no_grad;
  auto grad = torch::zeros_like(t, torch::kFloat64);
  auto flat = t.view({-1});
  auto gflat = grad.view({-1});
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + eps;
    const double up = f();
    flat[i] = orig - eps;
    const double down = f();
    flat[i] = orig;
    gflat[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

inline double relative_error(const torch::Tensor& analytic, const torch::Tensor& numeric) {
  const auto a = analytic.to(torch::kFloat64), n = numeric.to(torch::kFloat64);
  const double denom = std::max(n.norm().item<double>(), 1e-12);
  return (a - n).norm().item<double>() / denom;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dzsr_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace dzsr::testing
