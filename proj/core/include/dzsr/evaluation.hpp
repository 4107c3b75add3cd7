#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dzsr/dataset.hpp"
#include "dzsr/zooming.hpp"

namespace dzsr {

struct SampleMetrics {
  std::string id;
  double full_psnr = 0.0;
  double full_ssim = 0.0;
  double corner_psnr = 0.0;
  double corner_ssim = 0.0;
  double bicubic_full_psnr = 0.0;  // bicubic upsampling of the LR against the same GT
};

struct MetricMean {
  double value = 0.0;
  int finite = 0;    // entries averaged
  int infinite = 0;  // exact matches left out of the mean
};

struct EvalReport {
  std::vector<SampleMetrics> rows;
  std::int64_t full_pixels = 0;    // per image
  std::int64_t corner_pixels = 0;  // per image
  double seconds = 0.0;            // wall time; kept out of the CSV

  MetricMean mean_full_psnr() const;
  MetricMean mean_full_ssim() const;
  MetricMean mean_corner_psnr() const;
  MetricMean mean_corner_ssim() const;
  MetricMean mean_bicubic_psnr() const;

  /// One row per sample plus a "mean" row; infinite PSNR is written as "inf".
  std::string csv() const;
  std::string summary() const;
};

/// Full-Image and Corner-Image metrics of the test graph against each
/// sample's telephoto. Throws DataError when a sample has no telephoto.
EvalReport evaluate(ZoomingNet& net, const std::vector<NamedSample>& data);

/// Scores precomputed outputs (one per sample) the same way.
EvalReport score_outputs(const std::vector<NamedSample>& data, const std::vector<Image>& outputs);

/// CSV to `path`, human summary to `path` + ".summary.txt".
void write_report(const std::filesystem::path& path, const EvalReport& report);

std::string format_metric(double v);

}  // namespace dzsr
