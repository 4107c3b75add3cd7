#include "dzsr/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "dzsr/error.hpp"
#include "dzsr/metrics.hpp"
#include "dzsr/training.hpp"

namespace dzsr {
namespace {

MetricMean mean_of(const std::vector<SampleMetrics>& rows, double SampleMetrics::*field) {
  MetricMean m;
  double sum = 0.0;
  for (const auto& r : rows) {
    const double v = r.*field;
    if (std::isinf(v)) {
      ++m.infinite;
    } else {
      sum += v;
      ++m.finite;
    }
  }
  m.value = m.finite ? sum / m.finite : std::numeric_limits<double>::infinity();
  return m;
}

std::string describe(const char* name, const MetricMean& m) {
  std::string s = std::string(name) + ": " + format_metric(m.value);
  if (m.infinite) s += " (" + std::to_string(m.infinite) + " exact match(es) excluded from the mean)";
  return s + "\n";
}

void check_gt(const NamedSample& s) {
  if (s.sample.telephoto.pixels.empty()) throw DataError("sample " + s.id + " has no ground-truth telephoto");
}

SampleMetrics score(const NamedSample& s, const Image& out) {
  const Image& gt = s.sample.telephoto;
  if (!out.same_shape(gt)) throw DimensionError("output of " + s.id + " differs from its ground truth in dims");
  const auto corner = corner_mask(gt.height, gt.width, s.sample.ratio);
  SampleMetrics m;
  m.id = s.id;
  m.full_psnr = psnr(out, gt);
  m.full_ssim = ssim(out, gt);
  m.corner_psnr = masked_psnr(out, gt, corner);
  m.corner_ssim = masked_ssim(out, gt, corner);
  m.bicubic_full_psnr = psnr(clamp01(bicubic_upsample(s.sample.short_focus, s.sample.ratio)), gt);
  return m;
}

}  // namespace

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

MetricMean EvalReport::mean_full_psnr() const { return mean_of(rows, &SampleMetrics::full_psnr); }
MetricMean EvalReport::mean_full_ssim() const { return mean_of(rows, &SampleMetrics::full_ssim); }
MetricMean EvalReport::mean_corner_psnr() const { return mean_of(rows, &SampleMetrics::corner_psnr); }
MetricMean EvalReport::mean_corner_ssim() const { return mean_of(rows, &SampleMetrics::corner_ssim); }
MetricMean EvalReport::mean_bicubic_psnr() const { return mean_of(rows, &SampleMetrics::bicubic_full_psnr); }

std::string EvalReport::csv() const {
  std::string out = "id,full_psnr,full_ssim,corner_psnr,corner_ssim,bicubic_full_psnr\n";
  auto row = [&](const std::string& id, double a, double b, double c, double d, double e) {
    out += id + "," + format_metric(a) + "," + format_metric(b) + "," + format_metric(c) + "," + format_metric(d) +
           "," + format_metric(e) + "\n";
  };
  for (const auto& r : rows) row(r.id, r.full_psnr, r.full_ssim, r.corner_psnr, r.corner_ssim, r.bicubic_full_psnr);
  row("mean", mean_full_psnr().value, mean_full_ssim().value, mean_corner_psnr().value, mean_corner_ssim().value,
      mean_bicubic_psnr().value);
  return out;
}

std::string EvalReport::summary() const {
  std::string s = "samples: " + std::to_string(rows.size()) + "\n";
  s += "pixels per image: full " + std::to_string(full_pixels) + ", corner " + std::to_string(corner_pixels) + "\n";
  s += describe("Full-Image PSNR (dB)", mean_full_psnr());
  s += describe("Full-Image SSIM", mean_full_ssim());
  s += describe("Corner-Image PSNR (dB)", mean_corner_psnr());
  s += describe("Corner-Image SSIM", mean_corner_ssim());
  s += describe("Bicubic Full-Image PSNR (dB)", mean_bicubic_psnr());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", seconds);
  s += std::string("runtime: ") + buf + " s total";
  if (!rows.empty()) {
    std::snprintf(buf, sizeof(buf), "%.3f", seconds / rows.size());
    s += std::string(", ") + buf + " s per image";
  }
  return s + "\n";
}

EvalReport score_outputs(const std::vector<NamedSample>& data, const std::vector<Image>& outputs) {
  if (data.size() != outputs.size()) throw DimensionError("score_outputs: one output per sample required");
  EvalReport report;
  for (std::size_t i = 0; i < data.size(); ++i) {
    check_gt(data[i]);
    report.rows.push_back(score(data[i], outputs[i]));
  }
  if (!data.empty()) {
    const auto& gt = data.front().sample.telephoto;
    report.full_pixels = full_mask(gt.height, gt.width).count();
    report.corner_pixels = corner_mask(gt.height, gt.width, data.front().sample.ratio).count();
  }
  return report;
}

EvalReport evaluate(ZoomingNet& net, const std::vector<NamedSample>& data) {
  if (data.empty()) throw DataError("evaluation dataset is empty");
  const auto start = std::chrono::steady_clock::now();
  std::vector<Image> outputs;
  for (const auto& s : data) {
    check_gt(s);
    outputs.push_back(infer(net, s.sample.short_focus, s.sample.telephoto));
  }
  auto report = score_outputs(data, outputs);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write report " + path.string());
    os << report.csv();
  }
  std::ofstream os(path.string() + ".summary.txt");
  if (!os) throw DataError("cannot write report summary for " + path.string());
  os << report.summary();
}

}  // namespace dzsr
