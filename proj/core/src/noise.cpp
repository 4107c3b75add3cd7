#include "dzsr/noise.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <random>
#include <sstream>

#include <jpeglib.h>

#include "dzsr/error.hpp"

namespace dzsr {
namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

const char* stage_name(NoiseStage s) {
  switch (s) {
    case NoiseStage::kGaussian: return "gaussian";
    case NoiseStage::kJpeg: return "jpeg";
    case NoiseStage::kSensor: return "sensor";
  }
  return "?";
}

double draw_uniform(std::mt19937_64& rng, const std::array<double, 2>& range) {
  if (range[1] <= range[0]) return range[0];
  return std::uniform_real_distribution<double>(range[0], range[1])(rng);
}

}  // namespace

NoiseSpec NoiseSpec::disabled() {
  NoiseSpec s;
  s.gaussian_sigma_range = {0.0, 0.0};
  s.jpeg_quality_range = {100, 100};
  s.sensor_a_range = {0.0, 0.0};
  s.sensor_b_range = {0.0, 0.0};
  return s;
}

void NoiseSpec::validate() const {
  if (gaussian_sigma_range[0] < 0.0 || gaussian_sigma_range[1] < gaussian_sigma_range[0]) {
    throw ConfigError("gaussian sigma range must be non-empty and non-negative");
  }
  if (jpeg_quality_range[0] < 1 || jpeg_quality_range[1] > 100 || jpeg_quality_range[1] < jpeg_quality_range[0]) {
    throw ConfigError("jpeg quality range must lie in [1, 100]");
  }
  if (sensor_a_range[0] < 0.0 || sensor_a_range[1] < sensor_a_range[0] || sensor_b_range[0] < 0.0 ||
      sensor_b_range[1] < sensor_b_range[0]) {
    throw ConfigError("sensor noise ranges must be non-empty and non-negative");
  }
}

std::string NoiseDraw::order_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < order.size(); ++i) os << (i ? "," : "") << stage_name(order[i]);
  return os.str();
}

std::array<NoiseStage, 3> NoiseDraw::parse_order(const std::string& s) {
  std::array<NoiseStage, 3> out{};
  std::istringstream is(s);
  std::string tok;
  std::size_t i = 0;
  while (std::getline(is, tok, ',')) {
    if (i >= out.size()) throw DataError("noise order has too many stages: " + s);
    if (tok == "gaussian") out[i] = NoiseStage::kGaussian;
    else if (tok == "jpeg") out[i] = NoiseStage::kJpeg;
    else if (tok == "sensor") out[i] = NoiseStage::kSensor;
    else throw DataError("unknown noise stage '" + tok + "'");
    ++i;
  }
  if (i != out.size()) throw DataError("noise order must list three stages: " + s);
  return out;
}

Image jpeg_roundtrip(const Image& img, int quality) {
  const int h = img.height, w = img.width;
  std::vector<unsigned char> rgb(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    rgb[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels[i], 0.0f, 1.0f) * 255.0f));
  }

  unsigned char* buffer = nullptr;
  unsigned long buffer_size = 0;
  {
    jpeg_compress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
      jpeg_destroy_compress(&cinfo);
      std::free(buffer);
      throw DataError("JPEG encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    cinfo.dct_method = JDCT_ISLOW;
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
      JSAMPROW row = &rgb[static_cast<std::size_t>(cinfo.next_scanline) * w * 3];
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
  }

  Image out(h, w);
  {
    jpeg_decompress_struct dinfo{};
    JpegErrorManager err{};
    dinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
      jpeg_destroy_decompress(&dinfo);
      std::free(buffer);
      throw DataError("JPEG decode failed");
    }
    jpeg_create_decompress(&dinfo);
    jpeg_mem_src(&dinfo, buffer, buffer_size);
    jpeg_read_header(&dinfo, TRUE);
    dinfo.out_color_space = JCS_RGB;
    dinfo.dct_method = JDCT_ISLOW;
    jpeg_start_decompress(&dinfo);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    while (dinfo.output_scanline < dinfo.output_height) {
      const int y = static_cast<int>(dinfo.output_scanline);
      JSAMPROW ptr = row.data();
      jpeg_read_scanlines(&dinfo, &ptr, 1);
      for (int i = 0; i < w * 3; ++i) out.pixels[static_cast<std::size_t>(y) * w * 3 + i] = row[i] / 255.0f;
    }
    jpeg_finish_decompress(&dinfo);
    jpeg_destroy_decompress(&dinfo);
  }
  std::free(buffer);
  return out;
}

NoisyImage inject_noise(const Image& img, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  for (float v : img.pixels) {
    if (!std::isfinite(v)) throw NumericError("inject_noise: input contains non-finite values");
  }
  std::mt19937_64 rng(seed);
  NoisyImage result;
  NoiseDraw& d = result.draw;
  std::shuffle(d.order.begin(), d.order.end(), rng);
  d.gaussian_sigma = draw_uniform(rng, spec.gaussian_sigma_range);
  d.jpeg_quality = spec.jpeg_quality_range[1] > spec.jpeg_quality_range[0]
                       ? std::uniform_int_distribution<int>(spec.jpeg_quality_range[0], spec.jpeg_quality_range[1])(rng)
                       : spec.jpeg_quality_range[0];
  d.sensor_a = draw_uniform(rng, spec.sensor_a_range);
  d.sensor_b = draw_uniform(rng, spec.sensor_b_range);

  Image work = img;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (NoiseStage stage : d.order) {
    switch (stage) {
      case NoiseStage::kGaussian:
        if (d.gaussian_sigma > 0.0) {
          for (float& v : work.pixels) v = std::clamp(static_cast<float>(v + d.gaussian_sigma * normal(rng)), 0.0f, 1.0f);
        }
        break;
      case NoiseStage::kSensor:
        if (d.sensor_a > 0.0 || d.sensor_b > 0.0) {
          for (float& v : work.pixels) {
            const double sd = std::sqrt(std::max(d.sensor_a * v + d.sensor_b, 0.0));
            v = std::clamp(static_cast<float>(v + sd * normal(rng)), 0.0f, 1.0f);
          }
        }
        break;
      case NoiseStage::kJpeg:
        if (d.jpeg_quality < 100) work = jpeg_roundtrip(work, d.jpeg_quality);
        break;
    }
  }

  // Make clean + residual == noisy exact in float arithmetic, staying in [0, 1].
  result.residual.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float clean = img.pixels[i];
    float r = work.pixels[i] - clean;
    float n = clean + r;
    while (n > 1.0f) {
      r = std::nextafter(r, -1.0f);
      n = clean + r;
    }
    while (n < 0.0f) {
      r = std::nextafter(r, 1.0f);
      n = clean + r;
    }
    result.residual[i] = r;
    work.pixels[i] = n;
  }
  result.noisy = std::move(work);
  return result;
}

}  // namespace dzsr
