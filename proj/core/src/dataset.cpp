#include "dzsr/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "dzsr/error.hpp"
#include "dzsr/png_io.hpp"
#include "dzsr/rng.hpp"

namespace dzsr {
namespace fs = std::filesystem;
namespace {

constexpr std::array<char, 4> kWarpMagic{'D', 'Z', 'W', 'F'};

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& p) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError(p.string() + ": missing key '" + key + "'");
  return it->second;
}

}  // namespace

void write_warp(const fs::path& path, const WarpField& warp) {
  if (warp.height > 0xffff || warp.width > 0xffff) throw DimensionError("warp field too large for header");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kWarpMagic.data(), kWarpMagic.size());
  const std::uint16_t dims[2] = {static_cast<std::uint16_t>(warp.height), static_cast<std::uint16_t>(warp.width)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(warp.data.data()), static_cast<std::streamsize>(warp.data.size() * sizeof(float)));
  if (!out) throw DataError("failed writing " + path.string());
}

WarpField read_warp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 4> magic{};
  std::uint16_t dims[2] = {0, 0};
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || magic != kWarpMagic) throw DataError(path.string() + ": bad warp header");
  WarpField w(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(w.data.data()), static_cast<std::streamsize>(w.data.size() * sizeof(float)));
  if (!in) throw DataError(path.string() + ": truncated warp payload");
  return w;
}

void write_sample(const fs::path& dir, const DualZoomSample& s) {
  fs::create_directories(dir);
  write_png16(dir / dataset_files::kShort, s.short_focus);
  write_png16(dir / dataset_files::kTele, s.telephoto);
  write_warp(dir / dataset_files::kWarp, s.true_warp);
  std::ofstream meta(dir / dataset_files::kMeta);
  meta << "seed=" << s.gen_seed << '\n'
       << "ratio=" << s.ratio << '\n'
       << "warp_bound=" << fmt_double(s.warp_bound) << '\n'
       << "sigma=" << fmt_double(s.meta.blur_sigma) << '\n'
       << "noise_sigma=" << fmt_double(s.meta.noise.gaussian_sigma) << '\n'
       << "quality=" << s.meta.noise.jpeg_quality << '\n'
       << "sensor_a=" << fmt_double(s.meta.noise.sensor_a) << '\n'
       << "sensor_b=" << fmt_double(s.meta.noise.sensor_b) << '\n'
       << "order=" << s.meta.noise.order_string() << '\n';
  if (!meta) throw DataError("failed writing meta for " + dir.string());
}

DualZoomSample read_sample(const fs::path& dir) {
  DualZoomSample s;
  s.short_focus = read_png(dir / dataset_files::kShort);
  s.telephoto = read_png(dir / dataset_files::kTele);
  s.true_warp = read_warp(dir / dataset_files::kWarp);
  const fs::path meta_path = dir / dataset_files::kMeta;
  const auto kv = read_key_values(meta_path);
  try {
    s.gen_seed = std::stoull(require(kv, "seed", meta_path));
    s.ratio = std::stoi(require(kv, "ratio", meta_path));
    s.warp_bound = std::stod(require(kv, "warp_bound", meta_path));
    s.meta.blur_sigma = std::stod(require(kv, "sigma", meta_path));
    s.meta.noise.gaussian_sigma = std::stod(require(kv, "noise_sigma", meta_path));
    s.meta.noise.jpeg_quality = std::stoi(require(kv, "quality", meta_path));
    s.meta.noise.sensor_a = std::stod(require(kv, "sensor_a", meta_path));
    s.meta.noise.sensor_b = std::stod(require(kv, "sensor_b", meta_path));
  } catch (const std::logic_error& e) {
    throw DataError(meta_path.string() + ": bad numeric value (" + e.what() + ")");
  }
  s.meta.noise.order = NoiseDraw::parse_order(require(kv, "order", meta_path));
  if (s.telephoto.height != s.ratio * s.short_focus.height || s.telephoto.width != s.ratio * s.short_focus.width) {
    throw DataError(dir.string() + ": telephoto dims must be ratio x short-focus dims");
  }
  return s;
}

std::string sample_id(int index) {
  std::ostringstream os;
  os << "sample_" << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

void write_dataset(const fs::path& root, const std::vector<NamedSample>& samples) {
  fs::create_directories(root);
  for (const auto& s : samples) write_sample(root / s.id, s.sample);
}

std::vector<NamedSample> read_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset directory " + root.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / dataset_files::kMeta)) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("dataset " + root.string() + " is empty");
  std::vector<NamedSample> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back({d.filename().string(), read_sample(d)});
  return out;
}

std::vector<NamedSample> generate_dataset(const GenerateOptions& opts) {
  if (opts.scenes < 1) throw ConfigError("scene count must be >= 1");
  std::vector<NamedSample> out;
  out.reserve(static_cast<std::size_t>(opts.scenes));
  for (int i = 0; i < opts.scenes; ++i) {
    const std::uint64_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(i));
    const Image hr = synthesize_scene(seed, opts.size, opts.size, 4 * std::max(opts.ratio, 4));
    out.push_back({sample_id(i), make_dualzoom_pair(hr, opts.ratio, opts.pair, seed)});
  }
  return out;
}

}  // namespace dzsr
