#include "dzsr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dzsr/error.hpp"

namespace dzsr {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config: bad boolean '" + v + "' for " + key);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define DZSR_INT(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_number<int>(#name, v); }, \
           [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define DZSR_U64(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_number<std::uint64_t>(#name, v); }, \
           [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define DZSR_DOUBLE(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }, \
           [](const TrainConfig& c) { return format_double(c.name); }}}
#define DZSR_BOOL(name) \
  {#name, {[](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
           [](const TrainConfig& c) { return std::string(c.name ? "1" : "0"); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      DZSR_INT(ratio),
      DZSR_INT(lr_patch),
      DZSR_INT(batch),
      DZSR_INT(epochs),
      DZSR_INT(deg_epochs),
      DZSR_DOUBLE(lr),
      DZSR_DOUBLE(lr_decayed),
      DZSR_DOUBLE(adam_beta1),
      DZSR_DOUBLE(adam_beta2),
      DZSR_DOUBLE(zero_prob),
      DZSR_DOUBLE(lambda_c),
      DZSR_DOUBLE(lambda_sw),
      DZSR_U64(seed),
      DZSR_BOOL(hflip),
      DZSR_BOOL(vflip),
      DZSR_BOOL(rot90),
      DZSR_BOOL(pseudo_noise),
      DZSR_INT(channels),
      DZSR_INT(blocks),
      DZSR_INT(feature_channels),
      DZSR_INT(estimator_channels),
      DZSR_INT(adastn_stages),
      {"offset_mode", {[](TrainConfig& c, const std::string& v) { c.offset_mode = v; },
                       [](const TrainConfig& c) { return c.offset_mode; }}},
      DZSR_INT(match_patch),
      DZSR_INT(match_stride),
      DZSR_INT(deg_channels),
      DZSR_INT(deg_guidance_channels),
      DZSR_INT(deg_kernel),
      DZSR_INT(perceptual_channels),
      DZSR_INT(perceptual_scales),
      DZSR_U64(perceptual_seed),
      DZSR_INT(sw_projections),
      DZSR_INT(log_every),
  };
  return table;
}

#undef DZSR_INT
#undef DZSR_U64
#undef DZSR_DOUBLE
#undef DZSR_BOOL

const Field* find_field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return &f;
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  if (ratio != 2 && ratio != 4) throw ConfigError("config: ratio must be 2 or 4");
  positive(lr_patch, "lr_patch");
  positive(batch, "batch");
  positive(epochs, "epochs");
  positive(deg_epochs, "deg_epochs");
  positive(channels, "channels");
  positive(blocks, "blocks");
  positive(feature_channels, "feature_channels");
  positive(estimator_channels, "estimator_channels");
  positive(adastn_stages, "adastn_stages");
  positive(deg_channels, "deg_channels");
  positive(deg_guidance_channels, "deg_guidance_channels");
  positive(perceptual_channels, "perceptual_channels");
  positive(perceptual_scales, "perceptual_scales");
  positive(log_every, "log_every");
  positive(match_stride, "match_stride");
  if (match_patch < 1 || match_patch % 2 == 0) throw ConfigError("config: match_patch must be odd");
  if (deg_kernel < 1 || deg_kernel % 2 == 0) throw ConfigError("config: deg_kernel must be odd");
  if (sw_projections < 0) throw ConfigError("config: sw_projections must be >= 0");
  if (lr_patch % ratio != 0) throw ConfigError("config: lr_patch must be divisible by ratio");
  if (!(lr > 0.0) || !(lr_decayed > 0.0)) throw ConfigError("config: learning rates must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("config: Adam betas must lie in [0, 1)");
  }
  if (!(zero_prob >= 0.0 && zero_prob <= 1.0)) throw ConfigError("config: zero_prob must lie in [0, 1]");
  if (!(lambda_c >= 0.0) || !(lambda_sw >= 0.0)) throw ConfigError("config: loss weights must be >= 0");
  parse_offset_mode(offset_mode);
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    f->set(base, value);
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + "=" + f.get(cfg) + "\n";
  return out;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t architecture_fingerprint(const TrainConfig& cfg, NetKind kind) {
  std::ostringstream os;
  os << "kind=" << static_cast<std::uint32_t>(kind) << ";ratio=" << cfg.ratio;
  if (kind == NetKind::kDegradation) {
    os << ";deg_channels=" << cfg.deg_channels << ";deg_guidance_channels=" << cfg.deg_guidance_channels
       << ";deg_kernel=" << cfg.deg_kernel;
  } else {
    os << ";channels=" << cfg.channels << ";blocks=" << cfg.blocks << ";feature_channels=" << cfg.feature_channels
       << ";estimator_channels=" << cfg.estimator_channels << ";adastn_stages=" << cfg.adastn_stages
       << ";offset_mode=" << to_string(parse_offset_mode(cfg.offset_mode)) << ";match_patch=" << cfg.match_patch;
  }
  const std::string s = os.str();
  return fnv1a(s.data(), s.size());
}

}  // namespace dzsr
