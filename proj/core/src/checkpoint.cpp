#include "dzsr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <torch/torch.h>

#include "dzsr/error.hpp"

namespace dzsr {
namespace {

constexpr char kMagic[8] = {'D', 'Z', 'S', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CheckpointError("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& is, std::uint32_t limit) {
  const auto n = get<std::uint32_t>(is);
  if (n > limit) throw CheckpointError("checkpoint string length out of range");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, Checkpoint::kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.kind));
  put<std::uint64_t>(os, ckpt.fingerprint);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.config_text.size()));
  os.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto c = t.detach().to(torch::kFloat32).contiguous();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(c.dim()));
    for (auto d : c.sizes()) put<std::int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(c.data_ptr<float>()), static_cast<std::streamsize>(c.numel() * sizeof(float)));
  }
  if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a dzsr checkpoint: " + path.string());
  }
  if (get<std::uint32_t>(is) != Checkpoint::kVersion) throw CheckpointError("unsupported checkpoint version");
  Checkpoint ckpt;
  const auto kind = get<std::uint32_t>(is);
  if (kind != 1 && kind != 2) throw CheckpointError("unknown checkpoint kind");
  ckpt.kind = static_cast<NetKind>(kind);
  ckpt.fingerprint = get<std::uint64_t>(is);
  ckpt.config_text = get_string(is, 1u << 20);
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(is, 4096);
    const auto ndim = get<std::uint32_t>(is);
    if (ndim > 8) throw CheckpointError("checkpoint tensor rank out of range");
    std::vector<std::int64_t> dims(ndim);
    std::int64_t numel = 1;
    for (auto& d : dims) {
      d = get<std::int64_t>(is);
      if (d < 0 || d > (1 << 28)) throw CheckpointError("checkpoint tensor dims out of range");
      numel *= d;
    }
    auto t = torch::empty(dims, torch::kFloat32);
    if (numel && !is.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(numel * sizeof(float)))) {
      throw CheckpointError("checkpoint truncated");
    }
    ckpt.params.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

Checkpoint capture_checkpoint(const torch::nn::Module& module, NetKind kind, const TrainConfig& cfg) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.fingerprint = architecture_fingerprint(cfg, kind);
  ckpt.config_text = serialize_config(cfg);
  for (const auto& item : module.named_parameters(true)) {
    ckpt.params.emplace_back(item.key(), item.value().detach().to(torch::kFloat32).clone());
  }
  return ckpt;
}

void apply_checkpoint(torch::nn::Module& module, const Checkpoint& ckpt, NetKind kind, std::uint64_t fingerprint) {
  if (ckpt.kind != kind) throw CheckpointError("checkpoint holds the wrong network kind");
  if (ckpt.fingerprint != fingerprint) throw CheckpointError("checkpoint fingerprint does not match the architecture config");
  auto params = module.named_parameters(true);
  if (params.size() != ckpt.params.size()) throw CheckpointError("checkpoint parameter count mismatch");
  torch::NoGradGuard no_grad;
  for (const auto& [name, t] : ckpt.params) {
    auto* dst = params.find(name);
    if (!dst) throw CheckpointError("checkpoint parameter '" + name + "' unknown to the network");
    if (dst->sizes() != t.sizes()) throw CheckpointError("checkpoint parameter '" + name + "' has the wrong shape");
    dst->copy_(t);
  }
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes.data(), bytes.size());
  return os.str();
}

}  // namespace dzsr
