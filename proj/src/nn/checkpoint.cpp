#include "nf/nn/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "nf/common.hpp"

namespace nf::nn {

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'F', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw IoError(path.string() + ": truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.kind));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.descriptor.size()));
  for (auto d : ckpt.descriptor) put<std::int64_t>(out, d);
  put<std::uint64_t>(out, ckpt.values.size());
  for (double v : ckpt.values) put<double>(out, v);
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError(path.string() + ": not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = static_cast<NetworkKind>(get<std::uint32_t>(in, path));
  const auto n = get<std::uint32_t>(in, path);
  if (n > 4096) throw IoError(path.string() + ": corrupt descriptor");
  for (std::uint32_t i = 0; i < n; ++i) ckpt.descriptor.push_back(get<std::int64_t>(in, path));
  const auto count = get<std::uint64_t>(in, path);
  if (count > (std::uint64_t{1} << 32)) throw IoError(path.string() + ": corrupt value count");
  ckpt.values.resize(count);
  for (auto& v : ckpt.values) v = get<double>(in, path);
  return ckpt;
}

}  // namespace nf::nn

#include "nf/nn/mlp.hpp"

namespace nf::nn {

void save_mlp(const std::filesystem::path& path, Mlp& net) {
  const auto s = net.shape();
  write_checkpoint(path, {NetworkKind::ngl_field,
                          {s.input_dim, s.width, s.depth, s.skip_at ? *s.skip_at : -1},
                          flatten(net.parameters())});
}

Mlp load_mlp(const std::filesystem::path& path) {
  const auto ckpt = read_checkpoint(path);
  if (ckpt.kind != NetworkKind::ngl_field || ckpt.descriptor.size() != 4) {
    throw IoError(path.string() + ": not a scalar-field checkpoint");
  }
  MlpShape s;
  s.input_dim = static_cast<int>(ckpt.descriptor[0]);
  s.width = static_cast<int>(ckpt.descriptor[1]);
  s.depth = static_cast<int>(ckpt.descriptor[2]);
  if (ckpt.descriptor[3] >= 0) {
    s.skip_at = static_cast<int>(ckpt.descriptor[3]);
  } else {
    s.skip_at.reset();
  }
  Mlp net;
  try {
    net = Mlp(s);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": bad architecture descriptor: " + e.what());
  }
  try {
    assign(net.parameters(), ckpt.values);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return net;
}

}  // namespace nf::nn
