#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nf/nn/parameters.hpp"

namespace nf::nn {

// Binary layout, all integers and floats little-endian:
//   "NFCK" | u32 version | u32 kind | u32 n | i64 descriptor[n]
//   | u64 count | f64 values[count]
// Values are the network's parameter blocks flattened in layer order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class NetworkKind : std::uint32_t { ngl_field = 1, gvo = 2 };

struct Checkpoint {
  NetworkKind kind{};
  std::vector<std::int64_t> descriptor;
  std::vector<double> values;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Throws IoError on unreadable files, bad magic, unknown version or
// truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace nf::nn

namespace nf::nn {

class Mlp;

// Scalar-field networks: descriptor [input_dim, width, depth, skip_at or -1].
void save_mlp(const std::filesystem::path& path, Mlp& net);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace nf::nn
