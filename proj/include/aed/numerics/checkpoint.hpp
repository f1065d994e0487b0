#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/numerics/network.hpp"

namespace aed {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Self-describing binary container:
///
///   "AEDCKPT\n"                      8-byte magic
///   u32 format version
///   u64 header length, header bytes  JSON metadata (architecture descriptor etc.)
///   u32 network count, then per network:
///     u64 name length, name bytes
///     u32 input dim, u32 layer count, per layer {u32 out dim, u8 activation}
///     u64 parameter count, f64 parameters
///   u32 vector count, then per vector: u64 name length, name, u64 length, f64 values
///
/// All integers and reals are little-endian.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Network>> networks;
  std::vector<std::pair<std::string, std::vector<double>>> vectors;

  const Network& network(const std::string& name) const;
  const std::vector<double>& vector(const std::string& name) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aed
