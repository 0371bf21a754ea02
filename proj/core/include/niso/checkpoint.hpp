#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "niso/optimizer.hpp"
#include "niso/spectral_operator.hpp"

namespace niso {

inline constexpr std::array<char, 8> kCheckpointMagic{'N', 'I', 'S', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t step = 0;
  SpectralOperatorParams params;
  OptimizerState optimizer;
  /// Canonical JSON of the run configuration; empty if unknown.
  std::string config_json;
};

/// Layout (all integers and floats little-endian):
///   magic[8] version:u8
///   step:u64
///   nparams:u32 { name_len:u32 name rank:u32 dims:u64[rank] values:f64[...] }
///   opt_step:u64 nslots:u32 { name_len:u32 name len:u64 m:f64[len] v:f64[len] }
///   config_len:u32 config
///   crc32:u32 over every preceding byte
std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws InputError on bad magic/version, truncation or checksum mismatch.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace niso
