#pragma once

#include <filesystem>
#include <stdexcept>

#include "atlas/model.hpp"

namespace atlas {

class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig config;
  long long step = 0;
  ParamVector params;
};

/// Binary checkpoint: magic, version, JSON config block, segment table,
/// little-endian float32 payload, trailing CRC-32. Parameters are quantized
/// to float32 on save; values already representable round-trip bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace atlas
