#pragma once

#include <cstdint>
#include <string>

#include "g2t/model.hpp"

namespace g2t {

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  long long step = 0;
};

// Flat archive of named parameter arrays: per entry a name, shape header and
// 32-bit little-endian float payload, preceded by the metadata record.
// Saving truncates values to 32-bit; a save/load/save cycle is bit-exact.
void save_checkpoint(const std::string& path, const Model& model,
                     const CheckpointMeta& meta);

// Loads into an existing model; every stored entry must match a parameter
// name and shape.
CheckpointMeta load_checkpoint(const std::string& path, Model& model);

CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace g2t
