#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "g2t/model.hpp"
#include "g2t/train.hpp"

namespace g2t {

using KvMap = std::map<std::string, std::string>;

// Plain-text "key = value" files; '#' starts a comment.
KvMap read_kv_file(const std::string& path);
void write_kv_file(const std::string& path, const KvMap& kv);

// Unknown keys are rejected; missing keys keep their defaults.
ModelConfig model_config_from_kv(const KvMap& kv);
TrainConfig train_config_from_kv(const KvMap& kv);
KvMap to_kv(const ModelConfig& mc, const TrainConfig& tc);

// Hash of the canonical (sorted) key=value listing; stored in checkpoints.
std::uint64_t config_hash(const KvMap& kv);
std::uint64_t config_hash(const ModelConfig& mc);

}  // namespace g2t
