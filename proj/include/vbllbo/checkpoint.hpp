#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "vbllbo/surrogate.hpp"

namespace vbllbo {

/// Self-describing JSON checkpoint: layer dims, every parameter array, head
/// state (mean, precision factor, precision-mean, log noise), standardizer,
/// bounds and the hash of the config that produced the model. Doubles are
/// written in shortest round-trip form, so parameters restore bitwise.
nlohmann::json checkpoint_to_json(const SurrogateModel& model, std::uint64_t config_hash);
SurrogateModel checkpoint_from_json(const nlohmann::json& j, std::uint64_t* config_hash = nullptr);

void save_checkpoint(const std::string& path, const SurrogateModel& model, std::uint64_t config_hash);
SurrogateModel load_checkpoint(const std::string& path, std::uint64_t* config_hash = nullptr);

/// 64-bit FNV-1a, used for config hashes.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace vbllbo
