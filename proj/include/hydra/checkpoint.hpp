#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hydra/controller.hpp"

namespace hydra {

struct Checkpoint {
  QNet net;
  int n_samples = 5;
  std::uint64_t seed = 0;
};

/// {format_version, layer_dims, n_samples, seed, weights, biases}; weights
/// are nested row-major arrays.
nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ConfigError("checkpoint incompatible: ...") on any dimension or
/// version mismatch.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hydra
