#pragma once

#include "mnca/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mnca {

inline constexpr int kCheckpointVersion = 1;

enum class CheckpointErrc { Io = 1, Version, Length, Corrupt, Inventory };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CheckpointErrc code() const { return code_; }

 private:
  CheckpointErrc code_;
};

struct Checkpoint {
  Model<float> model;
  nlohmann::json config;  // snapshot of the experiment config, may be null
  long long training_steps = 0;
  std::uint64_t seed = 0;
};

/// Writes `path` (JSON manifest) and `path + ".bin"` (little-endian float32
/// weights in Model::visit order).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Reads a checkpoint, checking version, inventory and blob length.
Checkpoint load_checkpoint(const std::string& path);

/// Loads into `model`; the stored shape must equal model.shape.
Checkpoint load_checkpoint(const std::string& path, Model<float>& model);

nlohmann::json shape_to_json(const ModelShape& shape);
ModelShape shape_from_json(const nlohmann::json& j);

}  // namespace mnca
