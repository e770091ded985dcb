#pragma once

// Checkpoints: <stem>.json (architecture, step, free-form metadata) next to
// <stem>.bin (parameters as little-endian float64, no header).

#include <filesystem>
#include <string>

#include "vcnf/flow.hpp"
#include <json.hpp>

namespace vcnf {

struct Checkpoint {
  FlowModel model;
  int step = 0;
  nlohmann::json meta;
};

nlohmann::json architecture_to_json(const Architecture& a);
Architecture architecture_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& stem, const FlowModel& m, int step,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Throws DecodeError on missing files, size mismatch or non-finite values.
Checkpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace vcnf
