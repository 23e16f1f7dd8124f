#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "trap/attacks.hpp"
#include "trap/gnn.hpp"
#include "trap/graph.hpp"
#include "trap/matrix.hpp"

namespace trap {

using json = nlohmann::json;

/// {"rows", "cols", "f64le"}: values as hex of their little-endian IEEE-754 bytes.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const json& j);

/// Self-describing checkpoint: format tag, config, parameter shapes and bit-exact values.
json checkpoint_to_json(const ModelState& state);
ModelState checkpoint_from_json(const json& j);
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

/// {y_t, M, seed, attack, surrogate_checkpoint, graphs: [{id, flips: [[u, v], ...]}]}
json plan_to_json(const PoisonPlan& plan, const std::string& surrogate_checkpoint = "");
PoisonPlan plan_from_json(const json& j);

/// Binary-mode file write; parent directories are created. Throws on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_number(double v);

}  // namespace trap
