#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trap/graph.hpp"
#include "trap/harness.hpp"
#include "trap/serialize.hpp"

namespace trap {

struct Diagnostic {
  std::string path;  // dotted, e.g. "attack.budget"
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  ConfigError(std::string path, std::string message)
      : ConfigError(std::vector<Diagnostic>{{std::move(path), std::move(message)}}) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Every knob with its default; nulls are resolved per experiment by resolve_config.
json default_config();

/// Applies `key.path=value` overrides (value parsed as JSON, else taken as a string).
void apply_override(json& config, const std::string& assignment);

/// Merges config over the defaults, rejects unknown keys and out-of-range values
/// (all problems reported together), and fills every null with a concrete value.
json resolve_config(const json& config, const std::vector<std::string>& overrides = {});

ExperimentSettings settings_from_config(const json& resolved);
Dataset dataset_from_config(const json& resolved);

}  // namespace trap
