#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "trap/graph.hpp"

namespace testutil {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("trap_unit_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::filesystem::path fixture_dir() { return std::filesystem::path(TRAP_TEST_DATA_DIR) / "tiny"; }

inline trap::Graph path_graph(std::size_t n, std::size_t label = 0, std::size_t id = 0) {
  trap::Matrix a(n, n);
  for (std::size_t u = 0; u + 1 < n; ++u) a(u, u + 1) = a(u + 1, u) = 1.0;
  trap::Matrix x(n, 2);
  for (std::size_t u = 0; u < n; ++u) {
    x(u, 0) = 1.0;
    x(u, 1) = static_cast<double>(u) / static_cast<double>(n);
  }
  return trap::Graph(a, x, label, id);
}

/// Balanced two-class synthetic set with `per_class` graphs per class.
inline trap::Dataset small_synth(std::size_t per_class, std::uint64_t seed = 0) {
  trap::SynthSpec spec;
  spec.classes = {{8, 0.2, per_class}, {8, 0.6, per_class}};
  spec.feature_dim = 3;
  spec.seed = seed;
  return trap::synth_dataset(spec);
}

}  // namespace testutil
