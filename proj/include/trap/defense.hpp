#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "trap/gnn.hpp"
#include "trap/graph.hpp"

namespace trap {

struct DefenseConfig {
  double subsample_ratio = 0.10;  // fraction of edges removed per view
  std::size_t num_views = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Drops each undirected edge independently with probability ratio.
Graph subsample_view(const Graph& g, double ratio, std::uint64_t seed);

/// gnn::train with every graph replaced by a fresh subsampled view each epoch.
ModelState train_subsampled(std::span<const Graph> graphs, const ModelConfig& config,
                            const TrainConfig& tcfg, const DefenseConfig& dcfg);

/// Majority label over num_views subsampled views; ties go to the smallest label.
std::size_t predict_voted(const ModelState& state, const Graph& g, const DefenseConfig& dcfg);

/// Majority over a vote vector; ties go to the smallest label.
std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t num_classes);

double accuracy_voted(const ModelState& state, std::span<const Graph> graphs,
                      const DefenseConfig& dcfg);

}  // namespace trap
