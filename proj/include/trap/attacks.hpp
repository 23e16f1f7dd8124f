#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trap/gnn.hpp"
#include "trap/graph.hpp"
#include "trap/matrix.hpp"

namespace trap {

/// Value placed on the score diagonal so self-loops are never selected.
inline constexpr double kMaskedScore = -1.0e300;

struct SurrogateConfig {
  ModelConfig model;  // arch must be GCN
  TrainConfig train;
};

struct TrapOptions {
  /// Re-score after every flip instead of ranking one gradient once.
  bool sequential = false;
};

/// Candidate graphs, their flip lists, and the attack parameters that produced them.
struct PoisonPlan {
  std::string attack;
  std::size_t target = 0;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> candidate_ids;
  /// flips[i] belongs to candidate_ids[i]; pairs are (u, v) with u < v.
  std::vector<std::vector<NodePair>> flips;
  std::optional<ModelState> surrogate;
};

struct PoisonResult {
  std::vector<Graph> train;  // poisoned counterparts of split.poison_train_ids
  std::vector<Graph> test;   // poisoned counterparts of split.poison_test_ids
  PoisonPlan plan;
};

/// dL/dA of cross-entropy toward target on the surrogate; symmetric with zero diagonal.
Matrix attack_gradient(const ModelState& surrogate, const Graph& g, std::size_t target);

/// S = grad ⊙ (2A − 1) with the diagonal masked.
Matrix score_matrix(const Matrix& grad, const Matrix& adjacency);

/// The budget highest-scoring pairs u < v; ties by lexicographic (u, v).
std::vector<NodePair> select_perturbations(const Matrix& scores, std::size_t budget);

/// Gradient-guided trigger for one graph against a trained surrogate.
std::vector<NodePair> trap_trigger(const ModelState& surrogate, const Graph& g, std::size_t target,
                                   std::size_t budget, const TrapOptions& options = {});

/// Relabels every candidate to target, trains the surrogate on clean train plus the
/// relabeled poison-train half, then embeds a trigger into each candidate.
PoisonResult trap_poison(const Dataset& d, const SplitPlan& split, std::size_t target,
                         std::size_t budget, const SurrogateConfig& surrogate,
                         const TrapOptions& options = {});

/// Baseline: budget uniformly random distinct pairs per candidate.
PoisonResult random_flip_poison(const Dataset& d, const SplitPlan& split, std::size_t target,
                                std::size_t budget, std::uint64_t seed);

struct SubgraphTrigger {
  std::size_t size = 5;
  double density = 0.8;
  Matrix adjacency;
  std::uint64_t seed = 0;
};

/// Each of the size*(size-1)/2 pairs kept independently with probability density.
SubgraphTrigger er_subgraph_trigger(std::size_t size, double density, std::uint64_t seed);

/// Picks trigger.size distinct host nodes and overwrites their induced adjacency.
Graph implant_subgraph(const Graph& g, const SubgraphTrigger& trigger, std::uint64_t seed);

/// Baseline: one universal ER trigger implanted into every candidate.
PoisonResult subgraph_poison(const Dataset& d, const SplitPlan& split, std::size_t target,
                             const SubgraphTrigger& trigger, std::uint64_t seed);

}  // namespace trap
