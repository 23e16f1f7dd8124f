#include "trap/attacks.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "trap/rng.hpp"

namespace trap {

namespace {

std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

void check_candidates(const Dataset& d, const SplitPlan& split, std::size_t target) {
  if (split.target != target) {
    throw std::invalid_argument("poison: split was computed for target " +
                                std::to_string(split.target) + ", not " + std::to_string(target));
  }
  for (std::size_t id : split.candidate_ids) {
    if (id >= d.size()) throw std::out_of_range("poison: candidate id out of range");
    if (d.graphs[id].label() == target) {
      throw std::invalid_argument("poison: candidate " + std::to_string(id) +
                                  " already carries the target label");
    }
  }
}

/// Applies plan.flips to every candidate and routes the results into train/test halves.
PoisonResult assemble(const Dataset& d, const SplitPlan& split, PoisonPlan plan) {
  PoisonResult result;
  std::vector<Graph> poisoned;
  poisoned.reserve(plan.candidate_ids.size());
  for (std::size_t i = 0; i < plan.candidate_ids.size(); ++i) {
    const Graph& original = d.graphs[plan.candidate_ids[i]];
    poisoned.push_back(flip_edges(original, plan.flips[i]).with_label(plan.target));
  }
  auto lookup = [&](std::size_t id) -> const Graph& {
    const auto it = std::find(plan.candidate_ids.begin(), plan.candidate_ids.end(), id);
    if (it == plan.candidate_ids.end()) throw std::logic_error("poison: id missing from plan");
    return poisoned[static_cast<std::size_t>(it - plan.candidate_ids.begin())];
  };
  for (std::size_t id : split.poison_train_ids) result.train.push_back(lookup(id));
  for (std::size_t id : split.poison_test_ids) result.test.push_back(lookup(id));
  result.plan = std::move(plan);
  return result;
}

/// Candidates processed by an attack: the poison halves, in split order.
std::vector<std::size_t> attacked_ids(const SplitPlan& split) {
  std::vector<std::size_t> ids = split.poison_train_ids;
  ids.insert(ids.end(), split.poison_test_ids.begin(), split.poison_test_ids.end());
  return ids;
}

}  // namespace

Matrix attack_gradient(const ModelState& surrogate, const Graph& g, std::size_t target) {
  if (surrogate.config.arch != Arch::kGCN) {
    throw UnsupportedOperation("attack_gradient: surrogate must be GCN, got " +
                               arch_name(surrogate.config.arch));
  }
  const ForwardTrace trace = forward(surrogate, g);
  return *backward(surrogate, trace, target, true).adjacency;
}

Matrix score_matrix(const Matrix& grad, const Matrix& adjacency) {
  if (grad.rows() != adjacency.rows() || grad.cols() != adjacency.cols() ||
      grad.rows() != grad.cols()) {
    throw ShapeError("score_matrix: gradient " + shape_string(grad) + " vs adjacency " +
                     shape_string(adjacency));
  }
  Matrix scores(grad.rows(), grad.cols());
  for (std::size_t u = 0; u < grad.rows(); ++u) {
    for (std::size_t v = 0; v < grad.cols(); ++v) {
      scores(u, v) = u == v ? kMaskedScore : grad(u, v) * (2.0 * adjacency(u, v) - 1.0);
    }
  }
  return scores;
}

std::vector<NodePair> select_perturbations(const Matrix& scores, std::size_t budget) {
  if (scores.rows() != scores.cols()) throw ShapeError("select_perturbations: non-square scores");
  const std::size_t n = scores.rows();
  if (budget > pair_count(n)) {
    throw std::invalid_argument("select_perturbations: budget " + std::to_string(budget) +
                                " exceeds the " + std::to_string(pair_count(n)) +
                                " node pairs of a " + std::to_string(n) + "-node graph");
  }
  std::vector<NodePair> pairs;
  pairs.reserve(pair_count(n));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
  // Pairs are generated in lexicographic order, so a stable sort keeps that as the tie-break.
  std::stable_sort(pairs.begin(), pairs.end(), [&](const NodePair& a, const NodePair& b) {
    return scores(a.first, a.second) > scores(b.first, b.second);
  });
  pairs.resize(budget);
  return pairs;
}

std::vector<NodePair> trap_trigger(const ModelState& surrogate, const Graph& g, std::size_t target,
                                   std::size_t budget, const TrapOptions& options) {
  if (!options.sequential) {
    const Matrix grad = attack_gradient(surrogate, g, target);
    auto pairs = select_perturbations(score_matrix(grad, g.adjacency()), budget);
    std::sort(pairs.begin(), pairs.end());
    return pairs;
  }

  if (budget > pair_count(g.num_nodes())) {
    throw std::invalid_argument("trap_trigger: budget exceeds node pairs");
  }
  std::vector<NodePair> chosen;
  Graph current = g;
  for (std::size_t step = 0; step < budget; ++step) {
    Matrix scores = score_matrix(attack_gradient(surrogate, current, target), current.adjacency());
    // A pair is toggled at most once.
    for (auto [u, v] : chosen) scores(u, v) = scores(v, u) = kMaskedScore;
    const auto best = select_perturbations(scores, 1).front();
    chosen.push_back(best);
    current = flip_edge(current, best.first, best.second);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

PoisonResult trap_poison(const Dataset& d, const SplitPlan& split, std::size_t target,
                         std::size_t budget, const SurrogateConfig& surrogate,
                         const TrapOptions& options) {
  check_candidates(d, split, target);
  if (surrogate.model.arch != Arch::kGCN) {
    throw UnsupportedOperation("trap_poison: surrogate must be GCN");
  }

  std::vector<Graph> training;
  training.reserve(split.train_ids.size() + split.poison_train_ids.size());
  for (std::size_t id : split.train_ids) training.push_back(d.graphs[id]);
  for (std::size_t id : split.poison_train_ids) training.push_back(d.graphs[id].with_label(target));
  ModelState model = train(training, surrogate.model, surrogate.train);

  PoisonPlan plan;
  plan.attack = "trap";
  plan.target = target;
  plan.budget = budget;
  plan.seed = surrogate.train.seed;
  plan.candidate_ids = attacked_ids(split);
  for (std::size_t id : plan.candidate_ids) {
    const Graph relabeled = d.graphs[id].with_label(target);
    plan.flips.push_back(trap_trigger(model, relabeled, target, budget, options));
  }
  plan.surrogate = std::move(model);
  return assemble(d, split, std::move(plan));
}

PoisonResult random_flip_poison(const Dataset& d, const SplitPlan& split, std::size_t target,
                                std::size_t budget, std::uint64_t seed) {
  check_candidates(d, split, target);
  PoisonPlan plan;
  plan.attack = "random";
  plan.target = target;
  plan.budget = budget;
  plan.seed = seed;
  plan.candidate_ids = attacked_ids(split);
  for (std::size_t id : plan.candidate_ids) {
    const std::size_t n = d.graphs[id].num_nodes();
    if (budget > pair_count(n)) {
      throw std::invalid_argument("random_flip_poison: budget exceeds node pairs of graph " +
                                  std::to_string(id));
    }
    std::vector<NodePair> pairs;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
    Rng rng(derive_seed(seed, Stream::kAttack, id));
    // Partial Fisher-Yates: the first budget slots are a uniform sample without replacement.
    for (std::size_t i = 0; i < budget; ++i) {
      std::swap(pairs[i], pairs[i + rng.below(pairs.size() - i)]);
    }
    pairs.resize(budget);
    std::sort(pairs.begin(), pairs.end());
    plan.flips.push_back(std::move(pairs));
  }
  return assemble(d, split, std::move(plan));
}

SubgraphTrigger er_subgraph_trigger(std::size_t size, double density, std::uint64_t seed) {
  if (size < 2) throw std::invalid_argument("er_subgraph_trigger: size must be >= 2");
  if (!(density >= 0.0 && density <= 1.0)) {
    throw std::invalid_argument("er_subgraph_trigger: density must be in [0,1]");
  }
  SubgraphTrigger trigger{size, density, Matrix(size, size), seed};
  Rng rng(seed);
  for (std::size_t u = 0; u < size; ++u)
    for (std::size_t v = u + 1; v < size; ++v)
      if (rng.bernoulli(density)) trigger.adjacency(u, v) = trigger.adjacency(v, u) = 1.0;
  return trigger;
}

Graph implant_subgraph(const Graph& g, const SubgraphTrigger& trigger, std::uint64_t seed) {
  const std::size_t t = trigger.adjacency.rows();
  if (g.num_nodes() < t) {
    throw std::invalid_argument("implant_subgraph: graph has " + std::to_string(g.num_nodes()) +
                                " nodes, trigger needs " + std::to_string(t));
  }
  std::vector<std::size_t> nodes(g.num_nodes());
  std::iota(nodes.begin(), nodes.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < t; ++i) std::swap(nodes[i], nodes[i + rng.below(nodes.size() - i)]);

  Matrix a = g.adjacency();
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = i + 1; j < t; ++j) {
      a(nodes[i], nodes[j]) = a(nodes[j], nodes[i]) = trigger.adjacency(i, j);
    }
  }
  return g.with_adjacency(std::move(a));
}

PoisonResult subgraph_poison(const Dataset& d, const SplitPlan& split, std::size_t target,
                             const SubgraphTrigger& trigger, std::uint64_t seed) {
  check_candidates(d, split, target);
  PoisonPlan plan;
  plan.attack = "subgraph";
  plan.target = target;
  plan.budget = 0;
  plan.seed = seed;
  plan.candidate_ids = attacked_ids(split);
  for (std::size_t id : plan.candidate_ids) {
    const Graph& original = d.graphs[id];
    const Graph implanted = implant_subgraph(original, trigger, derive_seed(seed, Stream::kAttack, id));
    std::vector<NodePair> diff;
    for (std::size_t u = 0; u < original.num_nodes(); ++u)
      for (std::size_t v = u + 1; v < original.num_nodes(); ++v)
        if (original.has_edge(u, v) != implanted.has_edge(u, v)) diff.emplace_back(u, v);
    plan.budget = std::max(plan.budget, diff.size());
    plan.flips.push_back(std::move(diff));
  }
  return assemble(d, split, std::move(plan));
}

}  // namespace trap
