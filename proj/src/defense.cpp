#include "trap/defense.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "trap/rng.hpp"

namespace trap {

void DefenseConfig::validate() const {
  if (!(subsample_ratio >= 0.0 && subsample_ratio <= 1.0)) {
    throw std::invalid_argument("DefenseConfig: subsample_ratio must be in [0,1]");
  }
  if (num_views == 0) throw std::invalid_argument("DefenseConfig: num_views must be >= 1");
}

Graph subsample_view(const Graph& g, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("subsample_view: ratio must be in [0,1]");
  }
  if (ratio == 0.0) return g;
  Matrix a = g.adjacency();
  Rng rng(seed);
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    for (std::size_t v = u + 1; v < g.num_nodes(); ++v) {
      if (a(u, v) != 0.0 && rng.bernoulli(ratio)) a(u, v) = a(v, u) = 0.0;
    }
  }
  return g.with_adjacency(std::move(a));
}

ModelState train_subsampled(std::span<const Graph> graphs, const ModelConfig& config,
                            const TrainConfig& tcfg, const DefenseConfig& dcfg) {
  dcfg.validate();
  const double ratio = dcfg.subsample_ratio;
  const std::uint64_t seed = dcfg.seed;
  return train(graphs, config, tcfg, [ratio, seed](const Graph& g, std::size_t epoch, std::size_t index) {
    return subsample_view(g, ratio, derive_seed(derive_seed(seed, Stream::kDefenseTrain, epoch), index));
  });
}

std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t num_classes) {
  if (votes.empty()) throw std::invalid_argument("majority_vote: no votes");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t v : votes) {
    if (v >= num_classes) throw std::out_of_range("majority_vote: label out of range");
    ++counts[v];
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::size_t predict_voted(const ModelState& state, const Graph& g, const DefenseConfig& dcfg) {
  dcfg.validate();
  std::vector<std::size_t> votes;
  votes.reserve(dcfg.num_views);
  const std::uint64_t graph_seed = derive_seed(dcfg.seed, Stream::kDefenseVote, g.id());
  for (std::size_t view = 0; view < dcfg.num_views; ++view) {
    votes.push_back(predict(state, subsample_view(g, dcfg.subsample_ratio, derive_seed(graph_seed, view))));
  }
  return majority_vote(votes, state.config.num_classes);
}

double accuracy_voted(const ModelState& state, std::span<const Graph> graphs,
                      const DefenseConfig& dcfg) {
  if (graphs.empty()) throw std::invalid_argument("accuracy_voted: empty evaluation set");
  std::size_t correct = 0;
  for (const auto& g : graphs) correct += predict_voted(state, g, dcfg) == g.label() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

}  // namespace trap
