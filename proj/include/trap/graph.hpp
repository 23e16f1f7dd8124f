#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trap/matrix.hpp"

namespace trap {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NodePair = std::pair<std::size_t, std::size_t>;

/// Simple undirected graph with node features and a class label.
///
/// The constructor enforces a binary, symmetric, zero-diagonal adjacency and
/// n >= 1, d >= 1. Graphs are immutable; edits return new graphs.
class Graph {
 public:
  Graph(Matrix adjacency, Matrix features, std::size_t label, std::size_t id = 0);

  const Matrix& adjacency() const { return adjacency_; }
  const Matrix& features() const { return features_; }
  std::size_t label() const { return label_; }
  std::size_t id() const { return id_; }
  std::size_t num_nodes() const { return adjacency_.rows(); }
  std::size_t feature_dim() const { return features_.cols(); }

  bool has_edge(std::size_t u, std::size_t v) const { return adjacency_(u, v) != 0.0; }
  std::size_t num_edges() const;
  /// Undirected edges as (u, v) with u < v, lexicographic order.
  std::vector<NodePair> edges() const;

  Graph with_label(std::size_t label) const;
  Graph with_adjacency(Matrix adjacency) const;

  bool operator==(const Graph& other) const = default;

 private:
  Matrix adjacency_;
  Matrix features_;
  std::size_t label_;
  std::size_t id_;
};

/// Toggles the undirected pair (u, v).
Graph flip_edge(const Graph& g, std::size_t u, std::size_t v);
Graph flip_edges(const Graph& g, const std::vector<NodePair>& pairs);

/// Number of unordered pairs whose adjacency status differs.
std::size_t edit_distance(const Graph& a, const Graph& b);

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t num_classes = 0;
  /// raw_labels[k] is the on-disk label of dense class k.
  std::vector<long long> raw_labels;

  std::vector<std::size_t> class_counts() const;
  std::size_t size() const { return graphs.size(); }
  /// Throws DataError if labels or counts are inconsistent.
  void validate() const;

  bool operator==(const Dataset& other) const = default;
};

/// Class with the fewest graphs; ties go to the smallest index.
std::size_t target_class(const Dataset& d);

struct SplitPlan {
  std::uint64_t seed = 0;
  std::size_t target = 0;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;
  std::vector<std::size_t> candidate_ids;
  std::vector<std::size_t> poison_train_ids;
  std::vector<std::size_t> poison_test_ids;
};

/// 70/20/10 train/test/candidate partition. Candidates are the first non-target
/// graphs of the shuffled order; the rest of the order fills train then test.
/// The candidate pool is halved into poison-train and poison-test.
SplitPlan split(const Dataset& d, std::size_t target, std::uint64_t seed);

/// Erdős–Rényi class description for synthetic datasets.
struct SynthClass {
  std::size_t n_nodes = 12;
  double edge_prob = 0.2;
  std::size_t count = 60;
};

struct SynthSpec {
  std::vector<SynthClass> classes;
  std::size_t feature_dim = 4;
  std::uint64_t seed = 0;
  std::string name = "SYNTH";
};

/// The desk-scale benchmark: 60 + 60 graphs of 12 nodes, densities 0.2 / 0.6, d = 4.
SynthSpec canonical_synth_spec(std::uint64_t seed = 0);
Dataset synth_dataset(const SynthSpec& spec);

/// Reads DS_A.txt, DS_graph_indicator.txt, DS_graph_labels.txt and the optional
/// DS_node_labels.txt / DS_node_attributes.txt from dir.
Dataset load_tudataset(const std::filesystem::path& dir, const std::string& name);

/// Writes the dataset in the same layout; features go to DS_node_attributes.txt
/// in shortest round-trip decimal form.
void save_tudataset(const Dataset& d, const std::filesystem::path& dir, const std::string& name);

}  // namespace trap
