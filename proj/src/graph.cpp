#include "trap/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "trap/rng.hpp"

namespace trap {

Graph::Graph(Matrix adjacency, Matrix features, std::size_t label, std::size_t id)
    : adjacency_(std::move(adjacency)), features_(std::move(features)), label_(label), id_(id) {
  const std::size_t n = adjacency_.rows();
  if (n == 0 || adjacency_.cols() != n) {
    throw ShapeError("Graph: adjacency must be square with n >= 1, got " +
                     shape_string(adjacency_));
  }
  if (features_.rows() != n || features_.cols() == 0) {
    throw ShapeError("Graph: features " + shape_string(features_) + " do not match " +
                     std::to_string(n) + " nodes");
  }
  for (std::size_t u = 0; u < n; ++u) {
    if (adjacency_(u, u) != 0.0) throw std::invalid_argument("Graph: self-loop at node " +
                                                             std::to_string(u));
    for (std::size_t v = u + 1; v < n; ++v) {
      const double a = adjacency_(u, v);
      if ((a != 0.0 && a != 1.0) || a != adjacency_(v, u)) {
        throw std::invalid_argument("Graph: adjacency not binary symmetric at (" +
                                    std::to_string(u) + "," + std::to_string(v) + ")");
      }
    }
  }
}

std::size_t Graph::num_edges() const {
  std::size_t count = 0;
  for (std::size_t u = 0; u < num_nodes(); ++u)
    for (std::size_t v = u + 1; v < num_nodes(); ++v) count += has_edge(u, v) ? 1 : 0;
  return count;
}

std::vector<NodePair> Graph::edges() const {
  std::vector<NodePair> out;
  for (std::size_t u = 0; u < num_nodes(); ++u)
    for (std::size_t v = u + 1; v < num_nodes(); ++v)
      if (has_edge(u, v)) out.emplace_back(u, v);
  return out;
}

Graph Graph::with_label(std::size_t label) const {
  Graph g = *this;
  g.label_ = label;
  return g;
}

Graph Graph::with_adjacency(Matrix adjacency) const {
  return Graph(std::move(adjacency), features_, label_, id_);
}

Graph flip_edges(const Graph& g, const std::vector<NodePair>& pairs) {
  Matrix a = g.adjacency();
  const std::size_t n = g.num_nodes();
  for (auto [u, v] : pairs) {
    if (u >= n || v >= n) throw std::out_of_range("flip_edge: node index out of range");
    if (u == v) throw std::invalid_argument("flip_edge: self-loop requested");
    const double toggled = 1.0 - a(u, v);
    a(u, v) = toggled;
    a(v, u) = toggled;
  }
  return g.with_adjacency(std::move(a));
}

Graph flip_edge(const Graph& g, std::size_t u, std::size_t v) { return flip_edges(g, {{u, v}}); }

std::size_t edit_distance(const Graph& a, const Graph& b) {
  if (a.num_nodes() != b.num_nodes()) throw ShapeError("edit_distance: node count mismatch");
  std::size_t diff = 0;
  for (std::size_t u = 0; u < a.num_nodes(); ++u)
    for (std::size_t v = u + 1; v < a.num_nodes(); ++v)
      diff += a.has_edge(u, v) != b.has_edge(u, v) ? 1 : 0;
  return diff;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& g : graphs) {
    if (g.label() >= num_classes) throw DataError("Dataset: label exceeds num_classes");
    ++counts[g.label()];
  }
  return counts;
}

void Dataset::validate() const {
  if (num_classes < 2) throw DataError("Dataset: need at least 2 classes");
  if (!raw_labels.empty() && raw_labels.size() != num_classes) {
    throw DataError("Dataset: raw label table does not match num_classes");
  }
  (void)class_counts();
}

std::size_t target_class(const Dataset& d) {
  const auto counts = d.class_counts();
  if (counts.size() < 2) throw DataError("target_class: need at least 2 classes");
  return static_cast<std::size_t>(std::min_element(counts.begin(), counts.end()) -
                                  counts.begin());
}

SplitPlan split(const Dataset& d, std::size_t target, std::uint64_t seed) {
  const std::size_t n = d.size();
  if (n < 10) throw DataError("split: need at least 10 graphs, have " + std::to_string(n));
  if (target >= d.num_classes) throw DataError("split: target class out of range");

  const std::size_t n_train = 7 * n / 10;
  const std::size_t n_test = 2 * n / 10;
  const std::size_t n_cand = n - n_train - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  SplitPlan plan;
  plan.seed = seed;
  plan.target = target;
  std::vector<std::size_t> rest;
  rest.reserve(n);
  for (std::size_t idx : order) {
    if (plan.candidate_ids.size() < n_cand && d.graphs[idx].label() != target) {
      plan.candidate_ids.push_back(idx);
    } else {
      rest.push_back(idx);
    }
  }
  if (plan.candidate_ids.size() < n_cand) {
    throw DataError("split: only " + std::to_string(plan.candidate_ids.size()) +
                    " non-target graphs, candidate pool needs " + std::to_string(n_cand));
  }
  plan.train_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.test_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());

  const std::size_t half = (n_cand + 1) / 2;
  plan.poison_train_ids.assign(plan.candidate_ids.begin(),
                               plan.candidate_ids.begin() + static_cast<std::ptrdiff_t>(half));
  plan.poison_test_ids.assign(plan.candidate_ids.begin() + static_cast<std::ptrdiff_t>(half),
                              plan.candidate_ids.end());
  return plan;
}

SynthSpec canonical_synth_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = {{12, 0.2, 60}, {12, 0.6, 60}};
  spec.feature_dim = 4;
  spec.seed = seed;
  return spec;
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.classes.size() < 2) throw std::invalid_argument("synth_dataset: need >= 2 classes");
  if (spec.feature_dim == 0) throw std::invalid_argument("synth_dataset: feature_dim must be >= 1");
  Dataset d;
  d.name = spec.name;
  d.num_classes = spec.classes.size();
  Rng rng(spec.seed);
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& cls = spec.classes[c];
    if (!(cls.edge_prob >= 0.0 && cls.edge_prob <= 1.0)) {
      throw std::invalid_argument("synth_dataset: edge_prob must be in [0,1]");
    }
    if (cls.n_nodes == 0) throw std::invalid_argument("synth_dataset: n_nodes must be >= 1");
    d.raw_labels.push_back(static_cast<long long>(c));
    for (std::size_t i = 0; i < cls.count; ++i) {
      Matrix a(cls.n_nodes, cls.n_nodes);
      for (std::size_t u = 0; u < cls.n_nodes; ++u)
        for (std::size_t v = u + 1; v < cls.n_nodes; ++v)
          if (rng.bernoulli(cls.edge_prob)) a(u, v) = a(v, u) = 1.0;
      Matrix x(cls.n_nodes, spec.feature_dim);
      for (double& f : x.values()) f = rng.normal();
      d.graphs.emplace_back(std::move(a), std::move(x), c, d.graphs.size());
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// TUDataset flat files

namespace {

struct LineReader {
  std::ifstream in;
  std::string file;
  std::size_t line_no = 0;

  LineReader(const std::filesystem::path& path) : in(path), file(path.filename().string()) {}

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(file + ":" + std::to_string(line_no) + ": " + what);
  }
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<long long> read_int_column(const std::filesystem::path& path) {
  LineReader reader(path);
  if (!reader.in) throw DataError("missing required file " + path.string());
  std::vector<long long> values;
  std::string line;
  while (reader.next(line)) {
    long long v;
    if (!parse_number(trim(line), v)) reader.fail("expected an integer, got '" + line + "'");
    values.push_back(v);
  }
  return values;
}

std::filesystem::path ds_file(const std::filesystem::path& dir, const std::string& name,
                              const char* suffix) {
  return dir / (name + suffix);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset load_tudataset(const std::filesystem::path& dir, const std::string& name) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("dataset directory not found: " + dir.string());
  }
  const auto indicator = read_int_column(ds_file(dir, name, "_graph_indicator.txt"));
  const auto raw_graph_labels = read_int_column(ds_file(dir, name, "_graph_labels.txt"));
  if (raw_graph_labels.empty()) {
    throw DataError(name + "_graph_labels.txt:1: empty graph label file");
  }
  const std::size_t num_graphs = raw_graph_labels.size();
  const std::size_t num_nodes = indicator.size();

  // Node k (0-based) belongs to graph indicator[k]-1 at local index local[k].
  std::vector<std::size_t> graph_of(num_nodes), local(num_nodes);
  std::vector<std::size_t> sizes(num_graphs, 0);
  for (std::size_t k = 0; k < num_nodes; ++k) {
    if (indicator[k] < 1 || static_cast<std::size_t>(indicator[k]) > num_graphs) {
      throw DataError(name + "_graph_indicator.txt:" + std::to_string(k + 1) + ": graph id " +
                      std::to_string(indicator[k]) + " outside 1.." + std::to_string(num_graphs));
    }
    graph_of[k] = static_cast<std::size_t>(indicator[k] - 1);
    local[k] = sizes[graph_of[k]]++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (sizes[g] == 0) {
      throw DataError(name + "_graph_labels.txt:" + std::to_string(g + 1) + ": graph " +
                      std::to_string(g + 1) + " has no nodes");
    }
  }

  std::vector<Matrix> adjacency;
  adjacency.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) adjacency.emplace_back(sizes[g], sizes[g]);

  // Directed entries seen, to verify symmetry after reading.
  std::set<NodePair> directed;
  {
    LineReader reader(ds_file(dir, name, "_A.txt"));
    if (!reader.in) throw DataError("missing required file " + ds_file(dir, name, "_A.txt").string());
    std::string line;
    while (reader.next(line)) {
      const auto parts = split_commas(line);
      long long i, j;
      if (parts.size() != 2 || !parse_number(parts[0], i) || !parse_number(parts[1], j)) {
        reader.fail("expected 'i, j', got '" + line + "'");
      }
      if (i < 1 || j < 1 || static_cast<std::size_t>(i) > num_nodes ||
          static_cast<std::size_t>(j) > num_nodes) {
        reader.fail("node index outside 1.." + std::to_string(num_nodes));
      }
      const auto u = static_cast<std::size_t>(i - 1), v = static_cast<std::size_t>(j - 1);
      if (u == v) reader.fail("self-loop on node " + std::to_string(i));
      if (graph_of[u] != graph_of[v]) reader.fail("edge crosses graphs");
      adjacency[graph_of[u]](local[u], local[v]) = 1.0;
      directed.emplace(u, v);
    }
    for (auto [u, v] : directed) {
      if (!directed.contains({v, u})) {
        throw DataError(name + "_A.txt: edge " + std::to_string(u + 1) + ", " +
                        std::to_string(v + 1) + " has no reverse entry");
      }
    }
  }

  // Features: attributes > one-hot node labels > constant 1.0.
  std::vector<Matrix> features;
  features.reserve(num_graphs);
  const auto attr_path = ds_file(dir, name, "_node_attributes.txt");
  const auto node_label_path = ds_file(dir, name, "_node_labels.txt");
  if (std::filesystem::exists(attr_path)) {
    LineReader reader(attr_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (reader.next(line)) {
      std::vector<double> row;
      for (auto tok : split_commas(line)) {
        double v;
        if (!parse_number(tok, v) || !std::isfinite(v)) {
          reader.fail("bad attribute '" + std::string(tok) + "'");
        }
        row.push_back(v);
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        reader.fail("attribute count differs from first line");
      }
      rows.push_back(std::move(row));
    }
    if (rows.size() != num_nodes) {
      throw DataError(attr_path.filename().string() + ": " + std::to_string(rows.size()) +
                      " rows for " + std::to_string(num_nodes) + " nodes");
    }
    const std::size_t dim = rows.front().size();
    for (std::size_t g = 0; g < num_graphs; ++g) features.emplace_back(sizes[g], dim);
    for (std::size_t k = 0; k < num_nodes; ++k)
      for (std::size_t c = 0; c < dim; ++c) features[graph_of[k]](local[k], c) = rows[k][c];
  } else if (std::filesystem::exists(node_label_path)) {
    const auto node_labels = read_int_column(node_label_path);
    if (node_labels.size() != num_nodes) {
      throw DataError(node_label_path.filename().string() + ": " +
                      std::to_string(node_labels.size()) + " rows for " +
                      std::to_string(num_nodes) + " nodes");
    }
    std::map<long long, std::size_t> dense;
    for (auto l : node_labels) dense.emplace(l, 0);
    std::size_t next = 0;
    for (auto& [raw, idx] : dense) idx = next++;
    for (std::size_t g = 0; g < num_graphs; ++g) features.emplace_back(sizes[g], dense.size());
    for (std::size_t k = 0; k < num_nodes; ++k) {
      features[graph_of[k]](local[k], dense.at(node_labels[k])) = 1.0;
    }
  } else {
    for (std::size_t g = 0; g < num_graphs; ++g) features.emplace_back(sizes[g], 1, 1.0);
  }

  Dataset d;
  d.name = name;
  std::map<long long, std::size_t> dense_labels;
  for (auto l : raw_graph_labels) dense_labels.emplace(l, 0);
  for (auto& [raw, idx] : dense_labels) {
    idx = d.raw_labels.size();
    d.raw_labels.push_back(raw);
  }
  d.num_classes = dense_labels.size();
  for (std::size_t g = 0; g < num_graphs; ++g) {
    d.graphs.emplace_back(std::move(adjacency[g]), std::move(features[g]),
                          dense_labels.at(raw_graph_labels[g]), g);
  }
  return d;
}

void save_tudataset(const Dataset& d, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream a(ds_file(dir, name, "_A.txt"));
  std::ofstream ind(ds_file(dir, name, "_graph_indicator.txt"));
  std::ofstream lab(ds_file(dir, name, "_graph_labels.txt"));
  std::ofstream attr(ds_file(dir, name, "_node_attributes.txt"));
  if (!a || !ind || !lab || !attr) throw DataError("cannot write dataset files under " + dir.string());

  std::size_t offset = 0;
  for (std::size_t gi = 0; gi < d.graphs.size(); ++gi) {
    const Graph& g = d.graphs[gi];
    const std::size_t n = g.num_nodes();
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (g.has_edge(u, v)) a << offset + u + 1 << ", " << offset + v + 1 << '\n';
    for (std::size_t u = 0; u < n; ++u) {
      ind << gi + 1 << '\n';
      auto row = g.features().row(u);
      for (std::size_t c = 0; c < row.size(); ++c) attr << (c ? ", " : "") << format_double(row[c]);
      attr << '\n';
    }
    const long long raw = d.raw_labels.empty() ? static_cast<long long>(g.label())
                                               : d.raw_labels.at(g.label());
    lab << raw << '\n';
    offset += n;
  }
}

}  // namespace trap
