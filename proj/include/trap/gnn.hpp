#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trap/graph.hpp"
#include "trap/matrix.hpp"

namespace trap {

enum class Arch { kGCN, kGIN, kGSAGE, kGAT };

std::string arch_name(Arch arch);
/// Accepts GCN / GIN / GSAGE / GAT (case-insensitive); throws std::invalid_argument otherwise.
Arch parse_arch(const std::string& name);

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ModelConfig {
  Arch arch = Arch::kGCN;
  std::vector<std::size_t> layer_widths{16, 8};
  std::size_t gat_heads = 3;  // GAT only
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double lr = 0.02;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 100;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Flat parameter list. Per layer:
///   GCN, GIN: W (in x out)
///   GSAGE:    W (2*in x out), rows [0,in) act on self, [in,2in) on the neighbor mean
///   GAT:      per head {W_h (in x out), a_src (out x 1), a_dst (out x 1)}, then P (heads*out x out)
/// followed by the classifier weight (width_L x K) and bias (1 x K).
struct ModelState {
  ModelConfig config;
  std::vector<Matrix> params;

  const Matrix& classifier_weight() const { return params[params.size() - 2]; }
  const Matrix& classifier_bias() const { return params.back(); }

  bool operator==(const ModelState&) const = default;
};

/// Number of parameter matrices one layer of this architecture owns.
std::size_t params_per_layer(const ModelConfig& config);

/// Glorot-uniform weights, zero bias.
ModelState init_model(const ModelConfig& config, std::uint64_t seed);
/// Same shapes as init_model, every entry zero.
ModelState zero_model(const ModelConfig& config);

/// D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I.
Matrix normalize_adjacency(const Matrix& adjacency);

struct LayerTrace {
  Matrix input;       // Z^(l-1)
  Matrix aggregated;  // propagated input before the weight (GCN/GIN/GSAGE)
  Matrix pre;         // pre-activation
  Matrix output;      // ReLU(pre)
  // GAT only, one entry per head.
  std::vector<Matrix> head_values;     // Z W_h
  std::vector<Matrix> head_attention;  // row-stochastic alpha over neighbors + self
  std::vector<Matrix> head_scores;     // pre-LeakyReLU scores
  Matrix head_concat;                  // [alpha_1 Y_1 | ... | alpha_H Y_H]
};

struct ForwardTrace {
  Arch arch = Arch::kGCN;
  Matrix adjacency;   // raw A as given
  Matrix propagator;  // GCN: normalized A; GIN: A + I; GSAGE: row-normalized A; GAT: A + I mask
  std::vector<LayerTrace> layers;
  std::vector<std::size_t> pool_argmax;
  Matrix pooled;
  Matrix logits;
};

/// The adjacency may be any symmetric non-negative matrix with zero diagonal;
/// fractional entries are allowed so gradients can be checked numerically.
ForwardTrace forward(const ModelState& state, const Matrix& adjacency, const Matrix& features);
ForwardTrace forward(const ModelState& state, const Graph& g);

struct Gradients {
  double loss = 0.0;
  std::vector<Matrix> params;       // same layout as ModelState::params
  std::optional<Matrix> adjacency;  // symmetrized dL/dA with zero diagonal (GCN only)
};

/// Reverse pass from an arbitrary upstream dL/dlogits; loss is left at 0.
Gradients backward_from_logits(const ModelState& state, const ForwardTrace& trace,
                               const Matrix& dlogits, bool want_adjacency_grad);
/// Cross-entropy against label, then the reverse pass.
Gradients backward(const ModelState& state, const ForwardTrace& trace, std::size_t label,
                   bool want_adjacency_grad);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t t = 0;
};

AdamState init_adam(const ModelState& state);
/// One Adam update with bias correction; weight_decay * theta is added to the gradient.
/// t is the 1-based step count.
void adam_step(ModelState& state, std::span<const Matrix> grads, AdamState& opt, std::size_t t,
               const TrainConfig& tcfg);

/// Optional per-epoch replacement of a training graph (used by the subsampling defense).
using EpochView = std::function<Graph(const Graph& g, std::size_t epoch, std::size_t index)>;

/// Mini-batch Adam on mean cross-entropy. Initialization and shuffling seeds
/// are derived from tcfg.seed.
ModelState train(std::span<const Graph> graphs, const ModelConfig& config,
                 const TrainConfig& tcfg, const EpochView& view = {});

std::size_t argmax(const Matrix& logits);
std::size_t predict(const ModelState& state, const Graph& g);
double accuracy(const ModelState& state, std::span<const Graph> graphs);

}  // namespace trap
