#include "trap/gnn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "trap/rng.hpp"

namespace trap {

namespace {

constexpr double kLeakySlope = 0.2;

std::size_t layer_input_dim(const ModelConfig& cfg, std::size_t layer) {
  return layer == 0 ? cfg.input_dim : cfg.layer_widths[layer - 1];
}

void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
}

std::vector<Matrix> param_shapes(const ModelConfig& cfg) {
  std::vector<Matrix> shapes;
  for (std::size_t l = 0; l < cfg.layer_widths.size(); ++l) {
    const std::size_t in = layer_input_dim(cfg, l);
    const std::size_t out = cfg.layer_widths[l];
    switch (cfg.arch) {
      case Arch::kGCN:
      case Arch::kGIN:
        shapes.emplace_back(in, out);
        break;
      case Arch::kGSAGE:
        shapes.emplace_back(2 * in, out);
        break;
      case Arch::kGAT:
        for (std::size_t h = 0; h < cfg.gat_heads; ++h) {
          shapes.emplace_back(in, out);
          shapes.emplace_back(out, 1);
          shapes.emplace_back(out, 1);
        }
        shapes.emplace_back(cfg.gat_heads * out, out);
        break;
    }
  }
  shapes.emplace_back(cfg.layer_widths.back(), cfg.num_classes);
  shapes.emplace_back(1, cfg.num_classes);
  return shapes;
}

Matrix add_self_loops(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += 1.0;
  return out;
}

/// D^{-1} A with isolated rows left at zero.
Matrix row_normalize(const Matrix& a) {
  Matrix out = a;
  for (std::size_t u = 0; u < a.rows(); ++u) {
    double deg = 0.0;
    for (double v : a.row(u)) deg += v;
    if (deg > 0.0)
      for (double& v : out.row(u)) v /= deg;
  }
  return out;
}

void gat_head_forward(const Matrix& mask, const Matrix& values, const Matrix& a_src,
                      const Matrix& a_dst, Matrix& scores, Matrix& attention) {
  const std::size_t n = values.rows();
  const Matrix f = matmul(values, a_src);  // n x 1
  const Matrix g = matmul(values, a_dst);
  scores = Matrix(n, n);
  attention = Matrix(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < n; ++v) {
      if (mask(u, v) == 0.0) continue;
      const double s = f(u, 0) + g(v, 0);
      scores(u, v) = s;
      mx = std::max(mx, s > 0.0 ? s : kLeakySlope * s);
    }
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (mask(u, v) == 0.0) continue;
      const double s = scores(u, v);
      const double e = std::exp((s > 0.0 ? s : kLeakySlope * s) - mx);
      attention(u, v) = e;
      total += e;
    }
    for (double& x : attention.row(u)) x /= total;
  }
}

/// dL/dA through D^{-1/2}(A+I)D^{-1/2}, given dL/d(normalized) and A + I.
Matrix normalization_backward(const Matrix& d_norm, const Matrix& a_tilde) {
  const std::size_t n = a_tilde.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t u = 0; u < n; ++u) {
    double deg = 0.0;
    for (double v : a_tilde.row(u)) deg += v;
    inv_sqrt[u] = 1.0 / std::sqrt(deg);
  }
  // Each degree term touches the whole row u with the same correction.
  std::vector<double> row_term(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    double c = 0.0;
    for (std::size_t q = 0; q < n; ++q) c += (d_norm(u, q) + d_norm(q, u)) * a_tilde(u, q) * inv_sqrt[q];
    row_term[u] = 0.5 * inv_sqrt[u] * inv_sqrt[u] * inv_sqrt[u] * c;
  }
  Matrix grad(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      grad(u, v) = d_norm(u, v) * inv_sqrt[u] * inv_sqrt[v] - row_term[u];

  Matrix sym(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      sym(u, v) = u == v ? 0.0 : 0.5 * (grad(u, v) + grad(v, u));
  return sym;
}

}  // namespace

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::kGCN: return "GCN";
    case Arch::kGIN: return "GIN";
    case Arch::kGSAGE: return "GSAGE";
    case Arch::kGAT: return "GAT";
  }
  return "?";
}

Arch parse_arch(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "GCN") return Arch::kGCN;
  if (upper == "GIN") return Arch::kGIN;
  if (upper == "GSAGE" || upper == "GRAPHSAGE") return Arch::kGSAGE;
  if (upper == "GAT") return Arch::kGAT;
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
  if (layer_widths.empty()) throw std::invalid_argument("ModelConfig: need at least one layer");
  for (auto w : layer_widths)
    if (w == 0) throw std::invalid_argument("ModelConfig: layer widths must be >= 1");
  if (arch == Arch::kGAT && gat_heads == 0) throw std::invalid_argument("ModelConfig: gat_heads must be >= 1");
  if (input_dim == 0) throw std::invalid_argument("ModelConfig: input_dim must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: betas must be in [0,1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("TrainConfig: eps must be > 0");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
}

std::size_t params_per_layer(const ModelConfig& config) {
  return config.arch == Arch::kGAT ? 3 * config.gat_heads + 1 : 1;
}

ModelState zero_model(const ModelConfig& config) {
  config.validate();
  return ModelState{config, param_shapes(config)};
}

ModelState init_model(const ModelConfig& config, std::uint64_t seed) {
  ModelState state = zero_model(config);
  Rng rng(seed);
  // Leave the trailing bias at zero.
  for (std::size_t i = 0; i + 1 < state.params.size(); ++i) {
    Matrix& p = state.params[i];
    glorot_fill(p, p.rows(), p.cols(), rng);
  }
  return state;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("normalize_adjacency: non-square input");
  const Matrix a_tilde = add_self_loops(adjacency);
  const std::size_t n = a_tilde.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t u = 0; u < n; ++u) {
    double deg = 0.0;
    for (double v : a_tilde.row(u)) deg += v;
    inv_sqrt[u] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) out(u, v) = a_tilde(u, v) * inv_sqrt[u] * inv_sqrt[v];
  return out;
}

ForwardTrace forward(const ModelState& state, const Matrix& adjacency, const Matrix& features) {
  const ModelConfig& cfg = state.config;
  if (features.cols() != cfg.input_dim) {
    throw ShapeError("forward: features have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(cfg.input_dim));
  }
  if (adjacency.rows() != features.rows() || adjacency.cols() != features.rows()) {
    throw ShapeError("forward: adjacency " + shape_string(adjacency) + " vs features " +
                     shape_string(features));
  }

  ForwardTrace trace;
  trace.arch = cfg.arch;
  trace.adjacency = adjacency;
  switch (cfg.arch) {
    case Arch::kGCN: trace.propagator = normalize_adjacency(adjacency); break;
    case Arch::kGIN:
    case Arch::kGAT: trace.propagator = add_self_loops(adjacency); break;
    case Arch::kGSAGE: trace.propagator = row_normalize(adjacency); break;
  }

  const std::size_t per_layer = params_per_layer(cfg);
  Matrix z = features;
  for (std::size_t l = 0; l < cfg.layer_widths.size(); ++l) {
    const Matrix* p = &state.params[l * per_layer];
    LayerTrace lt;
    lt.input = z;
    switch (cfg.arch) {
      case Arch::kGCN:
      case Arch::kGIN:
        lt.aggregated = matmul(trace.propagator, z);
        lt.pre = matmul(lt.aggregated, p[0]);
        break;
      case Arch::kGSAGE: {
        const Matrix parts[2] = {z, matmul(trace.propagator, z)};
        lt.aggregated = hconcat(parts);
        lt.pre = matmul(lt.aggregated, p[0]);
        break;
      }
      case Arch::kGAT: {
        const std::size_t heads = cfg.gat_heads;
        std::vector<Matrix> mixed;
        for (std::size_t h = 0; h < heads; ++h) {
          Matrix values = matmul(z, p[3 * h]);
          Matrix scores, attention;
          gat_head_forward(trace.propagator, values, p[3 * h + 1], p[3 * h + 2], scores, attention);
          mixed.push_back(matmul(attention, values));
          lt.head_values.push_back(std::move(values));
          lt.head_scores.push_back(std::move(scores));
          lt.head_attention.push_back(std::move(attention));
        }
        lt.head_concat = hconcat(mixed);
        lt.pre = matmul(lt.head_concat, p[3 * heads]);
        break;
      }
    }
    lt.output = relu(lt.pre);
    z = lt.output;
    trace.layers.push_back(std::move(lt));
  }

  PoolResult pool = row_max_pool(z);
  trace.pooled = std::move(pool.pooled);
  trace.pool_argmax = std::move(pool.argmax);
  trace.logits = matmul(trace.pooled, state.classifier_weight()) + state.classifier_bias();
  return trace;
}

ForwardTrace forward(const ModelState& state, const Graph& g) {
  return forward(state, g.adjacency(), g.features());
}

Gradients backward_from_logits(const ModelState& state, const ForwardTrace& trace,
                               const Matrix& dlogits, bool want_adjacency_grad) {
  const ModelConfig& cfg = state.config;
  if (want_adjacency_grad && cfg.arch != Arch::kGCN) {
    throw UnsupportedOperation("adjacency gradient is only available for GCN, not " +
                               arch_name(cfg.arch));
  }
  if (dlogits.rows() != 1 || dlogits.cols() != cfg.num_classes) {
    throw ShapeError("backward: dlogits " + shape_string(dlogits));
  }

  Gradients grads;
  grads.params.reserve(state.params.size());
  for (const auto& p : state.params) grads.params.emplace_back(p.rows(), p.cols());
  const std::size_t n_params = state.params.size();

  grads.params[n_params - 2] = matmul_tn(trace.pooled, dlogits);
  grads.params[n_params - 1] = dlogits;
  const Matrix dpooled = matmul_nt(dlogits, state.classifier_weight());

  const std::size_t n = trace.adjacency.rows();
  Matrix dz(n, cfg.layer_widths.back());
  for (std::size_t c = 0; c < dz.cols(); ++c) dz(trace.pool_argmax[c], c) = dpooled(0, c);

  Matrix d_prop(n, n);
  const std::size_t per_layer = params_per_layer(cfg);
  for (std::size_t l = cfg.layer_widths.size(); l-- > 0;) {
    const LayerTrace& lt = trace.layers[l];
    const Matrix* p = &state.params[l * per_layer];
    Matrix* gp = &grads.params[l * per_layer];
    const Matrix dpre = relu_backward(dz, lt.pre);
    const bool need_input_grad = l > 0;

    switch (cfg.arch) {
      case Arch::kGCN:
      case Arch::kGIN: {
        gp[0] = matmul_tn(lt.aggregated, dpre);
        const Matrix dagg = matmul_nt(dpre, p[0]);
        if (want_adjacency_grad) d_prop += matmul_nt(dagg, lt.input);
        // The propagator is symmetric for both GCN and GIN.
        if (need_input_grad) dz = matmul(trace.propagator, dagg);
        break;
      }
      case Arch::kGSAGE: {
        gp[0] = matmul_tn(lt.aggregated, dpre);
        if (need_input_grad) {
          const Matrix dagg = matmul_nt(dpre, p[0]);
          const std::size_t in = lt.input.cols();
          dz = column_block(dagg, 0, in) + matmul_tn(trace.propagator, column_block(dagg, in, in));
        }
        break;
      }
      case Arch::kGAT: {
        const std::size_t heads = cfg.gat_heads;
        const std::size_t out = cfg.layer_widths[l];
        gp[3 * heads] = matmul_tn(lt.head_concat, dpre);
        const Matrix dconcat = matmul_nt(dpre, p[3 * heads]);
        Matrix dinput(n, lt.input.cols());
        for (std::size_t h = 0; h < heads; ++h) {
          const Matrix& values = lt.head_values[h];
          const Matrix& alpha = lt.head_attention[h];
          const Matrix& scores = lt.head_scores[h];
          const Matrix dmixed = column_block(dconcat, h * out, out);
          Matrix dvalues = matmul_tn(alpha, dmixed);
          const Matrix dalpha = matmul_nt(dmixed, values);
          Matrix df(n, 1), dg(n, 1);
          for (std::size_t u = 0; u < n; ++u) {
            double dot = 0.0;
            for (std::size_t v = 0; v < n; ++v) dot += alpha(u, v) * dalpha(u, v);
            for (std::size_t v = 0; v < n; ++v) {
              if (trace.propagator(u, v) == 0.0) continue;
              const double de = alpha(u, v) * (dalpha(u, v) - dot);
              const double ds = de * (scores(u, v) > 0.0 ? 1.0 : kLeakySlope);
              df(u, 0) += ds;
              dg(v, 0) += ds;
            }
          }
          gp[3 * h + 1] = matmul_tn(values, df);
          gp[3 * h + 2] = matmul_tn(values, dg);
          dvalues += matmul_nt(df, p[3 * h + 1]);
          dvalues += matmul_nt(dg, p[3 * h + 2]);
          gp[3 * h] = matmul_tn(lt.input, dvalues);
          if (need_input_grad) dinput += matmul_nt(dvalues, p[3 * h]);
        }
        if (need_input_grad) dz = std::move(dinput);
        break;
      }
    }
  }

  if (want_adjacency_grad) {
    grads.adjacency = normalization_backward(d_prop, add_self_loops(trace.adjacency));
  }
  return grads;
}

Gradients backward(const ModelState& state, const ForwardTrace& trace, std::size_t label,
                   bool want_adjacency_grad) {
  LossResult loss = softmax_cross_entropy(trace.logits, label);
  Gradients grads = backward_from_logits(state, trace, loss.dlogits, want_adjacency_grad);
  grads.loss = loss.loss;
  return grads;
}

AdamState init_adam(const ModelState& state) {
  AdamState opt;
  for (const auto& p : state.params) {
    opt.m.emplace_back(p.rows(), p.cols());
    opt.v.emplace_back(p.rows(), p.cols());
  }
  return opt;
}

void adam_step(ModelState& state, std::span<const Matrix> grads, AdamState& opt, std::size_t t,
               const TrainConfig& tcfg) {
  if (t == 0) throw std::invalid_argument("adam_step: t must be >= 1");
  if (grads.size() != state.params.size() || opt.m.size() != state.params.size()) {
    throw ShapeError("adam_step: gradient/parameter count mismatch");
  }
  const double bc1 = 1.0 - std::pow(tcfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(tcfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    auto theta = state.params[i].values();
    auto g = grads[i].values();
    auto m = opt.m[i].values();
    auto v = opt.v[i].values();
    if (g.size() != theta.size()) throw ShapeError("adam_step: gradient shape mismatch");
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double grad = g[k] + tcfg.weight_decay * theta[k];
      m[k] = tcfg.beta1 * m[k] + (1.0 - tcfg.beta1) * grad;
      v[k] = tcfg.beta2 * v[k] + (1.0 - tcfg.beta2) * grad * grad;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      theta[k] -= tcfg.lr * m_hat / (std::sqrt(v_hat) + tcfg.eps);
    }
  }
  opt.t = t;
}

ModelState train(std::span<const Graph> graphs, const ModelConfig& config,
                 const TrainConfig& tcfg, const EpochView& view) {
  if (graphs.empty()) throw std::invalid_argument("train: empty training set");
  tcfg.validate();
  ModelState state = init_model(config, derive_seed(tcfg.seed, Stream::kModelInit));
  AdamState opt = init_adam(state);
  Rng shuffle_rng(derive_seed(tcfg.seed, Stream::kBatchShuffle));

  std::vector<std::size_t> order(graphs.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tcfg.batch_size);
      std::vector<Matrix> sum;
      for (const auto& p : state.params) sum.emplace_back(p.rows(), p.cols());
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        const Graph& g = graphs[idx];
        Gradients grads;
        if (view) {
          const Graph seen = view(g, epoch, idx);
          grads = backward(state, forward(state, seen), seen.label(), false);
        } else {
          grads = backward(state, forward(state, g), g.label(), false);
        }
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += grads.params[k];
      }
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (auto& s : sum) s *= scale;
      adam_step(state, sum, opt, ++step, tcfg);
    }
  }
  return state;
}

std::size_t argmax(const Matrix& logits) {
  auto v = logits.values();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::size_t predict(const ModelState& state, const Graph& g) {
  return argmax(forward(state, g).logits);
}

double accuracy(const ModelState& state, std::span<const Graph> graphs) {
  if (graphs.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
  std::size_t correct = 0;
  for (const auto& g : graphs) correct += predict(state, g) == g.label() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

}  // namespace trap
