#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "trap/gnn.hpp"

using trap::Arch;
using trap::Matrix;
using trap::ModelConfig;

namespace {

ModelConfig config(Arch arch, std::size_t d = 2, std::size_t k = 2) {
  ModelConfig c;
  c.arch = arch;
  c.layer_widths = {4, 3};
  c.gat_heads = 2;
  c.input_dim = d;
  c.num_classes = k;
  return c;
}

constexpr Arch kArchs[] = {Arch::kGCN, Arch::kGIN, Arch::kGSAGE, Arch::kGAT};

}  // namespace

TEST_SUITE("gnn") {

TEST_CASE("normalize_adjacency") {
  CHECK(trap::normalize_adjacency(Matrix(1, 1)) == Matrix{{1.0}});
  const Matrix edge = trap::normalize_adjacency(Matrix{{0, 1}, {1, 0}});
  for (double x : edge.values()) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
  const Matrix tri = trap::normalize_adjacency(Matrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  for (double x : tri.values()) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // path 0-1-2: degrees with self loops 2,3,2
  const Matrix path = trap::normalize_adjacency(Matrix{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  CHECK(path(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(path(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(path(0, 2) == 0.0);
}

TEST_CASE("parameter layout") {
  CHECK(trap::params_per_layer(config(Arch::kGCN)) == 1);
  CHECK(trap::params_per_layer(config(Arch::kGAT)) == 2 * 3 + 1);
  const auto gcn = trap::init_model(config(Arch::kGCN, 5, 3), 0);
  REQUIRE(gcn.params.size() == 4);
  CHECK(gcn.params[0].rows() == 5);
  CHECK(gcn.params[0].cols() == 4);
  CHECK(gcn.params[1].rows() == 4);
  CHECK(gcn.params[1].cols() == 3);
  CHECK(gcn.classifier_weight().rows() == 3);
  CHECK(gcn.classifier_weight().cols() == 3);
  CHECK(gcn.classifier_bias() == Matrix(1, 3));
  const auto sage = trap::init_model(config(Arch::kGSAGE, 5), 0);
  CHECK(sage.params[0].rows() == 10);
}

TEST_CASE("init is Glorot bounded and seed deterministic") {
  const auto a = trap::init_model(config(Arch::kGCN, 6), 3);
  CHECK(a == trap::init_model(config(Arch::kGCN, 6), 3));
  CHECK_FALSE(a == trap::init_model(config(Arch::kGCN, 6), 4));
  const double limit = std::sqrt(6.0 / (6 + 4));
  for (double w : a.params[0].values()) CHECK(std::abs(w) <= limit);
}

TEST_CASE("config validation") {
  ModelConfig c = config(Arch::kGCN);
  c.layer_widths = {};
  CHECK_THROWS(c.validate());
  c.layer_widths = {0};
  CHECK_THROWS(c.validate());
  c = config(Arch::kGAT);
  c.gat_heads = 0;
  CHECK_THROWS(c.validate());
  trap::TrainConfig t;
  t.lr = 0;
  CHECK_THROWS(t.validate());
  CHECK(trap::parse_arch("gsage") == Arch::kGSAGE);
  CHECK_THROWS_AS(trap::parse_arch("MLP"), std::invalid_argument);
}

TEST_CASE("zero weights give logits equal to the bias") {
  const auto g = testutil::path_graph(5);
  for (Arch arch : kArchs) {
    auto s = trap::zero_model(config(arch));
    CHECK(trap::forward(s, g).logits == Matrix(1, 2));
    s.params.back() = Matrix{{0.3, -0.2}};
    CHECK(trap::forward(s, g).logits == Matrix{{0.3, -0.2}});
  }
}

TEST_CASE("GCN on a single node is an MLP") {
  const auto s = trap::init_model(config(Arch::kGCN, 2), 5);
  const Matrix x{{0.7, -1.3}};
  const trap::Graph g(Matrix(1, 1), x, 0);
  Matrix h = trap::relu(trap::matmul(x, s.params[0]));
  h = trap::relu(trap::matmul(h, s.params[1]));
  Matrix logits = trap::matmul(h, s.params[2]);
  logits += s.params[3];
  const Matrix got = trap::forward(s, g).logits;
  for (std::size_t i = 0; i < 2; ++i) CHECK(got(0, i) == doctest::Approx(logits(0, i)).epsilon(1e-14));
}

TEST_CASE("forward is deterministic") {
  const auto g = testutil::path_graph(6);
  for (Arch arch : kArchs) {
    const auto s = trap::init_model(config(arch), 9);
    CHECK(trap::forward(s, g).logits == trap::forward(s, g).logits);
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  const auto g = testutil::path_graph(4);
  for (Arch arch : kArchs) {
    const auto s = trap::init_model(config(arch), 2);
    const auto grads = trap::backward_from_logits(s, trap::forward(s, g), Matrix(1, 2), arch == Arch::kGCN);
    for (const auto& p : grads.params)
      for (double x : p.values()) CHECK(x == 0.0);
    if (arch == Arch::kGCN) {
      for (double x : grads.adjacency->values()) CHECK(x == 0.0);
    }
  }
}

TEST_CASE("adjacency gradient is GCN only") {
  const auto g = testutil::path_graph(4);
  const auto s = trap::init_model(config(Arch::kGIN), 2);
  CHECK_THROWS_AS(trap::backward(s, trap::forward(s, g), 0, true), trap::UnsupportedOperation);
  CHECK_FALSE(trap::backward(s, trap::forward(s, g), 0, false).adjacency.has_value());
}

TEST_CASE("gradients match finite differences on every architecture") {
  trap::Rng rng(77);
  for (Arch arch : kArchs) {
    CAPTURE(trap::arch_name(arch));
    int accepted = 0;
    while (accepted < 5) {
      const auto in = oracle::random_instance(rng, arch, 7);
      if (!oracle::kink_free(in)) continue;
      ++accepted;
      const auto trace = trap::forward(in.state, in.adjacency, in.features);
      const auto grads = trap::backward(in.state, trace, in.label, arch == Arch::kGCN);
      CHECK(oracle::check_param_gradients(in, grads).max_rel < 1e-4);
      if (arch == Arch::kGCN) CHECK(oracle::check_adjacency_gradient(in, *grads.adjacency).max_rel < 1e-4);
    }
  }
}

TEST_CASE("adam_step") {
  trap::ModelState s;
  s.params = {Matrix{{1.0}}, Matrix{{2.0, 3.0}}};
  trap::TrainConfig t;
  t.weight_decay = 0.0;

  auto opt = trap::init_adam(s);
  const std::vector<Matrix> zero{Matrix(1, 1), Matrix(1, 2)};
  auto same = s;
  trap::adam_step(same, zero, opt, 1, t);
  CHECK(same == s);

  opt = trap::init_adam(s);
  const std::vector<Matrix> ones{Matrix{{1.0}}, Matrix{{1.0, 1.0}}};
  auto stepped = s;
  trap::adam_step(stepped, ones, opt, 1, t);
  CHECK(stepped.params[0](0, 0) == doctest::Approx(1.0 - 0.02).epsilon(1e-6));
  const double d0 = s.params[1](0, 0) - stepped.params[1](0, 0);
  const double d1 = s.params[1](0, 1) - stepped.params[1](0, 1);
  CHECK(d0 == d1);

  // weight decay pulls toward zero even with zero loss gradient
  t.weight_decay = 0.1;
  opt = trap::init_adam(s);
  auto decayed = s;
  trap::adam_step(decayed, zero, opt, 1, t);
  CHECK(decayed.params[0](0, 0) < 1.0);
  CHECK_THROWS(trap::adam_step(decayed, zero, opt, 0, t));
}

TEST_CASE("train") {
  const auto d = testutil::small_synth(40, 1);
  ModelConfig c = config(Arch::kGCN, 3);
  c.layer_widths = {16, 8};
  trap::TrainConfig t;
  t.seed = 5;

  t.epochs = 0;
  CHECK(trap::train(d.graphs, c, t) == trap::init_model(c, trap::derive_seed(5, trap::Stream::kModelInit)));

  t.epochs = 50;
  const auto model = trap::train(d.graphs, c, t);
  CHECK(trap::accuracy(model, d.graphs) >= 0.95);
  CHECK(trap::train(d.graphs, c, t) == model);
  const auto untrained = trap::init_model(c, 0);
  CHECK(trap::accuracy(model, d.graphs) >= trap::accuracy(untrained, d.graphs));
}

TEST_CASE("every architecture learns the density task") {
  const auto d = testutil::small_synth(30, 2);
  for (Arch arch : kArchs) {
    CAPTURE(trap::arch_name(arch));
    trap::TrainConfig t;
    t.seed = 1;
    t.batch_size = 16;
    const auto model = trap::train(d.graphs, config(arch, 3), t);
    CHECK(trap::accuracy(model, d.graphs) >= 0.8);
  }
}

TEST_CASE("argmax, predict and accuracy") {
  CHECK(trap::argmax(Matrix{{0.2, 0.9}}) == 1);
  CHECK(trap::argmax(Matrix{{0.5, 0.5, 0.5}}) == 0);
  const auto s = trap::zero_model(config(Arch::kGCN));
  CHECK(trap::predict(s, testutil::path_graph(3)) == 0);
  const std::vector<trap::Graph> gs{testutil::path_graph(3, 0), testutil::path_graph(3, 1)};
  CHECK(trap::accuracy(s, gs) == 0.5);
  CHECK_THROWS(trap::accuracy(s, std::span<const trap::Graph>{}));
}

}
