#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "trap/rng.hpp"
#include "trap/defense.hpp"

using trap::Matrix;

namespace {

trap::ModelConfig small_config(const trap::Dataset& d) {
  trap::ModelConfig c;
  c.layer_widths = {8, 4};
  c.input_dim = d.graphs.front().feature_dim();
  c.num_classes = d.num_classes;
  return c;
}

}  // namespace

TEST_SUITE("defense") {

TEST_CASE("subsample_view") {
  const auto d = testutil::small_synth(3);
  const auto& g = d.graphs.back();
  CHECK(trap::subsample_view(g, 0.0, 1) == g);
  CHECK(trap::subsample_view(g, 1.0, 1).num_edges() == 0);
  CHECK(trap::subsample_view(g, 0.3, 5) == trap::subsample_view(g, 0.3, 5));
  CHECK_THROWS(trap::subsample_view(g, 1.5, 1));

  double removed = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    removed += static_cast<double>(g.num_edges() - trap::subsample_view(g, 0.1, seed).num_edges());
    total += static_cast<double>(g.num_edges());
  }
  // binomial: sd of the fraction ~ sqrt(0.09 / total)
  CHECK(std::abs(removed / total - 0.1) < 5 * std::sqrt(0.09 / total));
}

TEST_CASE("majority_vote") {
  const std::size_t votes[] = {1, 1, 0};
  CHECK(trap::majority_vote(votes, 2) == 1);
  const std::size_t tie[] = {2, 0, 0, 2};
  CHECK(trap::majority_vote(tie, 3) == 0);
  const std::size_t bad[] = {3};
  CHECK_THROWS(trap::majority_vote(bad, 2));
}

TEST_CASE("train_subsampled") {
  const auto d = testutil::small_synth(30, 3);
  const auto c = small_config(d);
  trap::TrainConfig t;
  t.seed = 2;
  t.epochs = 20;
  trap::DefenseConfig dc;
  dc.subsample_ratio = 0.0;
  CHECK(trap::train_subsampled(d.graphs, c, t, dc) == trap::train(d.graphs, c, t));
  dc.subsample_ratio = 0.3;
  dc.seed = 4;
  const auto a = trap::train_subsampled(d.graphs, c, t, dc);
  CHECK(trap::train_subsampled(d.graphs, c, t, dc) == a);
  CHECK_FALSE(a == trap::train(d.graphs, c, t));
}

TEST_CASE("defended training does not beat plain training by much") {
  const auto d = trap::synth_dataset(trap::canonical_synth_spec(0));
  const auto plan = trap::split(d, 0, 0);
  std::vector<trap::Graph> train, test;
  for (auto id : plan.train_ids) train.push_back(d.graphs[id]);
  for (auto id : plan.test_ids) test.push_back(d.graphs[id]);
  const auto c = small_config(d);
  trap::TrainConfig t;
  trap::DefenseConfig dc;
  dc.seed = 1;
  const double plain = trap::accuracy(trap::train(train, c, t), train);
  const double defended = trap::accuracy_voted(trap::train_subsampled(train, c, t, dc), train, dc);
  CHECK(defended <= plain + 0.05);
}

TEST_CASE("predict_voted") {
  const auto d = testutil::small_synth(20, 5);
  const auto c = small_config(d);
  trap::TrainConfig t;
  t.seed = 1;
  const auto model = trap::train(d.graphs, c, t);
  trap::DefenseConfig dc;
  dc.seed = 8;

  dc.subsample_ratio = 0.0;
  dc.num_views = 7;
  for (const auto& g : d.graphs) CHECK(trap::predict_voted(model, g, dc) == trap::predict(model, g));

  dc.subsample_ratio = 0.5;
  dc.num_views = 1;
  for (const auto& g : d.graphs) {
    const auto view_seed = trap::derive_seed(trap::derive_seed(dc.seed, trap::Stream::kDefenseVote, g.id()), 0);
    CHECK(trap::predict_voted(model, g, dc) == trap::predict(model, trap::subsample_view(g, 0.5, view_seed)));
  }
}

}
