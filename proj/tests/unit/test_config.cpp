#include <doctest.h>

#include "trap/config.hpp"

using trap::json;

namespace {

bool has_diagnostic(const trap::ConfigError& e, const std::string& path) {
  for (const auto& d : e.diagnostics())
    if (d.path == path) return true;
  return false;
}

trap::ConfigError error_for(const json& cfg, const std::vector<std::string>& overrides = {}) {
  try {
    trap::resolve_config(cfg, overrides);
  } catch (const trap::ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  return trap::ConfigError({});
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("empty config resolves to the published defaults") {
  const json r = trap::resolve_config(json::object());
  CHECK(r["model"]["widths"] == json({16, 8}));
  CHECK(r["model"]["victim_widths"] == json({16, 8}));
  CHECK(r["model"]["victims"] == json({"GCN"}));
  CHECK(r["attack"]["budget"] == 5);
  CHECK(r["attack"]["poison_rate"] == 0.05);
  CHECK(r["train"]["epochs"] == 50);
  CHECK(r["train"]["lr"] == 0.02);
  CHECK(r["train"]["weight_decay"] == 0.0005);
  CHECK(r["train"]["batch_size"] == 100);
  CHECK(r["defense"]["subsample_ratio"] == 0.1);
  CHECK(r["defense"]["num_views"] == 10);
  CHECK(trap::resolve_config(nullptr) == r);

  const auto s = trap::settings_from_config(r);
  CHECK(s.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK_FALSE(s.poison_rate.has_value());
  CHECK_FALSE(s.target.has_value());
}

TEST_CASE("resolution is idempotent") {
  const json once = trap::resolve_config({{"harness", {{"experiment", "transfer"}}}});
  CHECK(trap::resolve_config(once) == once);
  CHECK(once["model"]["victims"] == json({"GCN", "GIN", "GSAGE", "GAT"}));
}

TEST_CASE("overrides") {
  const json r = trap::resolve_config(json::object(), {"attack.budget=3", "attack.kind=random", "seed=7",
                                                       "model.victims=[\"gin\"]"});
  CHECK(r["attack"]["budget"] == 3);
  CHECK(r["attack"]["kind"] == "random");
  CHECK(r["model"]["victims"] == json({"GIN"}));
  const auto s = trap::settings_from_config(r);
  CHECK(s.seeds.front() == 7);
  CHECK(s.attack == trap::AttackKind::kRandom);
  CHECK_THROWS_AS(trap::resolve_config(json::object(), {"nonsense"}), trap::ConfigError);

  const auto rate = trap::settings_from_config(trap::resolve_config(json::object(), {"attack.rate_mode=override"}));
  CHECK(rate.poison_rate == 0.05);
}

TEST_CASE("diagnostics") {
  CHECK(has_diagnostic(error_for({{"attack", {{"poison_rate", 1.5}}}}), "attack.poison_rate"));
  const auto typo = error_for({{"attack", {{"triger_size", 3}}}});
  CHECK(has_diagnostic(typo, "attack.triger_size"));
  CHECK(std::string(typo.what()).find("triger_size") != std::string::npos);
  CHECK(has_diagnostic(error_for({{"bogus", 1}}), "bogus"));
  CHECK(has_diagnostic(error_for({{"train", {{"epochs", -1}}}}), "train.epochs"));
  CHECK(has_diagnostic(error_for({{"train", {{"lr", 0}}}}), "train.lr"));
  CHECK(has_diagnostic(error_for({{"model", {{"victims", {"MLP"}}}}}), "model.victims[0]"));
  CHECK(has_diagnostic(error_for({{"dataset", {{"source", "tudataset"}}}}), "dataset.path"));
  CHECK(has_diagnostic(error_for({{"harness", {{"rates", {0.1, 2.0}}}}}), "harness.rates[1]"));

  // every problem is reported at once
  const auto many = error_for({{"attack", {{"budget", -2}, {"kind", "gta"}}}});
  CHECK(many.diagnostics().size() == 2);
}

TEST_CASE("dataset_from_config") {
  const json r = trap::resolve_config(json::object());
  const auto d = trap::dataset_from_config(r);
  CHECK(d == trap::synth_dataset(trap::canonical_synth_spec(0)));
}

}
