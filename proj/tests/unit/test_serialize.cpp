#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "trap/serialize.hpp"

using trap::Matrix;

TEST_SUITE("serialize") {

TEST_CASE("matrix round-trip is bit exact") {
  const Matrix m(2, 3, std::vector<double>{0.1, -0.0, 1e-310, 3.141592653589793, -2.5e300, 7});
  const Matrix back = trap::matrix_from_json(trap::matrix_to_json(m));
  CHECK(back == m);
  CHECK(std::signbit(back(0, 1)));
  CHECK_THROWS(trap::matrix_from_json({{"rows", 1}, {"cols", 2}, {"f64le", "00"}}));
}

TEST_CASE("checkpoint round-trip for every architecture") {
  const auto dir = testutil::scratch_dir("ckpt");
  for (auto arch : {trap::Arch::kGCN, trap::Arch::kGIN, trap::Arch::kGSAGE, trap::Arch::kGAT}) {
    trap::ModelConfig c;
    c.arch = arch;
    c.input_dim = 3;
    c.num_classes = 3;
    const auto state = trap::init_model(c, 11);
    const auto path = dir / (trap::arch_name(arch) + ".json");
    trap::save_checkpoint(state, path);
    CHECK(trap::load_checkpoint(path) == state);
  }
  auto j = trap::checkpoint_to_json(trap::init_model(trap::ModelConfig{}, 0));
  j["format"] = "something-else";
  CHECK_THROWS(trap::checkpoint_from_json(j));
}

TEST_CASE("plan round-trip") {
  trap::PoisonPlan p;
  p.attack = "trap";
  p.target = 1;
  p.budget = 2;
  p.seed = 99;
  p.candidate_ids = {4, 8};
  p.flips = {{{0, 1}, {2, 5}}, {{1, 3}, {0, 4}}};
  const auto j = trap::plan_to_json(p, "checkpoints/surrogate.json");
  CHECK(j["y_t"] == 1);
  CHECK(j["M"] == 2);
  CHECK(j["surrogate_checkpoint"] == "checkpoints/surrogate.json");
  const auto back = trap::plan_from_json(j);
  CHECK(back.flips == p.flips);
  CHECK(back.candidate_ids == p.candidate_ids);
  CHECK(back.seed == 99);
}

TEST_CASE("format_number round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -0.0})
    CHECK(std::stod(trap::format_number(v)) == v);
  CHECK(trap::format_number(0.05) == "0.05");
}

TEST_CASE("write_text creates parents") {
  const auto dir = testutil::scratch_dir("write");
  trap::write_text(dir / "a" / "b" / "c.txt", "hi\n");
  CHECK(trap::read_text(dir / "a" / "b" / "c.txt") == "hi\n");
  CHECK_THROWS(trap::read_text(dir / "missing.txt"));
}

}
