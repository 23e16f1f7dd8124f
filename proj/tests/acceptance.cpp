// Acceptance suite: one PASS/FAIL line per criterion, thresholds pinned below.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "trap/attacks.hpp"
#include "trap/harness.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using trap::Matrix;

// Pinned tolerances.
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdInstances = 24;
constexpr double kFdSeconds = 10.0;
constexpr int kGreedyInstances = 200;
constexpr double kGreedySeconds = 5.0;
constexpr int kScoreInstances = 100;
constexpr double kMinCleanAcc = 0.80;
constexpr double kMinTrapAsr = 0.60;
constexpr double kMinAsrMargin = 0.15;
constexpr double kMaxAbsCad = 0.05;
constexpr double kEffectivenessSeconds = 300.0;
constexpr double kTransferSeconds = 600.0;
constexpr double kDefenseAsrRatio = 0.5;

int failures = 0;

void report(bool pass, const char* id, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void gradient_fidelity() {
  const auto start = Clock::now();
  trap::Rng rng(2024);
  int accepted = 0, rejected = 0;
  double worst_w = 0, worst_a = 0;
  while (accepted < kFdInstances) {
    const auto in = oracle::random_instance(rng, trap::Arch::kGCN, 10);
    if (!oracle::kink_free(in)) {
      ++rejected;
      continue;
    }
    ++accepted;
    const auto g = trap::backward(in.state, trap::forward(in.state, in.adjacency, in.features), in.label, true);
    worst_w = std::max(worst_w, oracle::check_param_gradients(in, g, kFdStep).max_rel);
    worst_a = std::max(worst_a, oracle::check_adjacency_gradient(in, *g.adjacency, kFdStep).max_rel);
  }
  const double t = seconds_since(start);
  report(worst_w < kFdRelTol && worst_a < kFdRelTol && t < kFdSeconds, "1 gradient fidelity",
         fmt("%d instances (%d near-kink draws skipped), max rel err weights %.2e, dL/dA %.2e (tol %.0e), %.2fs",
             accepted, rejected, worst_w, worst_a, kFdRelTol, t));
}

void greedy_oracle() {
  const auto start = Clock::now();
  trap::Rng rng(7);
  int mismatches = 0;
  for (int i = 0; i < kGreedyInstances; ++i) {
    const std::size_t n = 2 + rng.below(7);  // 2..8
    Matrix s(n, n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) s(u, v) = s(v, u) = rng.normal();
    for (std::size_t u = 0; u < n; ++u) s(u, u) = trap::kMaskedScore;
    const std::size_t max_m = std::min<std::size_t>(5, n * (n - 1) / 2);
    for (std::size_t m = 0; m <= max_m; ++m) {
      if (oracle::sorted_pairs(trap::select_perturbations(s, m)) != oracle::sorted_pairs(oracle::exhaustive_top(s, m)))
        ++mismatches;
    }
  }
  const double t = seconds_since(start);
  report(mismatches == 0 && t < kGreedySeconds, "2 greedy oracle",
         fmt("%d matrices x every M<=5, %d mismatches, %.2fs", kGreedyInstances, mismatches, t));
}

void score_law() {
  trap::Rng rng(11);
  int violations = 0;
  for (int i = 0; i < kScoreInstances; ++i) {
    const std::size_t n = 1 + rng.below(10);
    Matrix grad(n, n), a(n, n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) {
        grad(u, v) = grad(v, u) = rng.normal();
        if (rng.bernoulli(0.5)) a(u, v) = a(v, u) = 1.0;
      }
    const Matrix s = trap::score_matrix(grad, a);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) {
        if (u == v) continue;
        const double want = a(u, v) == 1.0 ? grad(u, v) : -grad(u, v);
        if (s(u, v) != want) ++violations;
      }
  }
  report(violations == 0, "3 score law", fmt("%d instances, %d inexact entries", kScoreInstances, violations));
}

struct Runs {
  trap::ExperimentReport trap_gcn, random_gcn;
};

trap::ExperimentSettings canonical_settings() {
  trap::ExperimentSettings s;  // published defaults: M=5, widths 16-8, 50 epochs, Adam lr 0.02
  s.seeds = {0, 1, 2, 3, 4};
  s.jobs = std::max(1u, std::thread::hardware_concurrency());
  return s;
}

Runs effectiveness(const trap::Dataset& d) {
  const auto start = Clock::now();
  auto s = canonical_settings();
  s.attack = trap::AttackKind::kTrap;
  Runs r;
  r.trap_gcn = trap::run_effectiveness(d, s);
  s.attack = trap::AttackKind::kRandom;
  r.random_gcn = trap::run_effectiveness(d, s);
  const double t = seconds_since(start);
  const auto tm = r.trap_gcn.mean_for("GCN");
  const auto rm = r.random_gcn.mean_for("GCN");
  const bool pass = tm.clean_acc >= kMinCleanAcc && tm.asr >= kMinTrapAsr && tm.asr - rm.asr >= kMinAsrMargin &&
                    std::abs(tm.cad) <= kMaxAbsCad && t < kEffectivenessSeconds;
  report(pass, "4 effectiveness",
         fmt("clean %.3f (>=%.2f), TRAP ASR %.3f (>=%.2f), random ASR %.3f, margin %.3f (>=%.2f), CAD %+.3f "
             "(|.|<=%.2f), %.1fs",
             tm.clean_acc, kMinCleanAcc, tm.asr, kMinTrapAsr, rm.asr, tm.asr - rm.asr, kMinAsrMargin, tm.cad,
             kMaxAbsCad, t));
  return r;
}

void transfer(const trap::Dataset& d) {
  const auto start = Clock::now();
  auto s = canonical_settings();
  s.victims = {trap::Arch::kGIN, trap::Arch::kGSAGE};
  s.attack = trap::AttackKind::kTrap;
  const auto t_rep = trap::run_transfer(d, s, true);
  s.attack = trap::AttackKind::kRandom;
  const auto r_rep = trap::run_transfer(d, s, true);
  const double t = seconds_since(start);
  bool pass = t < kTransferSeconds;
  std::string detail;
  for (const char* v : {"GIN", "GSAGE"}) {
    const double ta = t_rep.mean_for(v).asr, ra = r_rep.mean_for(v).asr;
    pass = pass && ta >= ra;
    detail += fmt("%s TRAP %.3f vs random %.3f; ", v, ta, ra);
  }
  report(pass, "5 transferability", detail + fmt("%.1fs", t));
}

void sweeps(const trap::Dataset& d) {
  auto s = canonical_settings();
  s.rates = {0.01, 0.07};
  const auto rate = trap::run_rate_sweep(d, s);
  s.budgets = {1, 5};
  const auto budget = trap::run_budget_sweep(d, s);
  const double r1 = rate.mean_for("GCN", 0.01).asr, r7 = rate.mean_for("GCN", 0.07).asr;
  const double b1 = budget.mean_for("GCN", 1).asr, b5 = budget.mean_for("GCN", 5).asr;
  report(r7 >= r1 && b5 >= b1, "6 sweep trends",
         fmt("ASR rate 1%% %.3f -> 7%% %.3f; budget 1 %.3f -> 5 %.3f", r1, r7, b1, b5));
}

void defense(const trap::Dataset& d) {
  auto s = canonical_settings();
  s.victims = {trap::Arch::kGCN, trap::Arch::kGIN, trap::Arch::kGSAGE};
  s.defense.subsample_ratio = 0.10;
  s.defense.num_views = 10;
  const auto rep = trap::run_defense(d, s);
  const auto gu = rep.mean_for("GCN", 0), gd = rep.mean_for("GCN", 1);
  bool some_victim = false;
  std::string detail = fmt("GCN clean %.3f -> %.3f; ASR kept:", gu.clean_acc, gd.clean_acc);
  for (const char* v : {"GCN", "GIN", "GSAGE"}) {
    const double u = rep.mean_for(v, 0).asr, df = rep.mean_for(v, 1).asr;
    some_victim = some_victim || df >= kDefenseAsrRatio * u;
    detail += fmt(" %s %.3f->%.3f", v, u, df);
  }
  report(gd.clean_acc < gu.clean_acc && some_victim, "7 defense trend", detail);
}

void determinism(const trap::Dataset& d, const Runs& first) {
  auto s = canonical_settings();
  s.jobs = 1;  // a different job count must not matter either
  const auto again = trap::run_effectiveness(d, s);
  s.attack = trap::AttackKind::kRandom;
  const auto again_random = trap::run_effectiveness(d, s);
  const bool same = trap::report_to_json(again).dump() == trap::report_to_json(first.trap_gcn).dump() &&
                    trap::report_to_csv(again) == trap::report_to_csv(first.trap_gcn) &&
                    trap::report_to_json(again_random).dump() == trap::report_to_json(first.random_gcn).dump();
  report(same, "8 determinism", same ? "re-run reports byte-identical (JSON and CSV)" : "reports differ");
}

void round_trip(const trap::Dataset& synth) {
  const auto dir = std::filesystem::temp_directory_path() / "trap_acceptance_roundtrip";
  std::filesystem::remove_all(dir);
  trap::save_tudataset(synth, dir / "synth", synth.name);
  const bool synth_ok = trap::load_tudataset(dir / "synth", synth.name) == synth;
  const auto tiny = trap::load_tudataset(std::filesystem::path(TRAP_TEST_DATA_DIR) / "tiny", "TINY");
  trap::save_tudataset(tiny, dir / "tiny", "TINY");
  const bool tiny_ok = trap::load_tudataset(dir / "tiny", "TINY") == tiny;
  std::filesystem::remove_all(dir);
  report(synth_ok && tiny_ok, "9 format round-trip",
         fmt("synthetic %s, tiny fixture %s", synth_ok ? "exact" : "differs", tiny_ok ? "exact" : "differs"));
}

}  // namespace

int main() {
  gradient_fidelity();
  greedy_oracle();
  score_law();
  const trap::Dataset d = trap::synth_dataset(trap::canonical_synth_spec(0));
  const Runs runs = effectiveness(d);
  transfer(d);
  sweeps(d);
  defense(d);
  determinism(d, runs);
  round_trip(d);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
