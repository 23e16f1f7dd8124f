#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trap/attacks.hpp"
#include "trap/defense.hpp"
#include "trap/gnn.hpp"
#include "trap/graph.hpp"
#include "trap/serialize.hpp"

namespace trap {

enum class Experiment { kEffectiveness, kTransfer, kRateSweep, kBudgetSweep, kDefense };
enum class AttackKind { kTrap, kSubgraph, kRandom };

std::string experiment_name(Experiment e);
Experiment parse_experiment(const std::string& name);
std::string attack_name(AttackKind a);
AttackKind parse_attack(const std::string& name);

/// Fraction of poisoned test graphs classified as target.
double asr(const ModelState& backdoored, std::span<const Graph> poisoned_test, std::size_t target);
/// As asr, with the subsampled majority vote.
double asr_voted(const ModelState& backdoored, std::span<const Graph> poisoned_test,
                 std::size_t target, const DefenseConfig& dcfg);
/// Clean accuracy drop; negative when the backdoored model is more accurate.
inline double cad(double clean_acc, double backdoor_acc) { return clean_acc - backdoor_acc; }

struct ExperimentSettings {
  Experiment experiment = Experiment::kEffectiveness;
  AttackKind attack = AttackKind::kTrap;
  std::size_t budget = 5;
  std::optional<std::size_t> target;  // unset: least-populated class
  /// Poisoned graphs per clean training graph. Unset: the poison-train half of the split.
  std::optional<double> poison_rate;
  std::vector<std::size_t> surrogate_widths{16, 8};
  std::vector<std::size_t> victim_widths{16, 8};
  std::size_t gat_heads = 3;
  std::vector<Arch> victims{Arch::kGCN};
  TrainConfig train;  // seed is replaced per cell
  std::size_t trigger_size = 5;
  double trigger_density = 0.8;
  bool sequential = false;
  DefenseConfig defense;  // seed is replaced per cell
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> rates{0.01, 0.03, 0.05, 0.07};
  std::vector<std::size_t> budgets{1, 3, 5, 7};
  std::size_t jobs = 1;
  bool record_timing = false;
  bool keep_artifacts = false;
};

struct CellRecord {
  std::string dataset;
  std::string attack;
  std::string victim;
  std::string widths;  // e.g. "16-8"
  std::uint64_t seed = 0;
  double sweep_param = 0.0;
  double clean_acc = 0.0;
  double backdoor_acc = 0.0;
  double asr = 0.0;
  double cad = 0.0;
  double runtime_s = 0.0;
};

/// Per-cell outputs kept for export when ExperimentSettings::keep_artifacts is set.
struct CellArtifacts {
  std::uint64_t seed = 0;
  double sweep_param = 0.0;
  SplitPlan split;
  PoisonResult poison;
  std::vector<std::pair<std::string, ModelState>> models;
};

struct MeanRecord {
  std::string victim;
  std::string widths;
  double sweep_param = 0.0;
  double clean_acc = 0.0;
  double backdoor_acc = 0.0;
  double asr = 0.0;
  double cad = 0.0;
};

struct ExperimentReport {
  std::string dataset;
  std::string attack;
  std::string experiment;
  std::string sweep_axis;  // "none", "rate", "budget" or "defense"
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> seeds;
  std::size_t target = 0;
  ModelConfig surrogate;
  std::vector<CellRecord> records;
  std::vector<CellArtifacts> artifacts;
  double wall_clock_s = 0.0;

  /// Arithmetic mean over seeds for every (victim, widths, sweep_param).
  std::vector<MeanRecord> means() const;
  /// Mean of one metric; throws if the cell is absent.
  MeanRecord mean_for(const std::string& victim, double sweep_param = 0.0) const;
};

/// split -> poison -> clean and backdoored victims per architecture -> metrics,
/// for every seed (and sweep value). Cells run on settings.jobs threads; the
/// report is identical for any job count.
ExperimentReport run_experiment(const Dataset& d, const ExperimentSettings& settings);

ExperimentReport run_effectiveness(const Dataset& d, ExperimentSettings settings);
ExperimentReport run_transfer(const Dataset& d, ExperimentSettings settings, bool same_widths);
ExperimentReport run_rate_sweep(const Dataset& d, ExperimentSettings settings);
ExperimentReport run_budget_sweep(const Dataset& d, ExperimentSettings settings);
ExperimentReport run_defense(const Dataset& d, ExperimentSettings settings);

inline constexpr const char* kCsvHeader =
    "dataset,attack,victim,widths,seed,sweep_param,clean_acc,backdoor_acc,asr,cad,runtime_s";

json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const json& j);
std::string report_to_csv(const ExperimentReport& report);
/// Plot-ready means: victim,widths,<axis>,clean_acc,backdoor_acc,asr,cad
std::string sweep_csv(const ExperimentReport& report);

std::string widths_label(std::span<const std::size_t> widths);

}  // namespace trap
