#include "trap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "trap/rng.hpp"

namespace trap {

namespace {

using Clock = std::chrono::steady_clock;

struct CellTask {
  std::size_t sweep_index;
  std::size_t seed_index;
};

struct CellOutput {
  std::vector<CellRecord> records;
  CellArtifacts artifacts;
};

std::vector<Graph> gather(const Dataset& d, std::span<const std::size_t> ids) {
  std::vector<Graph> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(d.graphs[id]);
  return out;
}

void check_disjoint(const SplitPlan& plan) {
  std::set<std::size_t> training(plan.train_ids.begin(), plan.train_ids.end());
  training.insert(plan.poison_train_ids.begin(), plan.poison_train_ids.end());
  for (std::size_t id : plan.poison_test_ids) {
    if (training.contains(id)) {
      throw std::logic_error("harness: poisoned test graph " + std::to_string(id) +
                             " is also in the training pool");
    }
  }
  for (std::size_t id : plan.test_ids) {
    if (training.contains(id)) {
      throw std::logic_error("harness: clean test graph " + std::to_string(id) +
                             " is also in the training pool");
    }
  }
}

/// Keeps round(rate * |train|) of the poison-train half.
void apply_rate(SplitPlan& plan, double rate) {
  const auto wanted = static_cast<std::size_t>(std::llround(rate * static_cast<double>(plan.train_ids.size())));
  if (wanted > plan.poison_train_ids.size()) {
    throw std::invalid_argument("poison rate " + format_number(rate) + " needs " +
                                std::to_string(wanted) + " poisoned graphs, the candidate pool has " +
                                std::to_string(plan.poison_train_ids.size()));
  }
  plan.poison_train_ids.resize(wanted);
}

PoisonResult poison(const Dataset& d, const SplitPlan& plan, const ExperimentSettings& s,
                    std::size_t budget, std::uint64_t seed) {
  switch (s.attack) {
    case AttackKind::kTrap: {
      SurrogateConfig surrogate;
      surrogate.model.arch = Arch::kGCN;
      surrogate.model.layer_widths = s.surrogate_widths;
      surrogate.model.input_dim = d.graphs.front().feature_dim();
      surrogate.model.num_classes = d.num_classes;
      surrogate.train = s.train;
      surrogate.train.seed = derive_seed(seed, Stream::kSurrogateTrain);
      return trap_poison(d, plan, plan.target, budget, surrogate, TrapOptions{s.sequential});
    }
    case AttackKind::kRandom:
      return random_flip_poison(d, plan, plan.target, budget, derive_seed(seed, Stream::kAttack));
    case AttackKind::kSubgraph: {
      const std::uint64_t attack_seed = derive_seed(seed, Stream::kAttack);
      const SubgraphTrigger trigger = er_subgraph_trigger(s.trigger_size, s.trigger_density, attack_seed);
      return subgraph_poison(d, plan, plan.target, trigger, attack_seed);
    }
  }
  throw std::logic_error("unreachable attack kind");
}

CellOutput run_cell(const Dataset& d, const ExperimentSettings& s, std::size_t target,
                    std::uint64_t seed, double sweep_param) {
  const auto start = Clock::now();
  SplitPlan plan = split(d, target, derive_seed(seed, Stream::kSplit));
  std::size_t budget = s.budget;
  if (s.experiment == Experiment::kRateSweep) {
    apply_rate(plan, sweep_param);
  } else if (s.poison_rate) {
    apply_rate(plan, *s.poison_rate);
  }
  if (s.experiment == Experiment::kBudgetSweep) budget = static_cast<std::size_t>(sweep_param);
  check_disjoint(plan);

  PoisonResult poisoned = poison(d, plan, s, budget, seed);
  const std::vector<Graph> clean_train = gather(d, plan.train_ids);
  const std::vector<Graph> clean_test = gather(d, plan.test_ids);
  std::vector<Graph> poisoned_train = clean_train;
  poisoned_train.insert(poisoned_train.end(), poisoned.train.begin(), poisoned.train.end());

  CellOutput out;
  const std::string widths = widths_label(s.victim_widths);
  for (std::size_t vi = 0; vi < s.victims.size(); ++vi) {
    const Arch arch = s.victims[vi];
    ModelConfig mcfg;
    mcfg.arch = arch;
    mcfg.layer_widths = s.victim_widths;
    mcfg.gat_heads = s.gat_heads;
    mcfg.input_dim = d.graphs.front().feature_dim();
    mcfg.num_classes = d.num_classes;
    // Clean and backdoored victims share every seed, so they differ only in data.
    TrainConfig tcfg = s.train;
    tcfg.seed = derive_seed(seed, Stream::kVictimTrain, static_cast<std::uint64_t>(arch));

    auto record = [&](double param, double clean_acc, double backdoor_acc, double attack_rate) {
      CellRecord r;
      r.dataset = d.name;
      r.attack = attack_name(s.attack);
      r.victim = arch_name(arch);
      r.widths = widths;
      r.seed = seed;
      r.sweep_param = param;
      r.clean_acc = clean_acc;
      r.backdoor_acc = backdoor_acc;
      r.asr = attack_rate;
      r.cad = cad(clean_acc, backdoor_acc);
      out.records.push_back(r);
    };

    const ModelState clean_model = train(clean_train, mcfg, tcfg);
    const ModelState backdoored = train(poisoned_train, mcfg, tcfg);
    const double undefended_clean = accuracy(clean_model, clean_test);
    const double undefended_backdoor = accuracy(backdoored, clean_test);
    const double undefended_asr = poisoned.test.empty() ? 0.0 : asr(backdoored, poisoned.test, target);

    if (s.experiment != Experiment::kDefense) {
      record(sweep_param, undefended_clean, undefended_backdoor, undefended_asr);
    } else {
      record(0.0, undefended_clean, undefended_backdoor, undefended_asr);
      DefenseConfig dcfg = s.defense;
      dcfg.seed = derive_seed(seed, Stream::kDefenseTrain, static_cast<std::uint64_t>(arch));
      const ModelState clean_def = train_subsampled(clean_train, mcfg, tcfg, dcfg);
      const ModelState backdoor_def = train_subsampled(poisoned_train, mcfg, tcfg, dcfg);
      DefenseConfig vote = dcfg;
      vote.seed = derive_seed(seed, Stream::kDefenseVote, static_cast<std::uint64_t>(arch));
      record(1.0, accuracy_voted(clean_def, clean_test, vote),
             accuracy_voted(backdoor_def, clean_test, vote),
             poisoned.test.empty() ? 0.0 : asr_voted(backdoor_def, poisoned.test, target, vote));
      if (s.keep_artifacts) {
        out.artifacts.models.emplace_back(arch_name(arch) + "_clean_defended", clean_def);
        out.artifacts.models.emplace_back(arch_name(arch) + "_backdoor_defended", backdoor_def);
      }
    }
    if (s.keep_artifacts) {
      out.artifacts.models.emplace_back(arch_name(arch) + "_clean", clean_model);
      out.artifacts.models.emplace_back(arch_name(arch) + "_backdoor", backdoored);
    }
  }

  const double elapsed =
      s.record_timing ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
  for (auto& r : out.records) r.runtime_s = elapsed;

  if (s.keep_artifacts) {
    out.artifacts.seed = seed;
    out.artifacts.sweep_param = sweep_param;
    out.artifacts.split = std::move(plan);
    out.artifacts.poison = std::move(poisoned);
  }
  return out;
}

std::string sweep_axis_for(Experiment e) {
  switch (e) {
    case Experiment::kRateSweep: return "rate";
    case Experiment::kBudgetSweep: return "budget";
    case Experiment::kDefense: return "defense";
    default: return "none";
  }
}

}  // namespace

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kEffectiveness: return "effectiveness";
    case Experiment::kTransfer: return "transfer";
    case Experiment::kRateSweep: return "rate_sweep";
    case Experiment::kBudgetSweep: return "budget_sweep";
    case Experiment::kDefense: return "defense";
  }
  return "?";
}

Experiment parse_experiment(const std::string& name) {
  for (Experiment e : {Experiment::kEffectiveness, Experiment::kTransfer, Experiment::kRateSweep,
                       Experiment::kBudgetSweep, Experiment::kDefense}) {
    if (experiment_name(e) == name) return e;
  }
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

std::string attack_name(AttackKind a) {
  switch (a) {
    case AttackKind::kTrap: return "trap";
    case AttackKind::kSubgraph: return "subgraph";
    case AttackKind::kRandom: return "random";
  }
  return "?";
}

AttackKind parse_attack(const std::string& name) {
  for (AttackKind a : {AttackKind::kTrap, AttackKind::kSubgraph, AttackKind::kRandom}) {
    if (attack_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown attack '" + name + "'");
}

double asr(const ModelState& backdoored, std::span<const Graph> poisoned_test, std::size_t target) {
  if (poisoned_test.empty()) throw std::invalid_argument("asr: empty poisoned test set");
  std::size_t hits = 0;
  for (const auto& g : poisoned_test) hits += predict(backdoored, g) == target ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(poisoned_test.size());
}

double asr_voted(const ModelState& backdoored, std::span<const Graph> poisoned_test,
                 std::size_t target, const DefenseConfig& dcfg) {
  if (poisoned_test.empty()) throw std::invalid_argument("asr_voted: empty poisoned test set");
  std::size_t hits = 0;
  for (const auto& g : poisoned_test) hits += predict_voted(backdoored, g, dcfg) == target ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(poisoned_test.size());
}

std::string widths_label(std::span<const std::size_t> widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) out += (i ? "-" : "") + std::to_string(widths[i]);
  return out;
}

std::vector<MeanRecord> ExperimentReport::means() const {
  using Key = std::tuple<std::string, std::string, double>;
  std::vector<Key> order;
  std::map<Key, std::pair<MeanRecord, std::size_t>> acc;
  for (const auto& r : records) {
    Key key{r.victim, r.widths, r.sweep_param};
    auto [it, inserted] = acc.try_emplace(key, MeanRecord{r.victim, r.widths, r.sweep_param}, 0);
    if (inserted) order.push_back(key);
    auto& [m, n] = it->second;
    m.clean_acc += r.clean_acc;
    m.backdoor_acc += r.backdoor_acc;
    m.asr += r.asr;
    m.cad += r.cad;
    ++n;
  }
  std::vector<MeanRecord> out;
  for (const auto& key : order) {
    auto [m, n] = acc.at(key);
    const double k = static_cast<double>(n);
    m.clean_acc /= k;
    m.backdoor_acc /= k;
    m.asr /= k;
    m.cad /= k;
    out.push_back(m);
  }
  return out;
}

MeanRecord ExperimentReport::mean_for(const std::string& victim, double sweep_param) const {
  for (const auto& m : means()) {
    if (m.victim == victim && m.sweep_param == sweep_param) return m;
  }
  throw std::out_of_range("report has no cell for victim " + victim + " at " +
                          format_number(sweep_param));
}

ExperimentReport run_experiment(const Dataset& d, const ExperimentSettings& s) {
  d.validate();
  if (d.graphs.empty()) throw DataError("run_experiment: empty dataset");
  if (s.seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");
  if (s.victims.empty()) throw std::invalid_argument("run_experiment: no victim architectures");
  const auto start = Clock::now();

  ExperimentReport report;
  report.dataset = d.name;
  report.attack = attack_name(s.attack);
  report.experiment = experiment_name(s.experiment);
  report.sweep_axis = sweep_axis_for(s.experiment);
  report.seeds = s.seeds;
  report.target = s.target.value_or(target_class(d));
  report.surrogate.arch = Arch::kGCN;
  report.surrogate.layer_widths = s.surrogate_widths;
  report.surrogate.input_dim = d.graphs.front().feature_dim();
  report.surrogate.num_classes = d.num_classes;

  switch (s.experiment) {
    case Experiment::kRateSweep: report.sweep_values = s.rates; break;
    case Experiment::kBudgetSweep:
      for (auto b : s.budgets) report.sweep_values.push_back(static_cast<double>(b));
      break;
    default: report.sweep_values = {0.0}; break;
  }

  std::vector<CellTask> tasks;
  for (std::size_t i = 0; i < report.sweep_values.size(); ++i)
    for (std::size_t j = 0; j < s.seeds.size(); ++j) tasks.push_back({i, j});

  std::vector<CellOutput> outputs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < tasks.size();) {
      try {
        outputs[k] = run_cell(d, s, report.target, s.seeds[tasks[k].seed_index],
                              report.sweep_values[tasks[k].sweep_index]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(s.jobs, 1, tasks.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto& o : outputs) {
    report.records.insert(report.records.end(), o.records.begin(), o.records.end());
    if (s.keep_artifacts) report.artifacts.push_back(std::move(o.artifacts));
  }
  if (s.record_timing) report.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

ExperimentReport run_effectiveness(const Dataset& d, ExperimentSettings settings) {
  settings.experiment = Experiment::kEffectiveness;
  return run_experiment(d, settings);
}

ExperimentReport run_transfer(const Dataset& d, ExperimentSettings settings, bool same_widths) {
  settings.experiment = Experiment::kTransfer;
  settings.victim_widths = same_widths ? settings.surrogate_widths : std::vector<std::size_t>{32, 16};
  return run_experiment(d, settings);
}

ExperimentReport run_rate_sweep(const Dataset& d, ExperimentSettings settings) {
  settings.experiment = Experiment::kRateSweep;
  return run_experiment(d, settings);
}

ExperimentReport run_budget_sweep(const Dataset& d, ExperimentSettings settings) {
  settings.experiment = Experiment::kBudgetSweep;
  return run_experiment(d, settings);
}

ExperimentReport run_defense(const Dataset& d, ExperimentSettings settings) {
  settings.experiment = Experiment::kDefense;
  return run_experiment(d, settings);
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

json record_json(const CellRecord& r) {
  return {{"sweep_param", r.sweep_param}, {"clean_acc", r.clean_acc},
          {"backdoor_acc", r.backdoor_acc}, {"asr", r.asr},
          {"cad", r.cad}, {"runtime_s", r.runtime_s}};
}

json mean_json(const MeanRecord& m) {
  return {{"sweep_param", m.sweep_param}, {"clean_acc", m.clean_acc},
          {"backdoor_acc", m.backdoor_acc}, {"asr", m.asr}, {"cad", m.cad}};
}

}  // namespace

json report_to_json(const ExperimentReport& report) {
  // dataset -> attack -> victim -> {widths, seeds: {seed: [records]}, mean: [records]}
  json victims = json::object();
  for (const auto& r : report.records) {
    json& v = victims[r.victim];
    v["widths"] = r.widths;
    v["seeds"][std::to_string(r.seed)].push_back(record_json(r));
  }
  for (const auto& m : report.means()) victims[m.victim]["mean"].push_back(mean_json(m));

  json j;
  j["experiment"] = report.experiment;
  j["dataset"] = report.dataset;
  j["attack"] = report.attack;
  j["target_class"] = report.target;
  j["sweep_axis"] = report.sweep_axis;
  j["sweep_values"] = report.sweep_values;
  j["seeds"] = report.seeds;
  j["surrogate"] = model_config_to_json(report.surrogate);
  j["wall_clock_s"] = report.wall_clock_s;
  j["results"][report.dataset][report.attack] = std::move(victims);
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport report;
  report.experiment = j.at("experiment").get<std::string>();
  report.dataset = j.at("dataset").get<std::string>();
  report.attack = j.at("attack").get<std::string>();
  report.target = j.at("target_class").get<std::size_t>();
  report.sweep_axis = j.at("sweep_axis").get<std::string>();
  report.sweep_values = j.at("sweep_values").get<std::vector<double>>();
  report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  report.surrogate = model_config_from_json(j.at("surrogate"));
  report.wall_clock_s = j.value("wall_clock_s", 0.0);

  // Re-emit records in (sweep, seed, victim) order, the order run_experiment produces.
  const json& victims = j.at("results").at(report.dataset).at(report.attack);
  std::vector<std::string> victim_order;
  for (const auto& [name, _] : victims.items()) victim_order.push_back(name);
  std::vector<std::string> canonical{"GCN", "GIN", "GSAGE", "GAT"};
  std::stable_sort(victim_order.begin(), victim_order.end(), [&](const auto& a, const auto& b) {
    auto rank = [&](const std::string& n) {
      return std::find(canonical.begin(), canonical.end(), n) - canonical.begin();
    };
    return rank(a) < rank(b);
  });
  // The defense axis lives inside each cell, so every record of a (seed, victim) is taken at once.
  const bool defense = report.sweep_axis == "defense";
  const std::vector<double> passes = defense ? std::vector<double>{0.0} : report.sweep_values;
  for (double sweep : passes) {
    for (std::uint64_t seed : report.seeds) {
      for (const auto& victim : victim_order) {
        const json& v = victims.at(victim);
        for (const auto& rec : v.at("seeds").at(std::to_string(seed))) {
          const double p = rec.at("sweep_param").get<double>();
          if (!defense && p != sweep) continue;
          CellRecord r;
          r.dataset = report.dataset;
          r.attack = report.attack;
          r.victim = victim;
          r.widths = v.at("widths").get<std::string>();
          r.seed = seed;
          r.sweep_param = p;
          r.clean_acc = rec.at("clean_acc").get<double>();
          r.backdoor_acc = rec.at("backdoor_acc").get<double>();
          r.asr = rec.at("asr").get<double>();
          r.cad = rec.at("cad").get<double>();
          r.runtime_s = rec.at("runtime_s").get<double>();
          report.records.push_back(r);
        }
      }
    }
  }
  return report;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : report.records) {
    out << r.dataset << ',' << r.attack << ',' << r.victim << ',' << r.widths << ',' << r.seed << ','
        << format_number(r.sweep_param) << ',' << format_number(r.clean_acc) << ','
        << format_number(r.backdoor_acc) << ',' << format_number(r.asr) << ','
        << format_number(r.cad) << ',' << format_number(r.runtime_s) << '\n';
  }
  return out.str();
}

std::string sweep_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "victim,widths," << report.sweep_axis << ",clean_acc,backdoor_acc,asr,cad\n";
  for (const auto& m : report.means()) {
    out << m.victim << ',' << m.widths << ',' << format_number(m.sweep_param) << ','
        << format_number(m.clean_acc) << ',' << format_number(m.backdoor_acc) << ','
        << format_number(m.asr) << ',' << format_number(m.cad) << '\n';
  }
  return out.str();
}

}  // namespace trap
