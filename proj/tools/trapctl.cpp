// trapctl: command-line front end for the backdoor lab.
//
//   trapctl validate [--config F] [--set k=v ...]
//   trapctl synth    [--config F] [--seed N] --out DIR
//   trapctl ingest   --path DIR --name NAME [--out DIR]
//   trapctl run      [--config F] [--seed N] [--jobs N] [--out DIR] [--set k=v ...]
//   trapctl report   REPORT.json [--format csv|sweep|json]
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime failure. Failures
// print one JSON error record on stderr.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "trap/config.hpp"
#include "trap/harness.hpp"
#include "trap/rng.hpp"
#include "trap/serialize.hpp"

namespace fs = std::filesystem;
using trap::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  std::optional<std::string> attack;
  std::optional<std::size_t> budget;
  std::optional<std::string> experiment;
  std::string path;
  std::string name;
  std::string report_path;
  std::string format = "csv";
};

int fail(int code, const std::string& kind, const std::string& message,
         const std::vector<trap::Diagnostic>& diags = {}) {
  json record = {{"error", kind}, {"exit_code", code}, {"message", message}};
  if (!diags.empty()) {
    record["diagnostics"] = json::array();
    for (const auto& d : diags) record["diagnostics"].push_back({{"path", d.path}, {"message", d.message}});
  }
  std::cerr << record.dump() << '\n';
  return code;
}

/// The config file (or a manifest's resolved_config) plus command-line overrides.
json load_config(const Options& o) {
  json user = json::object();
  if (!o.config_path.empty()) {
    std::string text;
    try {
      text = trap::read_text(o.config_path);
    } catch (const std::exception& e) {
      throw trap::ConfigError("--config", e.what());
    }
    try {
      user = json::parse(text);
    } catch (const json::parse_error& e) {
      throw trap::ConfigError("--config", std::string("not valid JSON: ") + e.what());
    }
    if (user.is_object() && user.contains("resolved_config")) user = user["resolved_config"];
  }
  std::vector<std::string> overrides = o.sets;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (!o.out.empty()) overrides.push_back("output=" + json(o.out).dump());
  if (o.attack) overrides.push_back("attack.kind=" + json(*o.attack).dump());
  if (o.budget) overrides.push_back("attack.budget=" + std::to_string(*o.budget));
  if (o.experiment) overrides.push_back("harness.experiment=" + json(*o.experiment).dump());
  return trap::resolve_config(user, overrides);
}

json dataset_summary(const trap::Dataset& d) {
  std::size_t nodes = 0, edges = 0;
  for (const auto& g : d.graphs) {
    nodes += g.num_nodes();
    edges += g.edges().size();
  }
  return {{"name", d.name},
          {"graphs", d.size()},
          {"num_classes", d.num_classes},
          {"class_counts", d.class_counts()},
          {"raw_labels", d.raw_labels},
          {"feature_dim", d.graphs.empty() ? 0 : d.graphs.front().feature_dim()},
          {"nodes", nodes},
          {"edges", edges},
          {"target_class", trap::target_class(d)}};
}

json derived_seeds(const trap::ExperimentSettings& s) {
  using trap::Stream;
  json out = json::array();
  for (std::uint64_t seed : s.seeds) {
    json victims = json::object();
    for (trap::Arch a : s.victims) {
      const auto k = static_cast<std::uint64_t>(a);
      victims[trap::arch_name(a)] = {{"train", trap::derive_seed(seed, Stream::kVictimTrain, k)},
                                     {"defense_train", trap::derive_seed(seed, Stream::kDefenseTrain, k)},
                                     {"defense_vote", trap::derive_seed(seed, Stream::kDefenseVote, k)}};
    }
    out.push_back({{"seed", seed},
                   {"split", trap::derive_seed(seed, Stream::kSplit)},
                   {"surrogate_train", trap::derive_seed(seed, Stream::kSurrogateTrain)},
                   {"attack", trap::derive_seed(seed, Stream::kAttack)},
                   {"victims", victims}});
  }
  return out;
}

std::string cell_dir_name(const trap::CellArtifacts& a) {
  return "seed" + std::to_string(a.seed) + "_p" + trap::format_number(a.sweep_param);
}

/// Poisoned training set and poisoned test set as TUDataset, with the original ids alongside.
void export_poisoned(const trap::Dataset& d, const trap::CellArtifacts& a, const fs::path& dir) {
  trap::Dataset train{d.name + "_POISONED_TRAIN", {}, d.num_classes, d.raw_labels};
  json roles = json::array();
  for (std::size_t id : a.split.train_ids) {
    train.graphs.push_back(d.graphs[id]);
    roles.push_back({{"id", id}, {"role", "clean"}});
  }
  for (const auto& g : a.poison.train) {
    train.graphs.push_back(g);
    roles.push_back({{"id", g.id()}, {"role", "poisoned"}});
  }
  trap::Dataset test{d.name + "_POISONED_TEST", a.poison.test, d.num_classes, d.raw_labels};
  json test_ids = json::array();
  for (const auto& g : a.poison.test) test_ids.push_back(g.id());
  trap::save_tudataset(train, dir, train.name);
  if (!test.graphs.empty()) trap::save_tudataset(test, dir, test.name);
  const json sidecar = {{"target", a.poison.plan.target},
                        {"train", {{"name", train.name}, {"rows", roles}}},
                        {"test", {{"name", test.name}, {"ids", test_ids}}},
                        {"clean_test_ids", a.split.test_ids}};
  trap::write_text(dir / "poisoned.json", sidecar.dump(2) + "\n");
}

void write_outputs(const trap::Dataset& d, const json& resolved, const trap::ExperimentSettings& s,
                   const trap::ExperimentReport& report, const fs::path& dir) {
  trap::write_text(dir / "report.json", trap::report_to_json(report).dump(2) + "\n");
  trap::write_text(dir / "report.csv", trap::report_to_csv(report));
  if (report.sweep_axis != "none") trap::write_text(dir / ("sweep_" + report.sweep_axis + ".csv"), trap::sweep_csv(report));

  const bool checkpoints = resolved["harness"]["export_checkpoints"].get<bool>();
  const bool poisoned = resolved["harness"]["export_poisoned"].get<bool>();
  for (const auto& a : report.artifacts) {
    const fs::path cell = dir / "cells" / cell_dir_name(a);
    std::string surrogate_file;
    if (checkpoints && a.poison.plan.surrogate) {
      surrogate_file = "checkpoints/surrogate.json";
      trap::save_checkpoint(*a.poison.plan.surrogate, cell / surrogate_file);
    }
    if (checkpoints) {
      for (const auto& [name, model] : a.models) trap::save_checkpoint(model, cell / "checkpoints" / (name + ".json"));
    }
    trap::write_text(cell / "plan.json", trap::plan_to_json(a.poison.plan, surrogate_file).dump(2) + "\n");
    if (poisoned) export_poisoned(d, a, cell / "poisoned");
  }

  const json manifest = {{"format", "trap-manifest/1"},
                         {"resolved_config", resolved},
                         {"target", report.target},
                         {"derived_seeds", derived_seeds(s)}};
  trap::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_validate(const Options& o) {
  std::cout << load_config(o).dump(2) << '\n';
  return 0;
}

int cmd_synth(const Options& o) {
  Options with_seed = o;
  if (o.seed) {
    with_seed.sets.push_back("dataset.synthetic.seed=" + std::to_string(*o.seed));
    with_seed.seed.reset();
  }
  with_seed.out.clear();
  json resolved = load_config(with_seed);
  resolved["dataset"]["source"] = "synthetic";
  const trap::Dataset d = trap::dataset_from_config(resolved);
  const fs::path out = o.out.empty() ? fs::path(resolved["output"].get<std::string>()) : fs::path(o.out);
  trap::save_tudataset(d, out, d.name);
  std::cout << dataset_summary(d).dump(2) << '\n';
  return 0;
}

int cmd_ingest(const Options& o) {
  const trap::Dataset d = trap::load_tudataset(o.path, o.name);
  d.validate();
  if (!o.out.empty()) trap::save_tudataset(d, o.out, d.name);
  std::cout << dataset_summary(d).dump(2) << '\n';
  return 0;
}

int cmd_run(const Options& o) {
  const json resolved = load_config(o);
  trap::ExperimentSettings s = trap::settings_from_config(resolved);
  s.jobs = o.jobs.value_or(std::max(1u, std::thread::hardware_concurrency()));
  s.keep_artifacts = resolved["harness"]["export_checkpoints"].get<bool>() ||
                     resolved["harness"]["export_poisoned"].get<bool>();

  const fs::path out = resolved["output"].get<std::string>();
  if (fs::exists(out) && !fs::is_empty(out) && !fs::exists(out / "manifest.json")) {
    throw trap::ConfigError("output", out.string() + " exists and is not a previous run directory");
  }

  const trap::Dataset d = trap::dataset_from_config(resolved);
  const trap::ExperimentReport report = trap::run_experiment(d, s);

  // Everything lands in a sibling staging directory first, so a failure leaves
  // no partial output behind.
  fs::path staging = out;
  staging += ".staging";
  fs::remove_all(staging);
  try {
    write_outputs(d, resolved, s, report, staging);
    fs::remove_all(out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    fs::rename(staging, out);
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw;
  }

  json summary = json::array();
  for (const auto& m : report.means()) {
    summary.push_back({{"victim", m.victim},
                       {"widths", m.widths},
                       {"sweep_param", m.sweep_param},
                       {"clean_acc", m.clean_acc},
                       {"backdoor_acc", m.backdoor_acc},
                       {"asr", m.asr},
                       {"cad", m.cad}});
  }
  std::cout << json{{"output", out.string()}, {"mean", summary}}.dump(2) << '\n';
  return 0;
}

int cmd_report(const Options& o) {
  json j;
  try {
    j = json::parse(trap::read_text(o.report_path));
  } catch (const json::parse_error& e) {
    throw trap::DataError(o.report_path + ": not valid JSON: " + e.what());
  }
  const trap::ExperimentReport report = trap::report_from_json(j);
  if (o.format == "csv") {
    std::cout << trap::report_to_csv(report);
  } else if (o.format == "sweep") {
    std::cout << trap::sweep_csv(report);
  } else {
    std::cout << trap::report_to_json(report).dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph backdoor lab: poison, train, evaluate and defend"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config, or a manifest.json from a previous run");
    sub->add_option("--set", o.sets, "Dotted-path override, e.g. attack.budget=3 (repeatable)");
  };

  auto* validate = app.add_subcommand("validate", "Print the fully resolved configuration");
  add_config(validate);

  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset and export it as TUDataset");
  add_config(synth);
  synth->add_option("--seed", o.seed, "Dataset generator seed");
  synth->add_option("--out", o.out, "Output directory");

  auto* ingest = app.add_subcommand("ingest", "Load and validate a TUDataset directory");
  ingest->add_option("--path", o.path, "Dataset directory")->required();
  ingest->add_option("--name", o.name, "Dataset name (file prefix)")->required();
  ingest->add_option("--out", o.out, "Re-export the parsed dataset here");

  auto* run = app.add_subcommand("run", "Run the configured experiment and write artifacts");
  add_config(run);
  run->add_option("--seed", o.seed, "Experiment seed");
  run->add_option("--jobs", o.jobs, "Worker threads (default: number of processors)")->check(CLI::PositiveNumber);
  run->add_option("--out", o.out, "Output directory");
  run->add_option("--attack", o.attack, "Shorthand for --set attack.kind=...");
  run->add_option("--budget", o.budget, "Shorthand for --set attack.budget=...");
  run->add_option("--experiment", o.experiment, "Shorthand for --set harness.experiment=...");

  auto* report = app.add_subcommand("report", "Re-emit a report.json as CSV, sweep CSV or JSON");
  report->add_option("report", o.report_path, "report.json")->required();
  report->add_option("--format", o.format, "csv, sweep or json")->check(CLI::IsMember({"csv", "sweep", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, "usage", e.what());
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*synth) return cmd_synth(o);
    if (*ingest) return cmd_ingest(o);
    if (*run) return cmd_run(o);
    if (*report) return cmd_report(o);
  } catch (const trap::ConfigError& e) {
    return fail(kExitConfig, "config", e.what(), e.diagnostics());
  } catch (const trap::DataError& e) {
    return fail(kExitData, "data", e.what());
  } catch (const json::exception& e) {
    return fail(kExitData, "data", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, "runtime", e.what());
  }
  return fail(kExitRuntime, "runtime", "no subcommand");
}
