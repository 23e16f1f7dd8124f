#include "trap/config.hpp"

#include <limits>
#include <set>

namespace trap {

namespace {

std::string join(const std::vector<Diagnostic>& diags) {
  std::string out = "invalid configuration:";
  for (const auto& d : diags) out += "\n  " + d.path + ": " + d.message;
  return out;
}

std::string child(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

/// Overlays user onto defaults; keys absent from defaults are diagnosed.
void merge(json& base, const json& user, const std::string& path, std::vector<Diagnostic>& diags) {
  if (!user.is_object()) {
    diags.push_back({path.empty() ? "<root>" : path, "expected an object"});
    return;
  }
  for (const auto& [key, value] : user.items()) {
    const std::string p = child(path, key);
    if (!base.contains(key)) {
      diags.push_back({p, "unknown key '" + key + "'"});
      continue;
    }
    json& slot = base[key];
    // "dataset.synthetic.classes" is a list of records, handled in validation.
    if (slot.is_object() && !value.is_null()) {
      merge(slot, value, p, diags);
    } else {
      slot = value;
    }
  }
}

class Checker {
 public:
  explicit Checker(json& root) : root_(root) {}

  json& at(const std::string& path) {
    json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      node = &(*node)[path.substr(start, dot == std::string::npos ? dot : dot - start)];
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }

  void fail(const std::string& path, const std::string& message) { diags_.push_back({path, message}); }

  bool number(const std::string& path, double lo, double hi, bool lo_open = false, bool hi_open = false) {
    const json& v = at(path);
    if (!v.is_number()) {
      fail(path, "expected a number");
      return false;
    }
    return number_value(path, v.get<double>(), lo, hi, lo_open, hi_open);
  }

  bool number_value(const std::string& path, double x, double lo, double hi, bool lo_open, bool hi_open) {
    const bool ok = (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      fail(path, "value " + format_number(x) + " outside " + (lo_open ? "(" : "[") +
                     format_number(lo) + ", " + format_number(hi) + (hi_open ? ")" : "]"));
    }
    return ok;
  }

  bool integer(const std::string& path, long long lo, long long hi = std::numeric_limits<long long>::max()) {
    return integer_value(path, at(path), lo, hi);
  }

  bool integer_value(const std::string& path, const json& v, long long lo, long long hi) {
    if (!v.is_number_integer()) {
      fail(path, "expected an integer");
      return false;
    }
    const long long x = v.get<long long>();
    if (x < lo || x > hi) {
      fail(path, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                     (hi == std::numeric_limits<long long>::max() ? std::string("inf") : std::to_string(hi)) + "]");
      return false;
    }
    return true;
  }

  bool boolean(const std::string& path) {
    if (!at(path).is_boolean()) {
      fail(path, "expected true or false");
      return false;
    }
    return true;
  }

  bool one_of(const std::string& path, const std::set<std::string>& allowed) {
    const json& v = at(path);
    if (!v.is_string() || !allowed.contains(v.get<std::string>())) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(path, "expected one of {" + list + "}");
      return false;
    }
    return true;
  }

  bool int_list(const std::string& path, long long lo, bool allow_empty = false) {
    const json& v = at(path);
    if (!v.is_array() || (!allow_empty && v.empty())) {
      fail(path, allow_empty ? "expected a list of integers" : "expected a non-empty list of integers");
      return false;
    }
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      ok &= integer_value(path + "[" + std::to_string(i) + "]", v[i], lo, std::numeric_limits<long long>::max());
    }
    return ok;
  }

  bool rate_list(const std::string& path) {
    const json& v = at(path);
    if (!v.is_array() || v.empty()) {
      fail(path, "expected a non-empty list of numbers");
      return false;
    }
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (!v[i].is_number()) {
        fail(p, "expected a number");
        ok = false;
      } else {
        ok &= number_value(p, v[i].get<double>(), 0.0, 1.0, false, false);
      }
    }
    return ok;
  }

  std::vector<Diagnostic>& diagnostics() { return diags_; }

 private:
  json& root_;
  std::vector<Diagnostic> diags_;
};

json default_victims(const std::string& experiment) {
  if (experiment == "transfer") return {"GCN", "GIN", "GSAGE", "GAT"};
  return {"GCN"};
}

}  // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

json default_config() {
  return json::parse(R"({
    "dataset": {
      "source": "synthetic",
      "path": null,
      "name": "SYNTH",
      "synthetic": {
        "classes": [
          {"n_nodes": 12, "edge_prob": 0.2, "count": 60},
          {"n_nodes": 12, "edge_prob": 0.6, "count": 60}
        ],
        "feature_dim": 4,
        "seed": 0
      }
    },
    "attack": {
      "kind": "trap",
      "budget": 5,
      "target_class": "min-class",
      "poison_rate": 0.05,
      "rate_mode": "split",
      "trigger_size": 5,
      "trigger_density": 0.8,
      "sequential": false
    },
    "model": {
      "widths": [16, 8],
      "victim_widths": null,
      "gat_heads": 3,
      "victims": null
    },
    "train": {
      "optimizer": "adam",
      "lr": 0.02,
      "weight_decay": 0.0005,
      "beta1": 0.9,
      "beta2": 0.999,
      "eps": 1e-8,
      "batch_size": 100,
      "epochs": 50
    },
    "defense": {
      "subsample_ratio": 0.1,
      "num_views": 10
    },
    "harness": {
      "experiment": "effectiveness",
      "num_seeds": 5,
      "rates": [0.01, 0.03, 0.05, 0.07],
      "budgets": [1, 3, 5, 7],
      "record_timing": false,
      "export_checkpoints": true,
      "export_poisoned": true
    },
    "seed": 0,
    "output": "trap_out"
  })");
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  if (!config.is_object()) config = json::object();
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    json& next = (*node)[key];
    if (!next.is_object()) next = json::object();
    node = &next;
    start = dot + 1;
  }
}

json resolve_config(const json& config, const std::vector<std::string>& overrides) {
  json user = config.is_null() ? json::object() : config;
  for (const auto& o : overrides) apply_override(user, o);

  json out = default_config();
  std::vector<Diagnostic> merge_diags;
  merge(out, user, "", merge_diags);
  if (!merge_diags.empty()) throw ConfigError(merge_diags);

  Checker c(out);
  // dataset
  if (c.one_of("dataset.source", {"synthetic", "tudataset"})) {
    if (c.at("dataset.source") == "tudataset" && !c.at("dataset.path").is_string()) {
      c.fail("dataset.path", "required when dataset.source is tudataset");
    }
  }
  if (!c.at("dataset.path").is_null() && !c.at("dataset.path").is_string()) c.fail("dataset.path", "expected a string");
  if (!c.at("dataset.name").is_string() || c.at("dataset.name").get<std::string>().empty()) {
    c.fail("dataset.name", "expected a non-empty string");
  }
  {
    const json& classes = c.at("dataset.synthetic.classes");
    if (!classes.is_array() || classes.size() < 2) {
      c.fail("dataset.synthetic.classes", "expected a list of at least 2 classes");
    } else {
      for (std::size_t i = 0; i < classes.size(); ++i) {
        const std::string p = "dataset.synthetic.classes[" + std::to_string(i) + "]";
        const json& cls = classes[i];
        if (!cls.is_object()) {
          c.fail(p, "expected {n_nodes, edge_prob, count}");
          continue;
        }
        for (const auto& [key, _] : cls.items()) {
          if (key != "n_nodes" && key != "edge_prob" && key != "count") c.fail(p + "." + key, "unknown key '" + key + "'");
        }
        for (const char* key : {"n_nodes", "edge_prob", "count"}) {
          if (!cls.contains(key)) c.fail(p + "." + key, "missing");
        }
        if (cls.contains("n_nodes")) c.integer_value(p + ".n_nodes", cls["n_nodes"], 1, std::numeric_limits<long long>::max());
        if (cls.contains("count")) c.integer_value(p + ".count", cls["count"], 0, std::numeric_limits<long long>::max());
        if (cls.contains("edge_prob")) {
          if (!cls["edge_prob"].is_number()) c.fail(p + ".edge_prob", "expected a number");
          else c.number_value(p + ".edge_prob", cls["edge_prob"].get<double>(), 0.0, 1.0, false, false);
        }
      }
    }
  }
  c.integer("dataset.synthetic.feature_dim", 1);
  c.integer("dataset.synthetic.seed", 0);

  // attack
  c.one_of("attack.kind", {"trap", "subgraph", "random"});
  c.integer("attack.budget", 0);
  {
    const json& t = c.at("attack.target_class");
    if (!(t.is_string() && t == "min-class")) {
      if (t.is_number_integer()) c.integer("attack.target_class", 0);
      else c.fail("attack.target_class", "expected \"min-class\" or a class index");
    }
  }
  c.number("attack.poison_rate", 0.0, 1.0);
  c.one_of("attack.rate_mode", {"split", "override"});
  c.integer("attack.trigger_size", 2);
  c.number("attack.trigger_density", 0.0, 1.0);
  c.boolean("attack.sequential");

  // model
  c.int_list("model.widths", 1);
  if (!c.at("model.victim_widths").is_null()) c.int_list("model.victim_widths", 1);
  c.integer("model.gat_heads", 1);
  if (!c.at("model.victims").is_null()) {
    const json& v = c.at("model.victims");
    if (!v.is_array() || v.empty()) {
      c.fail("model.victims", "expected a non-empty list of architectures");
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = "model.victims[" + std::to_string(i) + "]";
        try {
          if (!v[i].is_string()) throw std::invalid_argument("");
          (void)parse_arch(v[i].get<std::string>());
        } catch (const std::exception&) {
          c.fail(p, "expected one of {GCN, GIN, GSAGE, GAT}");
        }
      }
    }
  }

  // train
  c.one_of("train.optimizer", {"adam"});
  c.number("train.lr", 0.0, 1e9, true);
  c.number("train.weight_decay", 0.0, 1e9);
  c.number("train.beta1", 0.0, 1.0, false, true);
  c.number("train.beta2", 0.0, 1.0, false, true);
  c.number("train.eps", 0.0, 1.0, true);
  c.integer("train.batch_size", 1);
  c.integer("train.epochs", 0);

  // defense
  c.number("defense.subsample_ratio", 0.0, 1.0);
  c.integer("defense.num_views", 1);

  // harness
  c.one_of("harness.experiment", {"effectiveness", "transfer", "rate_sweep", "budget_sweep", "defense"});
  c.integer("harness.num_seeds", 1);
  c.rate_list("harness.rates");
  c.int_list("harness.budgets", 0);
  c.boolean("harness.record_timing");
  c.boolean("harness.export_checkpoints");
  c.boolean("harness.export_poisoned");

  c.integer("seed", 0);
  if (!c.at("output").is_string() || c.at("output").get<std::string>().empty()) {
    c.fail("output", "expected a non-empty path");
  }

  if (!c.diagnostics().empty()) throw ConfigError(c.diagnostics());

  // Resolve nulls.
  if (out["model"]["victim_widths"].is_null()) out["model"]["victim_widths"] = out["model"]["widths"];
  if (out["model"]["victims"].is_null()) {
    out["model"]["victims"] = default_victims(out["harness"]["experiment"].get<std::string>());
  } else {
    for (auto& v : out["model"]["victims"]) v = arch_name(parse_arch(v.get<std::string>()));
  }
  return out;
}

ExperimentSettings settings_from_config(const json& r) {
  ExperimentSettings s;
  s.experiment = parse_experiment(r["harness"]["experiment"].get<std::string>());
  s.attack = parse_attack(r["attack"]["kind"].get<std::string>());
  s.budget = r["attack"]["budget"].get<std::size_t>();
  if (r["attack"]["target_class"].is_number_integer()) s.target = r["attack"]["target_class"].get<std::size_t>();
  if (r["attack"]["rate_mode"] == "override") s.poison_rate = r["attack"]["poison_rate"].get<double>();
  s.trigger_size = r["attack"]["trigger_size"].get<std::size_t>();
  s.trigger_density = r["attack"]["trigger_density"].get<double>();
  s.sequential = r["attack"]["sequential"].get<bool>();

  s.surrogate_widths = r["model"]["widths"].get<std::vector<std::size_t>>();
  s.victim_widths = r["model"]["victim_widths"].get<std::vector<std::size_t>>();
  s.gat_heads = r["model"]["gat_heads"].get<std::size_t>();
  s.victims.clear();
  for (const auto& v : r["model"]["victims"]) s.victims.push_back(parse_arch(v.get<std::string>()));

  const json& t = r["train"];
  s.train.lr = t["lr"].get<double>();
  s.train.weight_decay = t["weight_decay"].get<double>();
  s.train.beta1 = t["beta1"].get<double>();
  s.train.beta2 = t["beta2"].get<double>();
  s.train.eps = t["eps"].get<double>();
  s.train.batch_size = t["batch_size"].get<std::size_t>();
  s.train.epochs = t["epochs"].get<std::size_t>();

  s.defense.subsample_ratio = r["defense"]["subsample_ratio"].get<double>();
  s.defense.num_views = r["defense"]["num_views"].get<std::size_t>();

  const std::uint64_t base = r["seed"].get<std::uint64_t>();
  s.seeds.clear();
  for (std::uint64_t i = 0; i < r["harness"]["num_seeds"].get<std::uint64_t>(); ++i) s.seeds.push_back(base + i);
  s.rates = r["harness"]["rates"].get<std::vector<double>>();
  s.budgets = r["harness"]["budgets"].get<std::vector<std::size_t>>();
  s.record_timing = r["harness"]["record_timing"].get<bool>();
  return s;
}

Dataset dataset_from_config(const json& r) {
  const json& ds = r.at("dataset");
  if (ds.at("source") == "tudataset") {
    return load_tudataset(ds.at("path").get<std::string>(), ds.at("name").get<std::string>());
  }
  SynthSpec spec;
  spec.name = ds.at("name").get<std::string>();
  spec.feature_dim = ds.at("synthetic").at("feature_dim").get<std::size_t>();
  spec.seed = ds.at("synthetic").at("seed").get<std::uint64_t>();
  for (const auto& cls : ds.at("synthetic").at("classes")) {
    spec.classes.push_back({cls.at("n_nodes").get<std::size_t>(), cls.at("edge_prob").get<double>(),
                            cls.at("count").get<std::size_t>()});
  }
  return synth_dataset(spec);
}

}  // namespace trap
