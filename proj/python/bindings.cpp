#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <thread>

#include "trap/attacks.hpp"
#include "trap/config.hpp"
#include "trap/defense.hpp"
#include "trap/gnn.hpp"
#include "trap/graph.hpp"
#include "trap/harness.hpp"
#include "trap/serialize.hpp"

namespace py = pybind11;
using trap::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

// JSON crosses the boundary as text; the Python side wraps it with json.loads/dumps.
trap::json parse(const std::string& s) { return s.empty() ? trap::json::object() : trap::json::parse(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph backdoor lab core (C++)";

  py::register_exception<trap::DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<trap::ShapeError>(m, "ShapeError", PyExc_ValueError);
  static py::exception<trap::ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const trap::ConfigError& e) {
      config_error(e.what());
    }
  });

  py::enum_<trap::Arch>(m, "Arch")
      .value("GCN", trap::Arch::kGCN)
      .value("GIN", trap::Arch::kGIN)
      .value("GSAGE", trap::Arch::kGSAGE)
      .value("GAT", trap::Arch::kGAT);

  py::class_<trap::Graph>(m, "Graph")
      .def(py::init([](const Array& a, const Array& x, std::size_t label, std::size_t id) {
             return trap::Graph(to_matrix(a), to_matrix(x), label, id);
           }),
           py::arg("adjacency"), py::arg("features"), py::arg("label") = 0, py::arg("id") = 0)
      .def_property_readonly("adjacency", [](const trap::Graph& g) { return to_array(g.adjacency()); })
      .def_property_readonly("features", [](const trap::Graph& g) { return to_array(g.features()); })
      .def_property_readonly("label", &trap::Graph::label)
      .def_property_readonly("id", &trap::Graph::id)
      .def_property_readonly("num_nodes", &trap::Graph::num_nodes)
      .def_property_readonly("num_edges", &trap::Graph::num_edges)
      .def("edges", &trap::Graph::edges)
      .def("with_label", &trap::Graph::with_label)
      .def("__eq__", [](const trap::Graph& a, const trap::Graph& b) { return a == b; })
      .def("__repr__", [](const trap::Graph& g) {
        return "<Graph id=" + std::to_string(g.id()) + " n=" + std::to_string(g.num_nodes()) +
               " edges=" + std::to_string(g.num_edges()) + " label=" + std::to_string(g.label()) + ">";
      });

  py::class_<trap::Dataset>(m, "Dataset")
      .def_readonly("name", &trap::Dataset::name)
      .def_readonly("graphs", &trap::Dataset::graphs)
      .def_readonly("num_classes", &trap::Dataset::num_classes)
      .def_readonly("raw_labels", &trap::Dataset::raw_labels)
      .def("class_counts", &trap::Dataset::class_counts)
      .def("__len__", &trap::Dataset::size)
      .def("__eq__", [](const trap::Dataset& a, const trap::Dataset& b) { return a == b; });

  py::class_<trap::SplitPlan>(m, "SplitPlan")
      .def_readonly("seed", &trap::SplitPlan::seed)
      .def_readonly("target", &trap::SplitPlan::target)
      .def_readonly("train_ids", &trap::SplitPlan::train_ids)
      .def_readonly("test_ids", &trap::SplitPlan::test_ids)
      .def_readonly("candidate_ids", &trap::SplitPlan::candidate_ids)
      .def_readonly("poison_train_ids", &trap::SplitPlan::poison_train_ids)
      .def_readonly("poison_test_ids", &trap::SplitPlan::poison_test_ids);

  m.def("synth_dataset",
        [](const std::vector<std::tuple<std::size_t, double, std::size_t>>& classes, std::size_t feature_dim,
           std::uint64_t seed, const std::string& name) {
          trap::SynthSpec spec;
          for (auto [n, p, c] : classes) spec.classes.push_back({n, p, c});
          spec.feature_dim = feature_dim;
          spec.seed = seed;
          spec.name = name;
          return trap::synth_dataset(spec);
        },
        py::arg("classes"), py::arg("feature_dim") = 4, py::arg("seed") = 0, py::arg("name") = "SYNTH",
        "classes: list of (n_nodes, edge_prob, count)");
  m.def("canonical_dataset", [](std::uint64_t seed) { return trap::synth_dataset(trap::canonical_synth_spec(seed)); },
        py::arg("seed") = 0);
  m.def("load_tudataset", &trap::load_tudataset, py::arg("path"), py::arg("name"));
  m.def("save_tudataset", &trap::save_tudataset, py::arg("dataset"), py::arg("path"), py::arg("name"));
  m.def("target_class", &trap::target_class);
  m.def("split", &trap::split, py::arg("dataset"), py::arg("target"), py::arg("seed"));
  m.def("flip_edge", &trap::flip_edge);
  m.def("flip_edges", &trap::flip_edges);
  m.def("edit_distance", &trap::edit_distance);
  m.def("normalize_adjacency", [](const Array& a) { return to_array(trap::normalize_adjacency(to_matrix(a))); });

  py::class_<trap::ModelState>(m, "ModelState")
      .def_property_readonly("arch", [](const trap::ModelState& s) { return s.config.arch; })
      .def_property_readonly("layer_widths", [](const trap::ModelState& s) { return s.config.layer_widths; })
      .def_property_readonly("params", [](const trap::ModelState& s) {
        py::list out;
        for (const auto& p : s.params) out.append(to_array(p));
        return out;
      })
      .def("to_json", [](const trap::ModelState& s) { return trap::checkpoint_to_json(s).dump(); })
      .def_static("from_json", [](const std::string& s) { return trap::checkpoint_from_json(trap::json::parse(s)); })
      .def("__eq__", [](const trap::ModelState& a, const trap::ModelState& b) { return a == b; });

  auto make_config = [](trap::Arch arch, std::vector<std::size_t> widths, std::size_t heads, std::size_t d,
                        std::size_t k) {
    trap::ModelConfig c;
    c.arch = arch;
    c.layer_widths = std::move(widths);
    c.gat_heads = heads;
    c.input_dim = d;
    c.num_classes = k;
    return c;
  };
  m.def("init_model",
        [make_config](trap::Arch arch, std::size_t input_dim, std::size_t num_classes,
                      std::vector<std::size_t> widths, std::size_t gat_heads, std::uint64_t seed) {
          return trap::init_model(make_config(arch, std::move(widths), gat_heads, input_dim, num_classes), seed);
        },
        py::arg("arch"), py::arg("input_dim"), py::arg("num_classes"),
        py::arg("widths") = std::vector<std::size_t>{16, 8}, py::arg("gat_heads") = 3, py::arg("seed") = 0);
  m.def("train",
        [make_config](const std::vector<trap::Graph>& graphs, trap::Arch arch, std::size_t num_classes,
                      std::vector<std::size_t> widths, std::size_t gat_heads, std::size_t epochs, double lr,
                      std::size_t batch_size, std::uint64_t seed) {
          if (graphs.empty()) throw py::value_error("train: no graphs");
          trap::TrainConfig t;
          t.epochs = epochs;
          t.lr = lr;
          t.batch_size = batch_size;
          t.seed = seed;
          py::gil_scoped_release release;
          return trap::train(graphs,
                             make_config(arch, std::move(widths), gat_heads, graphs.front().feature_dim(), num_classes),
                             t);
        },
        py::arg("graphs"), py::arg("arch") = trap::Arch::kGCN, py::arg("num_classes") = 2,
        py::arg("widths") = std::vector<std::size_t>{16, 8}, py::arg("gat_heads") = 3, py::arg("epochs") = 50,
        py::arg("lr") = 0.02, py::arg("batch_size") = 100, py::arg("seed") = 0);
  m.def("logits", [](const trap::ModelState& s, const trap::Graph& g) { return to_array(trap::forward(s, g).logits); });
  m.def("predict", &trap::predict);
  m.def("accuracy", [](const trap::ModelState& s, const std::vector<trap::Graph>& gs) { return trap::accuracy(s, gs); });
  m.def("loss_and_gradients",
        [](const trap::ModelState& s, const Array& adjacency, const Array& features, std::size_t label,
           bool want_adjacency) {
          const auto trace = trap::forward(s, to_matrix(adjacency), to_matrix(features));
          const auto g = trap::backward(s, trace, label, want_adjacency);
          py::list params;
          for (const auto& p : g.params) params.append(to_array(p));
          py::object adj = py::none();
          if (g.adjacency) adj = to_array(*g.adjacency);
          return py::make_tuple(g.loss, params, adj);
        },
        py::arg("state"), py::arg("adjacency"), py::arg("features"), py::arg("label"),
        py::arg("want_adjacency") = false,
        "Loss, parameter gradients and (GCN only) the symmetrized dL/dA for a possibly fractional adjacency.");

  m.def("attack_gradient", [](const trap::ModelState& s, const trap::Graph& g, std::size_t target) {
    return to_array(trap::attack_gradient(s, g, target));
  });
  m.def("score_matrix", [](const Array& grad, const Array& a) {
    return to_array(trap::score_matrix(to_matrix(grad), to_matrix(a)));
  });
  m.def("select_perturbations", [](const Array& s, std::size_t budget) {
    return trap::select_perturbations(to_matrix(s), budget);
  });
  m.def("trap_trigger",
        [](const trap::ModelState& s, const trap::Graph& g, std::size_t target, std::size_t budget, bool sequential) {
          return trap::trap_trigger(s, g, target, budget, trap::TrapOptions{sequential});
        },
        py::arg("surrogate"), py::arg("graph"), py::arg("target"), py::arg("budget") = 5,
        py::arg("sequential") = false);
  m.def("subsample_view", &trap::subsample_view, py::arg("graph"), py::arg("ratio"), py::arg("seed"));
  m.def("predict_voted",
        [](const trap::ModelState& s, const trap::Graph& g, double ratio, std::size_t views, std::uint64_t seed) {
          return trap::predict_voted(s, g, trap::DefenseConfig{ratio, views, seed});
        },
        py::arg("state"), py::arg("graph"), py::arg("ratio") = 0.1, py::arg("views") = 10, py::arg("seed") = 0);
  m.def("cad", &trap::cad);

  m.def("default_config_json", [] { return trap::default_config().dump(); });
  m.def("resolve_config_json",
        [](const std::string& config, const std::vector<std::string>& overrides) {
          return trap::resolve_config(parse(config), overrides).dump();
        },
        py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{});
  m.def("run_experiment_json",
        [](const std::string& config, const std::vector<std::string>& overrides, std::size_t jobs) {
          const auto resolved = trap::resolve_config(parse(config), overrides);
          auto settings = trap::settings_from_config(resolved);
          settings.jobs = jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : jobs;
          const auto d = trap::dataset_from_config(resolved);
          py::gil_scoped_release release;
          return trap::report_to_json(trap::run_experiment(d, settings)).dump();
        },
        py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{}, py::arg("jobs") = 0);
  m.def("report_csv_json", [](const std::string& report) {
    return trap::report_to_csv(trap::report_from_json(trap::json::parse(report)));
  });
}
