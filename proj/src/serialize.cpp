#include "trap/serialize.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace trap {

namespace {

constexpr const char* kCheckpointFormat = "trap-checkpoint/1";

std::string encode_f64le(std::span<const double> values) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xffU);
      out.push_back(kHex[b >> 4]);
      out.push_back(kHex[b & 0xf]);
    }
  }
  return out;
}

std::vector<double> decode_f64le(const std::string& hex) {
  if (hex.size() % 16 != 0) throw std::invalid_argument("checkpoint: f64le payload length");
  auto nibble = [](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    throw std::invalid_argument("checkpoint: bad hex digit");
  };
  std::vector<double> values(hex.size() / 16);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t pos = i * 16 + static_cast<std::size_t>(byte) * 2;
      bits |= ((nibble(hex[pos]) << 4) | nibble(hex[pos + 1])) << (8 * byte);
    }
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"f64le", encode_f64le(m.values())}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                decode_f64le(j.at("f64le").get<std::string>()));
}

json model_config_to_json(const ModelConfig& c) {
  return {{"arch", arch_name(c.arch)},
          {"layer_widths", c.layer_widths},
          {"gat_heads", c.gat_heads},
          {"input_dim", c.input_dim},
          {"num_classes", c.num_classes},
          {"activation", "relu"},
          {"pooling", "max"}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
  c.gat_heads = j.at("gat_heads").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.validate();
  return c;
}

json checkpoint_to_json(const ModelState& state) {
  json params = json::array();
  for (const auto& p : state.params) params.push_back(matrix_to_json(p));
  return {{"format", kCheckpointFormat}, {"config", model_config_to_json(state.config)},
          {"params", std::move(params)}};
}

ModelState checkpoint_from_json(const json& j) {
  if (j.value("format", "") != kCheckpointFormat) {
    throw std::invalid_argument("checkpoint: unknown format tag");
  }
  ModelState state = zero_model(model_config_from_json(j.at("config")));
  const auto& params = j.at("params");
  if (params.size() != state.params.size()) {
    throw std::invalid_argument("checkpoint: expected " + std::to_string(state.params.size()) +
                                " parameter tensors, found " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix m = matrix_from_json(params[i]);
    if (m.rows() != state.params[i].rows() || m.cols() != state.params[i].cols()) {
      throw std::invalid_argument("checkpoint: tensor " + std::to_string(i) + " has shape " +
                                  shape_string(m) + ", config implies " +
                                  shape_string(state.params[i]));
    }
    state.params[i] = std::move(m);
  }
  return state;
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  write_text(path, checkpoint_to_json(state).dump(1) + "\n");
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(json::parse(read_text(path)));
}

json plan_to_json(const PoisonPlan& plan, const std::string& surrogate_checkpoint) {
  json graphs = json::array();
  for (std::size_t i = 0; i < plan.candidate_ids.size(); ++i) {
    json flips = json::array();
    for (auto [u, v] : plan.flips[i]) flips.push_back({u, v});
    graphs.push_back({{"id", plan.candidate_ids[i]}, {"flips", std::move(flips)}});
  }
  json j = {{"attack", plan.attack},
            {"y_t", plan.target},
            {"M", plan.budget},
            {"seed", plan.seed},
            {"graphs", std::move(graphs)}};
  j["surrogate_checkpoint"] = surrogate_checkpoint.empty() ? json(nullptr) : json(surrogate_checkpoint);
  return j;
}

PoisonPlan plan_from_json(const json& j) {
  PoisonPlan plan;
  plan.attack = j.at("attack").get<std::string>();
  plan.target = j.at("y_t").get<std::size_t>();
  plan.budget = j.at("M").get<std::size_t>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& g : j.at("graphs")) {
    plan.candidate_ids.push_back(g.at("id").get<std::size_t>());
    std::vector<NodePair> flips;
    for (const auto& f : g.at("flips")) flips.emplace_back(f.at(0).get<std::size_t>(), f.at(1).get<std::size_t>());
    plan.flips.push_back(std::move(flips));
  }
  return plan;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace trap
