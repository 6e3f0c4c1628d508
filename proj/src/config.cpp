#include "febounds/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "febounds/errors.hpp"

namespace febounds {

using nlohmann::json;

std::string_view to_string(OracleChoice choice) {
  switch (choice) {
    case OracleChoice::Auto:
      return "auto";
    case OracleChoice::Gaussian:
      return "gaussian";
    case OracleChoice::Enumeration:
      return "enumeration";
    case OracleChoice::Quadrature:
      return "quadrature";
    case OracleChoice::None:
      return "none";
  }
  return "unknown";
}

std::vector<double> uniform_alpha_grid(std::size_t points) {
  if (points < 2) throw InputError("a uniform alpha grid needs at least 2 points");
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i)
    out[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return out;
}

namespace {

std::string child(const std::string& path, std::string_view key) {
  return fmt::format("{}.{}", path, key);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(child(path, key), "unknown key");
  }
}

const json& required(const json& j, const std::string& path, std::string_view key) {
  auto it = j.find(std::string(key));
  if (it == j.end()) throw ConfigError(child(path, key), "required key missing");
  return *it;
}

double as_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

std::uint64_t as_unsigned(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw ConfigError(path, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

double real_or(const json& j, const std::string& path, std::string_view key, double fallback) {
  auto it = j.find(std::string(key));
  return it == j.end() ? fallback : as_real(*it, child(path, key));
}

std::vector<double> real_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_real(j[i], fmt::format("{}[{}]", path, i)));
  return out;
}

std::vector<Edge> edge_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of index pairs");
  std::vector<Edge> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = fmt::format("{}[{}]", path, i);
    if (!j[i].is_array() || j[i].size() != 2) throw ConfigError(p, "expected [i, j]");
    out.emplace_back(as_unsigned(j[i][0], p + "[0]"), as_unsigned(j[i][1], p + "[1]"));
  }
  return out;
}

Eigen::MatrixXd row_major(const json& j, const std::string& path, std::size_t dim) {
  const auto values = real_array(j, path);
  if (values.size() != dim * dim)
    throw ConfigError(path, fmt::format("expected {} entries ({}x{} row-major), got {}", dim * dim,
                                        dim, dim, values.size()));
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = values[r * dim + c];
  return m;
}

}  // namespace

ModelConfig parse_model_config(const json& record, const std::string& path) {
  require_object(record, path);
  const json& kind_node = required(record, path, "kind");
  if (!kind_node.is_string()) throw ConfigError(child(path, "kind"), "expected a string");
  ModelKind kind;
  try {
    kind = parse_model_kind(kind_node.get<std::string>());
  } catch (const InputError& e) {
    throw ConfigError(child(path, "kind"), e.what());
  }

  switch (kind) {
    case ModelKind::GaussianPair:
      reject_unknown(record, path, {"kind", "beta", "subsystem_split", "dimension", "D", "C"});
      break;
    case ModelKind::IsingBlock:
      reject_unknown(record, path,
                     {"kind", "beta", "subsystem_split", "dimension", "J", "K", "intra_edges",
                      "cross_edges"});
      break;
    case ModelKind::QuarticPair:
      reject_unknown(record, path, {"kind", "beta", "subsystem_split", "dimension", "a", "c"});
      break;
    case ModelKind::ConstantCoupling:
      reject_unknown(record, path, {"kind", "beta", "subsystem_split", "dimension", "value"});
      break;
  }

  ModelConfig cfg;
  cfg.beta = real_or(record, path, "beta", 1.0);
  const json& split = required(record, path, "subsystem_split");
  if (!split.is_array() || split.empty())
    throw ConfigError(child(path, "subsystem_split"), "expected a non-empty array");
  for (std::size_t i = 0; i < split.size(); ++i)
    cfg.subsystem_split.push_back(
        as_unsigned(split[i], fmt::format("{}.subsystem_split[{}]", path, i)));
  std::size_t dim = 0;
  for (auto s : cfg.subsystem_split) dim += s;
  if (auto it = record.find("dimension"); it != record.end()) {
    if (as_unsigned(*it, child(path, "dimension")) != dim)
      throw ConfigError(child(path, "dimension"), "does not match the sum of subsystem_split");
  }

  switch (kind) {
    case ModelKind::GaussianPair:
      cfg.params = GaussianPairParams{row_major(required(record, path, "D"), child(path, "D"), dim),
                                      row_major(required(record, path, "C"), child(path, "C"), dim)};
      break;
    case ModelKind::IsingBlock: {
      IsingBlockParams p;
      p.intra_strength = real_or(record, path, "J", 0.0);
      p.cross_strength = real_or(record, path, "K", 0.0);
      if (auto it = record.find("intra_edges"); it != record.end())
        p.intra_edges = edge_array(*it, child(path, "intra_edges"));
      if (auto it = record.find("cross_edges"); it != record.end())
        p.cross_edges = edge_array(*it, child(path, "cross_edges"));
      cfg.params = std::move(p);
      break;
    }
    case ModelKind::QuarticPair:
      cfg.params = QuarticPairParams{as_real(required(record, path, "a"), child(path, "a")),
                                     real_or(record, path, "c", 0.0)};
      break;
    case ModelKind::ConstantCoupling:
      cfg.params = ConstantCouplingParams{as_real(required(record, path, "value"), child(path, "value"))};
      break;
  }
  return cfg;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  const std::string root = "$";
  require_object(doc, root);
  reject_unknown(doc, root,
                 {"schema_version", "model", "alphas", "chain", "n_repetitions", "seed", "oracle",
                  "quadrature", "outputs", "replica_count"});

  const json& version = required(doc, root, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
    throw ConfigError("$.schema_version", fmt::format("expected {}", kSchemaVersion));

  ExperimentConfig cfg;
  cfg.model_record = nlohmann::ordered_json::parse(required(doc, root, "model").dump());
  cfg.model = parse_model_config(doc.at("model"), "$.model");

  if (auto it = doc.find("alphas"); it != doc.end()) {
    if (it->is_object()) {
      reject_unknown(*it, "$.alphas", {"uniform_points"});
      const auto points = as_unsigned(required(*it, "$.alphas", "uniform_points"),
                                      "$.alphas.uniform_points");
      if (points < 2) throw ConfigError("$.alphas.uniform_points", "needs at least 2 points");
      cfg.alphas = uniform_alpha_grid(points);
    } else {
      cfg.alphas = real_array(*it, "$.alphas");
    }
  } else {
    cfg.alphas = uniform_alpha_grid(21);
  }
  if (cfg.alphas.empty()) throw ConfigError("$.alphas", "must not be empty");
  for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
    if (!(cfg.alphas[i] >= 0.0 && cfg.alphas[i] <= 1.0))
      throw ConfigError(fmt::format("$.alphas[{}]", i), "must lie in [0, 1]");
    if (i > 0 && !(cfg.alphas[i] > cfg.alphas[i - 1]))
      throw ConfigError(fmt::format("$.alphas[{}]", i), "alphas must be strictly increasing");
  }

  std::size_t n_steps = 100000;
  double step_size = 1.0;
  std::optional<std::size_t> burn_in;
  std::size_t thinning = 1;
  if (auto it = doc.find("chain"); it != doc.end()) {
    require_object(*it, "$.chain");
    reject_unknown(*it, "$.chain", {"n_steps", "burn_in", "step_size", "thinning"});
    if (auto s = it->find("n_steps"); s != it->end()) n_steps = as_unsigned(*s, "$.chain.n_steps");
    if (auto s = it->find("burn_in"); s != it->end()) burn_in = as_unsigned(*s, "$.chain.burn_in");
    if (auto s = it->find("thinning"); s != it->end()) thinning = as_unsigned(*s, "$.chain.thinning");
    step_size = real_or(*it, "$.chain", "step_size", step_size);
  }
  cfg.chain = default_chain_config(n_steps, step_size, 0);
  if (burn_in) cfg.chain.burn_in = *burn_in;
  cfg.chain.thinning = thinning;
  try {
    cfg.chain.validate();
  } catch (const ValidationError& e) {
    throw ConfigError("$.chain", e.what());
  }

  if (auto it = doc.find("n_repetitions"); it != doc.end()) {
    cfg.n_repetitions = as_unsigned(*it, "$.n_repetitions");
    if (cfg.n_repetitions == 0) throw ConfigError("$.n_repetitions", "must be positive");
  }
  if (auto it = doc.find("seed"); it != doc.end()) cfg.seed = as_unsigned(*it, "$.seed");
  if (auto it = doc.find("oracle"); it != doc.end()) {
    if (!it->is_string()) throw ConfigError("$.oracle", "expected a string");
    const auto name = it->get<std::string>();
    bool found = false;
    for (auto c : {OracleChoice::Auto, OracleChoice::Gaussian, OracleChoice::Enumeration,
                   OracleChoice::Quadrature, OracleChoice::None}) {
      if (to_string(c) == name) {
        cfg.oracle = c;
        found = true;
      }
    }
    if (!found) throw ConfigError("$.oracle", fmt::format("unknown oracle '{}'", name));
  }
  if (auto it = doc.find("quadrature"); it != doc.end()) {
    require_object(*it, "$.quadrature");
    reject_unknown(*it, "$.quadrature", {"lower", "upper", "points", "tolerance"});
    cfg.quadrature.lower = real_or(*it, "$.quadrature", "lower", cfg.quadrature.lower);
    cfg.quadrature.upper = real_or(*it, "$.quadrature", "upper", cfg.quadrature.upper);
    cfg.quadrature.tolerance = real_or(*it, "$.quadrature", "tolerance", cfg.quadrature.tolerance);
    if (auto p = it->find("points"); p != it->end())
      cfg.quadrature.points = as_unsigned(*p, "$.quadrature.points");
    if (!(cfg.quadrature.upper > cfg.quadrature.lower))
      throw ConfigError("$.quadrature", "upper must exceed lower");
    if (cfg.quadrature.points < 3) throw ConfigError("$.quadrature.points", "needs at least 3");
  }
  if (auto it = doc.find("outputs"); it != doc.end()) {
    if (!it->is_string()) throw ConfigError("$.outputs", "expected a path prefix string");
    cfg.outputs = it->get<std::string>();
  }
  if (auto it = doc.find("replica_count"); it != doc.end()) {
    cfg.replica_count = as_unsigned(*it, "$.replica_count");
    if (cfg.replica_count == 0) throw ConfigError("$.replica_count", "must be positive");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("$", fmt::format("cannot read config file '{}'", file.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", fmt::format("invalid JSON: {}", e.what()));
  }
  return parse_experiment_config(doc);
}

}  // namespace febounds
