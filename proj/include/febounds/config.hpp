#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "febounds/model.hpp"
#include "febounds/oracle.hpp"
#include "febounds/sampler.hpp"

namespace febounds {

inline constexpr int kSchemaVersion = 1;

enum class OracleChoice { Auto, Gaussian, Enumeration, Quadrature, None };

std::string_view to_string(OracleChoice choice);

/// Parsed experiment file. Unknown keys anywhere are rejected with a
/// ConfigError naming the JSON path.
struct ExperimentConfig {
  nlohmann::ordered_json model_record;  // the "model" object as written
  ModelConfig model;
  std::vector<double> alphas;           // sorted, within [0, 1]
  ChainConfig chain;                    // target_alpha and seed are set per chain
  std::size_t n_repetitions = 1;
  std::uint64_t seed = 0;
  OracleChoice oracle = OracleChoice::Auto;
  QuadratureGrid quadrature;
  std::string outputs;
  std::size_t replica_count = 2;
};

ModelConfig parse_model_config(const nlohmann::json& record, const std::string& path = "model");
ExperimentConfig parse_experiment_config(const nlohmann::json& document);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

// alpha_i = i / (points - 1)
std::vector<double> uniform_alpha_grid(std::size_t points);

}  // namespace febounds
