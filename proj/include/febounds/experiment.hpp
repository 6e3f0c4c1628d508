#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "febounds/config.hpp"
#include "febounds/estimators.hpp"
#include "febounds/oracle.hpp"

namespace febounds {

inline constexpr std::string_view kGeneratorName = "febounds";
inline constexpr std::string_view kGeneratorVersion = "0.1.0";

struct RunOptions {
  std::string output_prefix;
  std::size_t workers = 1;
  bool oracle_fed = false;
  // Recorded in output metadata; must not mention worker count.
  std::string command_line;
};

struct SeparabilityReport {
  BoundEstimate delta_f;  // gamma(1)
  BoundEstimate lower;    // Bogoliubov, E_pi[U]
  BoundEstimate upper;    // Bogoliubov, E_pi0[U]
  std::size_t replica_count = 1;
  double per_replica_energy = 0.0;
  // Mean of H0 under pi0 divided by the number of subsystems.
  double reference_energy = 0.0;
  double separability_ratio = 0.0;  // |delta_f| / |reference_energy|, +inf when the reference is 0
  bool bracket_ok = false;
  bool monotone_ok = false;
};

struct MonotonicityReport {
  std::size_t lower_violations = 0;  // strict decreases of the lower curve
  std::size_t upper_violations = 0;  // strict increases of the upper curve
  std::size_t lower_noise_violations = 0;  // decreases beyond 3 combined standard errors
  std::size_t upper_noise_violations = 0;
};

MonotonicityReport check_monotonicity(const HomotopyCurve& curve);

SeparabilityReport separability_report(const HomotopyCurve& curve, double mean_h0_pi0,
                                       std::size_t subsystems, std::size_t replica_count);

// Oracle named by (or chosen automatically for) the config; nullopt for "none".
std::optional<OracleResult> resolve_oracle(const ExperimentConfig& config, const SystemModel& model,
                                           std::size_t workers, bool keep_densities = false);

// Per-alpha means from the oracle, in grid order (std_error 0, n_effective +inf).
std::vector<MeanEstimate> oracle_means(const OracleResult& oracle, std::span<const double> alphas);

// Each writes its files under options.output_prefix and returns the paths written.
std::vector<std::string> run_bounds(const ExperimentConfig& config, const RunOptions& options);
std::vector<std::string> run_curve(const ExperimentConfig& config, const RunOptions& options);
std::vector<std::string> run_oracle(const ExperimentConfig& config, const RunOptions& options);
std::vector<std::string> run_compare(const ExperimentConfig& config, const RunOptions& options);

// 17 significant digits; negative zero prints as 0.
std::string format_real(double value);

}  // namespace febounds
