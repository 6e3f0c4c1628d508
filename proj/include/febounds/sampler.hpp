#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "febounds/model.hpp"

namespace febounds {

struct ChainConfig {
  double target_alpha = 1.0;
  std::size_t n_steps = 100000;
  std::size_t burn_in = 10000;
  double step_size = 1.0;  // proposal half-width; ignored for spin models
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  // When false the batch keeps only the cached energies, not the states.
  bool keep_states = true;

  // Throws ValidationError on burn_in >= n_steps, thinning == 0, etc.
  void validate() const;
};

// burn_in = 10% of n_steps, thinning = 1.
ChainConfig default_chain_config(std::size_t n_steps, double step_size, std::uint64_t seed);

struct SampleBatch {
  std::vector<State> states;      // empty when the chain ran with keep_states = false
  std::vector<double> u_values;   // u_values[i] == model.eval_u(states[i])
  std::vector<double> h0_values;  // h0_values[i] == model.eval_h0(states[i])
  double acceptance_rate = 0.0;
  double target_alpha = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return u_values.size(); }
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  double iact_u = 0.5;
  double ess_u = 0.0;
  bool degenerate = false;  // U series has zero variance
};

/// Metropolis chain targeting exp(-H0 - alpha U).
///
/// Continuous models propose a uniform random-walk move of the full state
/// with half-width step_size; spin models flip one uniformly chosen site per
/// step. The result is a pure function of (model, cfg).
SampleBatch run_chain(const SystemModel& model, const ChainConfig& cfg);

// Integrated autocorrelation time by batch means over floor(sqrt(n)) batches.
ChainDiagnostics diagnostics(const SampleBatch& batch);
ChainDiagnostics series_diagnostics(std::span<const double> series, double acceptance_rate = 0.0);

/// One independent chain per alpha, chain i seeded with base_cfg.seed + i.
/// Output order follows `alphas` whatever the worker count.
std::vector<SampleBatch> run_chain_ladder(const SystemModel& model, std::span<const double> alphas,
                                          const ChainConfig& base_cfg, std::size_t workers = 1);

}  // namespace febounds
