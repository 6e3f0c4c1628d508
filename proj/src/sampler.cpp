#include "febounds/sampler.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "febounds/errors.hpp"
#include "febounds/parallel.hpp"

namespace febounds {

void ChainConfig::validate() const {
  if (!(target_alpha >= 0.0 && target_alpha <= 1.0))
    throw ValidationError(fmt::format("target_alpha must lie in [0, 1], got {}", target_alpha));
  if (n_steps == 0) throw ValidationError("n_steps must be positive");
  if (burn_in >= n_steps)
    throw ValidationError(fmt::format("burn_in ({}) must be below n_steps ({})", burn_in, n_steps));
  if (thinning == 0) throw ValidationError("thinning must be at least 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw ValidationError(fmt::format("step_size must be positive, got {}", step_size));
}

ChainConfig default_chain_config(std::size_t n_steps, double step_size, std::uint64_t seed) {
  ChainConfig cfg;
  cfg.n_steps = n_steps;
  cfg.burn_in = n_steps / 10;
  cfg.step_size = step_size;
  cfg.thinning = 1;
  cfg.seed = seed;
  return cfg;
}

namespace {

// [0, 1) with 53 random bits.
double next_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t next_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

bool metropolis_accept(double delta, std::mt19937_64& rng) {
  if (delta <= 0.0) return true;
  return next_unit(rng) < std::exp(-delta);
}

[[noreturn]] void non_finite(const State& state, std::size_t step, double energy) {
  throw SamplerError(fmt::format("non-finite energy {} at step {}; state = [{}]", energy, step,
                                 fmt::join(state, ", ")));
}

}  // namespace

SampleBatch run_chain(const SystemModel& model, const ChainConfig& cfg) {
  cfg.validate();
  const std::size_t retained = (cfg.n_steps - cfg.burn_in + cfg.thinning - 1) / cfg.thinning;
  if (retained == 0) throw ValidationError("chain configuration retains zero samples");

  std::mt19937_64 rng(cfg.seed);
  const double alpha = cfg.target_alpha;
  const std::size_t dim = model.dimension();

  SampleBatch batch;
  batch.target_alpha = alpha;
  batch.seed = cfg.seed;
  if (cfg.keep_states) batch.states.reserve(retained);
  batch.u_values.reserve(retained);
  batch.h0_values.reserve(retained);

  State current(dim, 0.0);
  if (model.is_discrete()) {
    for (auto& s : current) s = (rng() >> 63) ? 1.0 : -1.0;
  }
  double energy = model.tempered_energy(alpha, current);
  if (!std::isfinite(energy)) non_finite(current, 0, energy);

  State proposal(dim);
  std::size_t accepted = 0;
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    if (model.is_discrete()) {
      const std::size_t site = next_index(rng, dim);
      const FlipDelta d = model.flip_delta(current, site);
      const double delta = d.h0 + alpha * d.u;
      if (!std::isfinite(delta)) non_finite(current, step, delta);
      if (metropolis_accept(delta, rng)) {
        current[site] = -current[site];
        ++accepted;
      }
    } else {
      for (std::size_t k = 0; k < dim; ++k)
        proposal[k] = current[k] + cfg.step_size * (2.0 * next_unit(rng) - 1.0);
      const double proposed = model.tempered_energy(alpha, proposal);
      if (!std::isfinite(proposed)) non_finite(proposal, step, proposed);
      if (metropolis_accept(proposed - energy, rng)) {
        current.swap(proposal);
        energy = proposed;
        ++accepted;
      }
    }
    if (step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == 0) {
      if (cfg.keep_states) batch.states.push_back(current);
      batch.u_values.push_back(model.eval_u(current));
      batch.h0_values.push_back(model.eval_h0(current));
    }
  }
  batch.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_steps);
  return batch;
}

ChainDiagnostics series_diagnostics(std::span<const double> series, double acceptance_rate) {
  const std::size_t n = series.size();
  if (n < 10) throw InputError(fmt::format("diagnostics need at least 10 samples, got {}", n));

  ChainDiagnostics out;
  out.acceptance_rate = acceptance_rate;

  const double shift = series[0];
  double mean = 0.0;
  for (double x : series) mean += x - shift;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : series) var += (x - shift - mean) * (x - shift - mean);
  var /= static_cast<double>(n - 1);

  if (!(var > 0.0)) {
    out.iact_u = 0.5;
    out.ess_u = static_cast<double>(n);
    out.degenerate = true;
    return out;
  }

  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t length = n / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < length; ++k) sum += series[b * length + k] - shift;
    means[b] = sum / static_cast<double>(length);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(batches);
  double batch_var = 0.0;
  for (double m : means) batch_var += (m - grand) * (m - grand);
  batch_var /= static_cast<double>(batches - 1);

  out.iact_u = std::max(0.5, batch_var * static_cast<double>(length) / (2.0 * var));
  out.ess_u = std::min(static_cast<double>(n), static_cast<double>(n) / (2.0 * out.iact_u));
  return out;
}

ChainDiagnostics diagnostics(const SampleBatch& batch) {
  return series_diagnostics(batch.u_values, batch.acceptance_rate);
}

std::vector<SampleBatch> run_chain_ladder(const SystemModel& model, std::span<const double> alphas,
                                          const ChainConfig& base_cfg, std::size_t workers) {
  if (alphas.empty()) throw InputError("alpha ladder is empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0))
      throw InputError(fmt::format("alpha {} outside [0, 1]", alphas[i]));
    if (i > 0 && !(alphas[i] > alphas[i - 1]))
      throw InputError("alpha ladder must be strictly increasing");
  }
  std::vector<SampleBatch> out(alphas.size());
  parallel_for_index(alphas.size(), workers, [&](std::size_t i) {
    ChainConfig cfg = base_cfg;
    cfg.target_alpha = alphas[i];
    cfg.seed = base_cfg.seed + i;
    try {
      out[i] = run_chain(model, cfg);
    } catch (const SamplerError& e) {
      throw SamplerError(fmt::format("alpha = {}: {}", alphas[i], e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("alpha = {}: {}", alphas[i], e.what()));
    }
  });
  return out;
}

}  // namespace febounds
