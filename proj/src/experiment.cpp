#include "febounds/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include <fmt/format.h>

#include "febounds/errors.hpp"
#include "febounds/parallel.hpp"
#include "febounds/sampler.hpp"

namespace febounds {

using ojson = nlohmann::ordered_json;

std::string format_real(double value) {
  if (value == 0.0) return "0";
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", value);
}

namespace {

constexpr double kSigmas = 3.0;

ojson real(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v == 0.0 ? 0.0 : v;
}

ojson to_json(const BoundEstimate& b) {
  ojson j;
  j["kind"] = std::string(to_string(b.kind));
  j["alpha"] = b.alpha ? real(*b.alpha) : ojson(nullptr);
  j["value"] = real(b.value);
  j["std_error"] = real(b.std_error);
  j["n_effective"] = real(b.n_effective);
  if (b.clipped) {
    j["clipped"] = true;
    j["unclipped_value"] = real(b.unclipped_value.value_or(b.value));
  }
  if (b.bias_prone) j["bias_prone"] = true;
  return j;
}

ojson to_json(const ChainDiagnostics& d) {
  return ojson{{"acceptance_rate", real(d.acceptance_rate)},
               {"iact_u", real(d.iact_u)},
               {"ess_u", real(d.ess_u)},
               {"degenerate", d.degenerate}};
}

ojson oracle_json(const OracleResult& r) {
  ojson j;
  j["method"] = std::string(to_string(r.method));
  j["delta_f"] = real(r.delta_f);
  j["e_u_pi"] = real(r.e_u_pi);
  j["e_u_pi0"] = real(r.e_u_pi0);
  j["kl_pi_pi0"] = real(r.kl_pi_pi0);
  j["kl_pi0_pi"] = real(r.kl_pi0_pi);
  j["e_h0_pi0"] = real(r.e_h0_pi0);
  j["error_bound"] = real(r.error_bound);
  j["tolerance_exceeded"] = r.tolerance_exceeded;
  ojson curve = ojson::array();
  for (const auto& p : r.gamma_curve)
    curve.push_back({{"alpha", real(p.alpha)},
                     {"gamma", real(p.gamma)},
                     {"e_u_rho_alpha", real(p.e_u_rho_alpha)}});
  j["gamma_curve"] = std::move(curve);
  return j;
}

ojson generator_json(const RunOptions& options) {
  return ojson{{"name", std::string(kGeneratorName)},
               {"version", std::string(kGeneratorVersion)},
               {"command", options.command_line}};
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << content;
  if (!out) throw Error(fmt::format("failed writing '{}'", path));
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

std::string prefix_of(const ExperimentConfig& config, const RunOptions& options) {
  const std::string prefix = options.output_prefix.empty() ? config.outputs : options.output_prefix;
  if (prefix.empty()) throw ConfigError("$.outputs", "no output prefix given (config or --output)");
  return prefix;
}

void require_endpoints(const ExperimentConfig& config) {
  if (config.alphas.front() != 0.0 || config.alphas.back() != 1.0)
    throw ConfigError("$.alphas", "the alpha grid must contain 0 and 1");
}

// Means per alpha from MCMC (and the ladder itself) or from the oracle.
struct LadderData {
  std::vector<MeanEstimate> means;
  std::vector<SampleBatch> batches;  // empty in oracle-fed mode
};

LadderData ladder_data(const ExperimentConfig& config, const SystemModel& model,
                       const std::optional<OracleResult>& oracle, const RunOptions& options) {
  LadderData data;
  if (options.oracle_fed) {
    data.means = oracle_means(*oracle, config.alphas);
    return data;
  }
  ChainConfig cfg = config.chain;
  cfg.seed = config.seed;
  cfg.keep_states = false;
  data.batches = run_chain_ladder(model, config.alphas, cfg, options.workers);
  for (const auto& b : data.batches) data.means.push_back(mean_u(b));
  return data;
}

std::optional<OracleResult> oracle_for_run(const ExperimentConfig& config, const SystemModel& model,
                                           const RunOptions& options, std::string& skipped) {
  if (options.oracle_fed && config.oracle == OracleChoice::None)
    throw ConfigError("$.oracle", "--oracle-fed needs an oracle, but the config selects none");
  try {
    return resolve_oracle(config, model, options.workers);
  } catch (const OracleRefusal& e) {
    if (options.oracle_fed || config.oracle != OracleChoice::Auto) throw;
    skipped = e.what();
    return std::nullopt;
  }
}

bool contains(double value, const BoundEstimate& lower, const BoundEstimate& upper) {
  return value >= lower.value - kSigmas * lower.std_error &&
         value <= upper.value + kSigmas * upper.std_error;
}

}  // namespace

MonotonicityReport check_monotonicity(const HomotopyCurve& curve) {
  MonotonicityReport r;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double dl = curve.lower_values[i] - curve.lower_values[i - 1];
    const double du = curve.upper_values[i] - curve.upper_values[i - 1];
    const double sl = std::hypot(curve.lower_std_errors[i], curve.lower_std_errors[i - 1]);
    const double su = std::hypot(curve.upper_std_errors[i], curve.upper_std_errors[i - 1]);
    if (dl < 0.0) ++r.lower_violations;
    if (du > 0.0) ++r.upper_violations;
    if (dl < -kSigmas * sl) ++r.lower_noise_violations;
    if (du > kSigmas * su) ++r.upper_noise_violations;
  }
  return r;
}

SeparabilityReport separability_report(const HomotopyCurve& curve, double mean_h0_pi0,
                                       std::size_t subsystems, std::size_t replica_count) {
  if (curve.size() < 2) throw InputError("separability report needs a curve with both endpoints");
  const std::size_t last = curve.size() - 1;
  SeparabilityReport r;
  r.delta_f.kind = BoundKind::Gamma;
  r.delta_f.alpha = 1.0;
  r.delta_f.value = curve.gamma_values[last];
  r.delta_f.std_error = curve.gamma_std_errors[last];
  r.lower.kind = BoundKind::BogoliubovLower;
  r.lower.alpha = 1.0;
  r.lower.value = curve.lower_values[0];
  r.lower.std_error = curve.lower_std_errors[0];
  r.upper.kind = BoundKind::BogoliubovUpper;
  r.upper.alpha = 0.0;
  r.upper.value = curve.upper_values[0];
  r.upper.std_error = curve.upper_std_errors[0];
  r.replica_count = replica_count;
  r.per_replica_energy = r.delta_f.value / static_cast<double>(replica_count);
  r.reference_energy = mean_h0_pi0 / static_cast<double>(subsystems);
  r.separability_ratio = r.reference_energy == 0.0
                             ? std::numeric_limits<double>::infinity()
                             : std::abs(r.delta_f.value) / std::abs(r.reference_energy);
  const double combined = std::hypot(r.lower.std_error, r.upper.std_error);
  r.bracket_ok = r.lower.value <= r.upper.value + kSigmas * combined &&
                 r.delta_f.value >= r.lower.value - kSigmas * std::hypot(r.lower.std_error, r.delta_f.std_error) &&
                 r.delta_f.value <= r.upper.value + kSigmas * std::hypot(r.upper.std_error, r.delta_f.std_error);
  const auto mono = check_monotonicity(curve);
  r.monotone_ok = mono.lower_noise_violations == 0 && mono.upper_noise_violations == 0;
  return r;
}

std::optional<OracleResult> resolve_oracle(const ExperimentConfig& config, const SystemModel& model,
                                           std::size_t workers, bool keep_densities) {
  OracleChoice choice = config.oracle;
  if (choice == OracleChoice::None) return std::nullopt;
  if (choice == OracleChoice::Auto) {
    switch (model.kind()) {
      case ModelKind::GaussianPair:
      case ModelKind::ConstantCoupling:
        choice = OracleChoice::Gaussian;
        break;
      case ModelKind::IsingBlock:
        choice = OracleChoice::Enumeration;
        break;
      case ModelKind::QuarticPair:
        choice = OracleChoice::Quadrature;
        break;
    }
  }
  switch (choice) {
    case OracleChoice::Gaussian:
      return gaussian_oracle(model, config.alphas);
    case OracleChoice::Enumeration:
      return enumerate_oracle(model, config.alphas, keep_densities, workers);
    case OracleChoice::Quadrature:
      return quadrature_oracle(model, config.quadrature, config.alphas);
    default:
      return std::nullopt;
  }
}

std::vector<MeanEstimate> oracle_means(const OracleResult& oracle, std::span<const double> alphas) {
  std::vector<MeanEstimate> out;
  for (double a : alphas) {
    const GammaCurvePoint* hit = nullptr;
    for (const auto& p : oracle.gamma_curve)
      if (p.alpha == a) hit = &p;
    if (!hit) throw InputError(fmt::format("oracle has no value for alpha = {}", a));
    out.push_back({a, hit->e_u_rho_alpha, 0.0, std::numeric_limits<double>::infinity()});
  }
  return out;
}

std::vector<std::string> run_bounds(const ExperimentConfig& config, const RunOptions& options) {
  const std::string prefix = prefix_of(config, options);
  require_endpoints(config);
  const SystemModel model = SystemModel::build(config.model);
  std::string skipped;
  const auto oracle = oracle_for_run(config, model, options, skipped);
  const LadderData data = ladder_data(config, model, oracle, options);

  const HomotopyCurve curve = homotopy_curve(data.means);
  const auto gammas = gamma_ti(data.means);
  const BoundEstimate lower = bogoliubov_lower(data.means.back());
  const BoundEstimate upper = bogoliubov_upper(data.means.front());
  const BoundEstimate delta_f = delta_f_estimate(gammas);
  const BoundEstimate kl = kl_pi_pi0(delta_f, data.means.back());
  std::optional<BoundEstimate> naive;
  double mean_h0_pi0 = 0.0;
  if (options.oracle_fed) {
    mean_h0_pi0 = oracle->e_h0_pi0;
  } else {
    naive = naive_exponential(data.batches.front());
    mean_h0_pi0 = stable_mean(data.batches.front().h0_values);
  }
  SeparabilityReport sep =
      separability_report(curve, mean_h0_pi0, model.subsystem_split().size(), config.replica_count);
  sep.delta_f = delta_f;
  sep.lower = lower;
  sep.upper = upper;

  std::vector<BoundEstimate> rows{lower, upper, delta_f, kl};
  if (naive) rows.push_back(*naive);

  std::string csv = "estimator,alpha,value,std_error,n_effective\n";
  for (const auto& b : rows)
    csv += fmt::format("{},{},{},{},{}\n", to_string(b.kind), b.alpha ? format_real(*b.alpha) : "",
                       format_real(b.value), format_real(b.std_error), format_real(b.n_effective));

  ojson j;
  j["generator"] = generator_json(options);
  j["command"] = "bounds";
  j["mode"] = options.oracle_fed ? "oracle-fed" : "mcmc";
  j["model"] = config.model_record;
  j["alphas"] = config.alphas;
  j["seed"] = config.seed;
  ojson est = ojson::object();
  for (const auto& b : rows) est[std::string(to_string(b.kind))] = to_json(b);
  j["estimates"] = std::move(est);
  j["separability"] = {
      {"convention",
       "separability_ratio = |delta_f| / |reference_energy|, reference_energy = E_pi0[H0] / "
       "number of subsystems; per_replica_energy = delta_f / replica_count"},
      {"delta_f", real(sep.delta_f.value)},
      {"lower", real(sep.lower.value)},
      {"upper", real(sep.upper.value)},
      {"replica_count", sep.replica_count},
      {"per_replica_energy", real(sep.per_replica_energy)},
      {"reference_energy", real(sep.reference_energy)},
      {"separability_ratio", real(sep.separability_ratio)},
      {"bracket_ok", sep.bracket_ok},
      {"monotone_ok", sep.monotone_ok}};
  if (!options.oracle_fed) {
    j["diagnostics"] = {{"pi0", to_json(diagnostics(data.batches.front()))},
                        {"pi", to_json(diagnostics(data.batches.back()))}};
  }
  if (oracle) {
    ojson o = oracle_json(*oracle);
    o.erase("gamma_curve");
    o["delta_f_in_bracket"] = contains(oracle->delta_f, lower, upper);
    o["lower_within_3se"] =
        std::abs(lower.value - oracle->e_u_pi) <= kSigmas * lower.std_error + oracle->error_bound;
    o["upper_within_3se"] =
        std::abs(upper.value - oracle->e_u_pi0) <= kSigmas * upper.std_error + oracle->error_bound;
    j["oracle"] = std::move(o);
  } else {
    j["oracle"] = nullptr;
    if (!skipped.empty()) j["oracle_skipped"] = skipped;
  }

  const std::string csv_path = prefix + "_bounds.csv";
  const std::string json_path = prefix + "_bounds.json";
  write_file(csv_path, csv);
  write_file(json_path, dump(j));
  return {csv_path, json_path};
}

std::vector<std::string> run_curve(const ExperimentConfig& config, const RunOptions& options) {
  const std::string prefix = prefix_of(config, options);
  require_endpoints(config);
  const SystemModel model = SystemModel::build(config.model);
  std::string skipped;
  const auto oracle = oracle_for_run(config, model, options, skipped);
  const LadderData data = ladder_data(config, model, oracle, options);
  const HomotopyCurve curve = homotopy_curve(data.means);
  const BoundEstimate lower = bogoliubov_lower(data.means.back());
  const BoundEstimate upper = bogoliubov_upper(data.means.front());
  const std::size_t last = curve.size() - 1;

  std::string csv = "alpha,lower,lower_se,upper,upper_se,gamma,gamma_se,mean_u,mean_u_se\n";
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", format_real(curve.alphas[i]),
                       format_real(curve.lower_values[i]), format_real(curve.lower_std_errors[i]),
                       format_real(curve.upper_values[i]), format_real(curve.upper_std_errors[i]),
                       format_real(curve.gamma_values[i]), format_real(curve.gamma_std_errors[i]),
                       format_real(curve.mean_u_values[i]), format_real(curve.mean_u_std_errors[i]));
    rows.push_back({{"alpha", real(curve.alphas[i])},
                    {"lower", real(curve.lower_values[i])},
                    {"lower_se", real(curve.lower_std_errors[i])},
                    {"upper", real(curve.upper_values[i])},
                    {"upper_se", real(curve.upper_std_errors[i])},
                    {"gamma", real(curve.gamma_values[i])},
                    {"gamma_se", real(curve.gamma_std_errors[i])},
                    {"mean_u", real(curve.mean_u_values[i])},
                    {"mean_u_se", real(curve.mean_u_std_errors[i])}});
  }

  const auto mono = check_monotonicity(curve);
  ojson j;
  j["generator"] = generator_json(options);
  j["command"] = "curve";
  j["mode"] = options.oracle_fed ? "oracle-fed" : "mcmc";
  j["model"] = config.model_record;
  j["seed"] = config.seed;
  j["endpoint_checks"] = {
      {"alpha0_lower_equals_bogoliubov_lower",
       curve.lower_values[0] == lower.value && curve.lower_std_errors[0] == lower.std_error},
      {"alpha0_upper_equals_bogoliubov_upper",
       curve.upper_values[0] == upper.value && curve.upper_std_errors[0] == upper.std_error},
      {"alpha1_lower_equals_gamma", curve.lower_values[last] == curve.gamma_values[last]},
      {"alpha1_upper_equals_gamma", curve.upper_values[last] == curve.gamma_values[last]},
      {"gamma0_is_zero", curve.gamma_values[0] == 0.0}};
  j["monotonicity"] = {{"lower_strict_violations", mono.lower_violations},
                       {"upper_strict_violations", mono.upper_violations},
                       {"lower_violations_beyond_3se", mono.lower_noise_violations},
                       {"upper_violations_beyond_3se", mono.upper_noise_violations}};
  if (oracle) {
    std::size_t bracketed = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (oracle->delta_f >= curve.lower_values[i] - kSigmas * curve.lower_std_errors[i] - oracle->error_bound &&
          oracle->delta_f <= curve.upper_values[i] + kSigmas * curve.upper_std_errors[i] + oracle->error_bound)
        ++bracketed;
    }
    ojson o = oracle_json(*oracle);
    o["rows_bracketing_delta_f"] = bracketed;
    o["rows_total"] = curve.size();
    j["oracle"] = std::move(o);
  } else {
    j["oracle"] = nullptr;
    if (!skipped.empty()) j["oracle_skipped"] = skipped;
  }
  j["rows"] = std::move(rows);

  const std::string csv_path = prefix + "_curve.csv";
  const std::string json_path = prefix + "_curve.json";
  write_file(csv_path, csv);
  write_file(json_path, dump(j));
  return {csv_path, json_path};
}

std::vector<std::string> run_oracle(const ExperimentConfig& config, const RunOptions& options) {
  const std::string prefix = prefix_of(config, options);
  if (config.oracle == OracleChoice::None)
    throw ConfigError("$.oracle", "the oracle command needs an oracle other than none");
  const SystemModel model = SystemModel::build(config.model);
  const auto result = resolve_oracle(config, model, options.workers);
  if (result->tolerance_exceeded)
    std::cerr << fmt::format("warning: quadrature error bound {:.3g} exceeds tolerance {:.3g}\n",
                             result->error_bound, config.quadrature.tolerance);

  ojson j;
  j["generator"] = generator_json(options);
  j["model"] = config.model_record;
  j["alphas"] = config.alphas;
  const ojson values = oracle_json(*result);
  for (const auto& [key, value] : values.items()) j[key] = value;
  ojson checks = ojson::object();
  for (const auto& c : check_bracket(*result).checks) checks[c.name] = c.passed;
  j["checks"] = std::move(checks);

  const std::string path = prefix + "_oracle.json";
  write_file(path, dump(j));
  return {path};
}

std::vector<std::string> run_compare(const ExperimentConfig& config, const RunOptions& options) {
  const std::string prefix = prefix_of(config, options);
  require_endpoints(config);
  if (config.oracle == OracleChoice::None)
    throw ConfigError("$.oracle", "compare measures against an oracle; none selected");
  const SystemModel model = SystemModel::build(config.model);
  const auto oracle = resolve_oracle(config, model, options.workers);
  const double truth = oracle->delta_f;

  struct Rep {
    std::uint64_t seed = 0;
    BoundEstimate naive, ti, lower, upper;
    bool in_bracket = false;
  };
  std::vector<Rep> reps(config.n_repetitions);
  parallel_for_index(reps.size(), options.workers, [&](std::size_t r) {
    Rep& rep = reps[r];
    rep.seed = config.seed + r * config.alphas.size();
    ChainConfig cfg = config.chain;
    cfg.seed = rep.seed;
    cfg.keep_states = false;
    const auto ladder = run_chain_ladder(model, config.alphas, cfg, 1);
    rep.naive = naive_exponential(ladder.front());
    rep.ti = delta_f_estimate(gamma_ti(std::span<const SampleBatch>(ladder)));
    rep.lower = bogoliubov_lower(ladder.back());
    rep.upper = bogoliubov_upper(ladder.front());
    rep.in_bracket =
        rep.ti.value >= rep.lower.value - kSigmas * std::hypot(rep.lower.std_error, rep.ti.std_error) &&
        rep.ti.value <= rep.upper.value + kSigmas * std::hypot(rep.upper.std_error, rep.ti.std_error);
  });

  std::string csv =
      "repetition,seed,naive,naive_se,gamma_ti,gamma_ti_se,lower,lower_se,upper,upper_se,"
      "ti_in_bracket\n";
  double naive_bias = 0.0, naive_sq = 0.0, ti_bias = 0.0, ti_sq = 0.0;
  std::size_t contained = 0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const Rep& rep = reps[r];
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r, rep.seed, format_real(rep.naive.value),
                       format_real(rep.naive.std_error), format_real(rep.ti.value),
                       format_real(rep.ti.std_error), format_real(rep.lower.value),
                       format_real(rep.lower.std_error), format_real(rep.upper.value),
                       format_real(rep.upper.std_error), rep.in_bracket ? 1 : 0);
    naive_bias += rep.naive.value - truth;
    naive_sq += (rep.naive.value - truth) * (rep.naive.value - truth);
    ti_bias += rep.ti.value - truth;
    ti_sq += (rep.ti.value - truth) * (rep.ti.value - truth);
    if (rep.in_bracket) ++contained;
  }
  const auto n = static_cast<double>(reps.size());

  ojson j;
  j["generator"] = generator_json(options);
  j["command"] = "compare";
  j["model"] = config.model_record;
  j["alphas"] = config.alphas;
  j["seed"] = config.seed;
  j["n_repetitions"] = reps.size();
  j["oracle_method"] = std::string(to_string(oracle->method));
  j["oracle_delta_f"] = real(truth);
  j["naive_exponential"] = {{"bias", real(naive_bias / n)}, {"rmse", real(std::sqrt(naive_sq / n))},
                            {"bias_prone", true}};
  j["gamma_ti"] = {{"bias", real(ti_bias / n)}, {"rmse", real(std::sqrt(ti_sq / n))}};
  j["ti_bracket_containment_rate"] = real(static_cast<double>(contained) / n);

  const std::string csv_path = prefix + "_compare.csv";
  const std::string json_path = prefix + "_compare.json";
  write_file(csv_path, csv);
  write_file(json_path, dump(j));
  return {csv_path, json_path};
}

}  // namespace febounds
