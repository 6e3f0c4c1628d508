#include "febounds/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "febounds/errors.hpp"

namespace febounds {

std::string_view to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::BogoliubovLower:
      return "bogoliubov_lower";
    case BoundKind::BogoliubovUpper:
      return "bogoliubov_upper";
    case BoundKind::VariationalLower:
      return "variational_lower";
    case BoundKind::VariationalUpper:
      return "variational_upper";
    case BoundKind::Gamma:
      return "gamma";
    case BoundKind::NaiveExponential:
      return "naive_exponential";
    case BoundKind::KlPiPi0:
      return "kl_pi_pi0";
    case BoundKind::DualObjective:
      return "dual_objective";
  }
  return "unknown";
}

double stable_mean(std::span<const double> values) {
  if (values.empty()) throw InputError("mean of an empty sequence");
  const double ref = values[0];
  double sum = 0.0;
  for (double v : values) sum += v - ref;
  return ref + sum / static_cast<double>(values.size());
}

namespace {

double sample_variance(std::span<const double> values, double mean) {
  if (values.size() < 2) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size() - 1);
}

void require_alpha(const SampleBatch& batch, double alpha, std::string_view op) {
  if (batch.target_alpha != alpha)
    throw InputError(fmt::format("{} needs a batch with target_alpha = {}, got {}", op, alpha,
                                 batch.target_alpha));
}

BoundEstimate from_mean(const MeanEstimate& m, BoundKind kind) {
  BoundEstimate out;
  out.value = m.mean;
  out.std_error = m.std_error;
  out.n_effective = m.n_effective;
  out.kind = kind;
  out.alpha = m.alpha;
  return out;
}

}  // namespace

MeanEstimate mean_u(const SampleBatch& batch) {
  const ChainDiagnostics diag = diagnostics(batch);
  MeanEstimate out;
  out.alpha = batch.target_alpha;
  out.mean = stable_mean(batch.u_values);
  out.n_effective = std::max(1.0, diag.ess_u);
  out.std_error = diag.degenerate
                      ? 0.0
                      : std::sqrt(sample_variance(batch.u_values, out.mean) / out.n_effective);
  return out;
}

BoundEstimate bogoliubov_lower(const MeanEstimate& pi_mean) {
  if (pi_mean.alpha != 1.0)
    throw InputError(fmt::format("bogoliubov_lower needs target_alpha = 1, got {}", pi_mean.alpha));
  return from_mean(pi_mean, BoundKind::BogoliubovLower);
}

BoundEstimate bogoliubov_upper(const MeanEstimate& pi0_mean) {
  if (pi0_mean.alpha != 0.0)
    throw InputError(fmt::format("bogoliubov_upper needs target_alpha = 0, got {}", pi0_mean.alpha));
  return from_mean(pi0_mean, BoundKind::BogoliubovUpper);
}

BoundEstimate bogoliubov_lower(const SampleBatch& batch_pi) {
  require_alpha(batch_pi, 1.0, "bogoliubov_lower");
  return bogoliubov_lower(mean_u(batch_pi));
}

BoundEstimate bogoliubov_upper(const SampleBatch& batch_pi0) {
  require_alpha(batch_pi0, 0.0, "bogoliubov_upper");
  return bogoliubov_upper(mean_u(batch_pi0));
}

std::vector<GammaPoint> gamma_ti(std::span<const MeanEstimate> ladder) {
  if (ladder.empty()) throw InputError("gamma_ti needs a non-empty ladder");
  if (ladder[0].alpha != 0.0) throw InputError("gamma_ti ladder must start at alpha = 0");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i].alpha > ladder[i - 1].alpha))
      throw InputError("gamma_ti ladder must be strictly increasing in alpha");

  // gamma_k = alpha_k m_0 + sum_i h_i ((m_i + m_{i+1}) / 2 - m_0), which is the
  // plain trapezoid sum rearranged so that a flat integrand is integrated exactly.
  const double ref = ladder[0].mean;
  std::vector<GammaPoint> out(ladder.size());
  out[0] = {0.0, 0.0, 0.0, ladder[0].n_effective};
  double excess = 0.0;
  double n_eff = ladder[0].n_effective;
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    const double h = ladder[k].alpha - ladder[k - 1].alpha;
    excess += h * (0.5 * (ladder[k - 1].mean + ladder[k].mean) - ref);
    n_eff = std::min(n_eff, ladder[k].n_effective);

    double var = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
      const double left = j > 0 ? ladder[j].alpha - ladder[j - 1].alpha : 0.0;
      const double right = j < k ? ladder[j + 1].alpha - ladder[j].alpha : 0.0;
      const double w = 0.5 * (left + right) * ladder[j].std_error;
      var += w * w;
    }
    out[k] = {ladder[k].alpha, ladder[k].alpha * ref + excess, std::sqrt(var), n_eff};
  }
  return out;
}

std::vector<GammaPoint> gamma_ti(std::span<const SampleBatch> ladder) {
  std::vector<MeanEstimate> means;
  means.reserve(ladder.size());
  for (const auto& b : ladder) means.push_back(mean_u(b));
  return gamma_ti(means);
}

BoundEstimate delta_f_estimate(std::span<const GammaPoint> gammas) {
  const GammaPoint& g = gamma_at(gammas, 1.0);
  BoundEstimate out;
  out.value = g.gamma;
  out.std_error = g.std_error;
  out.n_effective = g.n_effective;
  out.kind = BoundKind::Gamma;
  out.alpha = 1.0;
  return out;
}

const GammaPoint& gamma_at(std::span<const GammaPoint> gammas, double alpha) {
  for (const auto& g : gammas)
    if (g.alpha == alpha) return g;
  throw InputError(fmt::format("no gamma value for alpha = {}", alpha));
}

BoundEstimate variational_lower(const MeanEstimate& pi_mean, const GammaPoint& gamma) {
  if (pi_mean.alpha != 1.0) throw InputError("variational_lower needs the mean of U under pi");
  if (!(gamma.alpha >= 0.0 && gamma.alpha <= 1.0))
    throw InputError(fmt::format("alpha {} outside [0, 1]", gamma.alpha));
  const double weight = 1.0 - gamma.alpha;
  BoundEstimate out;
  out.value = weight * pi_mean.mean + gamma.gamma;
  out.std_error = std::hypot(weight * pi_mean.std_error, gamma.std_error);
  out.n_effective = std::min(pi_mean.n_effective, gamma.n_effective);
  out.kind = BoundKind::VariationalLower;
  out.alpha = gamma.alpha;
  return out;
}

BoundEstimate variational_lower(const SampleBatch& batch_pi, const GammaPoint& gamma) {
  require_alpha(batch_pi, 1.0, "variational_lower");
  return variational_lower(mean_u(batch_pi), gamma);
}

BoundEstimate variational_upper(const MeanEstimate& rho_mean, const GammaPoint& gamma) {
  if (rho_mean.alpha != gamma.alpha)
    throw InputError(fmt::format("variational_upper: batch alpha {} does not match gamma alpha {}",
                                 rho_mean.alpha, gamma.alpha));
  const double weight = 1.0 - gamma.alpha;
  BoundEstimate out;
  out.value = weight * rho_mean.mean + gamma.gamma;
  out.std_error = std::hypot(weight * rho_mean.std_error, gamma.std_error);
  out.n_effective = std::min(rho_mean.n_effective, gamma.n_effective);
  out.kind = BoundKind::VariationalUpper;
  out.alpha = gamma.alpha;
  return out;
}

BoundEstimate variational_upper(const SampleBatch& batch_rho, const GammaPoint& gamma) {
  return variational_upper(mean_u(batch_rho), gamma);
}

HomotopyCurve homotopy_curve(std::span<const MeanEstimate> ladder) {
  if (ladder.size() < 2 || ladder.front().alpha != 0.0 || ladder.back().alpha != 1.0)
    throw InputError("homotopy curve needs an alpha grid containing 0 and 1");
  const auto gammas = gamma_ti(ladder);
  const MeanEstimate& pi = ladder.back();

  HomotopyCurve curve;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const BoundEstimate lower = variational_lower(pi, gammas[i]);
    const BoundEstimate upper = variational_upper(ladder[i], gammas[i]);
    curve.alphas.push_back(ladder[i].alpha);
    curve.gamma_values.push_back(gammas[i].gamma);
    curve.gamma_std_errors.push_back(gammas[i].std_error);
    curve.mean_u_values.push_back(ladder[i].mean);
    curve.mean_u_std_errors.push_back(ladder[i].std_error);
    curve.lower_values.push_back(lower.value);
    curve.lower_std_errors.push_back(lower.std_error);
    curve.upper_values.push_back(upper.value);
    curve.upper_std_errors.push_back(upper.std_error);
  }
  return curve;
}

HomotopyCurve homotopy_curve(std::span<const SampleBatch> ladder) {
  std::vector<MeanEstimate> means;
  means.reserve(ladder.size());
  for (const auto& b : ladder) means.push_back(mean_u(b));
  return homotopy_curve(means);
}

HomotopyCurve homotopy_curve(const SystemModel& model, std::span<const double> alphas,
                             const ChainConfig& base_cfg, std::size_t workers) {
  if (alphas.empty() || alphas.front() != 0.0 || alphas.back() != 1.0)
    throw InputError("homotopy curve needs an alpha grid containing 0 and 1");
  const auto ladder = run_chain_ladder(model, alphas, base_cfg, workers);
  return homotopy_curve(std::span<const SampleBatch>(ladder));
}

BoundEstimate kl_pi_pi0(const BoundEstimate& delta_f, const MeanEstimate& pi_mean) {
  if (delta_f.kind != BoundKind::Gamma || delta_f.alpha != 1.0)
    throw InputError("kl_pi_pi0 needs the gamma(1) estimate of Delta F");
  if (pi_mean.alpha != 1.0) throw InputError("kl_pi_pi0 needs the mean of U under pi");
  BoundEstimate out;
  out.kind = BoundKind::KlPiPi0;
  out.alpha = 1.0;
  out.value = delta_f.value - pi_mean.mean;
  out.std_error = std::hypot(delta_f.std_error, pi_mean.std_error);
  out.n_effective = std::min(delta_f.n_effective, pi_mean.n_effective);
  if (out.value < 0.0) {
    out.unclipped_value = out.value;
    out.value = 0.0;
    out.clipped = true;
  }
  return out;
}

BoundEstimate kl_pi_pi0(const BoundEstimate& delta_f, const SampleBatch& batch_pi) {
  require_alpha(batch_pi, 1.0, "kl_pi_pi0");
  return kl_pi_pi0(delta_f, mean_u(batch_pi));
}

double log_mean_exp(std::span<const double> x, std::span<const double> weights) {
  if (x.empty()) throw InputError("log_mean_exp of an empty sequence");
  if (!weights.empty() && weights.size() != x.size())
    throw InputError("log_mean_exp: weights and values differ in length");
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (weights.empty() || weights[i] > 0.0) shift = std::max(shift, x[i]);
  if (!std::isfinite(shift)) throw NumericalError("log_mean_exp: no finite term with positive weight");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w <= 0.0) continue;
    num += w * std::exp(x[i] - shift);
    den += w;
  }
  return shift + std::log(num / den);
}

BoundEstimate dual_kl_objective(std::span<const double> psi_values_pi,
                                std::span<const double> psi_values_pi0) {
  if (psi_values_pi.empty() || psi_values_pi0.empty())
    throw InputError("dual_kl_objective needs samples from both pi and pi0");
  const double mean_pi = stable_mean(psi_values_pi);
  const double lme = log_mean_exp(psi_values_pi0);

  // delta method on log mean exp(psi), in shifted form
  double shift = psi_values_pi0[0];
  for (double v : psi_values_pi0) shift = std::max(shift, v);
  std::vector<double> w(psi_values_pi0.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(psi_values_pi0[i] - shift);
  const double w_mean = stable_mean(w);
  const double n_pi = static_cast<double>(psi_values_pi.size());
  const double n_pi0 = static_cast<double>(psi_values_pi0.size());

  BoundEstimate out;
  out.kind = BoundKind::DualObjective;
  out.value = mean_pi - lme;
  out.std_error = std::hypot(std::sqrt(sample_variance(psi_values_pi, mean_pi) / n_pi),
                             std::sqrt(sample_variance(w, w_mean) / n_pi0) / w_mean);
  out.n_effective = std::min(n_pi, n_pi0);
  return out;
}

double dual_kl_objective_weighted(std::span<const double> psi, std::span<const double> pi_weights,
                                  std::span<const double> pi0_weights) {
  if (psi.empty()) throw InputError("dual_kl_objective_weighted: empty input");
  if (pi_weights.size() != psi.size() || pi0_weights.size() != psi.size())
    throw InputError("dual_kl_objective_weighted: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    num += pi_weights[i] * psi[i];
    den += pi_weights[i];
  }
  return num / den - log_mean_exp(psi, pi0_weights);
}

BoundEstimate naive_exponential(const SampleBatch& batch_pi0) {
  require_alpha(batch_pi0, 0.0, "naive_exponential");
  const auto& u = batch_pi0.u_values;
  if (u.empty()) throw InputError("naive_exponential: empty batch");
  double shift = -u[0];
  for (double v : u) shift = std::max(shift, -v);
  std::vector<double> w(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) w[i] = std::exp(-u[i] - shift);
  const double w_mean = stable_mean(w);
  const ChainDiagnostics diag = diagnostics(batch_pi0);

  BoundEstimate out;
  out.kind = BoundKind::NaiveExponential;
  out.alpha = 0.0;
  out.value = -(shift + std::log(w_mean));
  out.n_effective = std::max(1.0, diag.ess_u);
  out.std_error = diag.degenerate
                      ? 0.0
                      : std::sqrt(sample_variance(w, w_mean)) / (w_mean * std::sqrt(out.n_effective));
  out.bias_prone = true;
  return out;
}

double gibbs_functional(std::span<const double> u_values, std::span<const double> rho,
                        std::span<const double> pi0) {
  if (u_values.size() != rho.size() || pi0.size() != rho.size())
    throw InputError("gibbs_functional: length mismatch");
  double energy = 0.0;
  double entropy = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] < 0.0) throw InputError("gibbs_functional: negative density");
    if (rho[i] == 0.0) continue;
    if (!(pi0[i] > 0.0)) throw InputError("gibbs_functional: rho not absolutely continuous wrt pi0");
    energy += rho[i] * u_values[i];
    entropy += rho[i] * std::log(rho[i] / pi0[i]);
  }
  return energy + entropy;
}

}  // namespace febounds
