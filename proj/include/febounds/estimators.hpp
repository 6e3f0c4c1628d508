#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "febounds/model.hpp"
#include "febounds/sampler.hpp"

namespace febounds {

enum class BoundKind {
  BogoliubovLower,
  BogoliubovUpper,
  VariationalLower,
  VariationalUpper,
  Gamma,
  NaiveExponential,
  KlPiPi0,
  DualObjective,
};

std::string_view to_string(BoundKind kind);

struct BoundEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double n_effective = 1.0;  // +inf for values computed from exact inputs
  BoundKind kind = BoundKind::BogoliubovLower;
  std::optional<double> alpha;
  // KL only: the raw estimate was negative and has been clipped to zero.
  bool clipped = false;
  std::optional<double> unclipped_value;
  // Exponential-average estimators carry a known small-sample bias.
  bool bias_prone = false;
};

// First moment of U under rho_alpha, with its standard error. Exact inputs
// use std_error 0 and n_effective +inf.
struct MeanEstimate {
  double alpha = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double n_effective = 1.0;
};

struct GammaPoint {
  double alpha = 0.0;
  double gamma = 0.0;
  double std_error = 0.0;
  double n_effective = 1.0;
};

// Mean of the cached U values; standard error from the batch-means ESS.
MeanEstimate mean_u(const SampleBatch& batch);

// Mean of a constant series is returned exactly.
double stable_mean(std::span<const double> values);

BoundEstimate bogoliubov_lower(const SampleBatch& batch_pi);
BoundEstimate bogoliubov_upper(const SampleBatch& batch_pi0);
BoundEstimate bogoliubov_lower(const MeanEstimate& pi_mean);
BoundEstimate bogoliubov_upper(const MeanEstimate& pi0_mean);

/// gamma(alpha) = int_0^alpha E_{rho_s}[U] ds by the trapezoid rule on the
/// ladder grid. The ladder must start at alpha = 0 and be strictly increasing;
/// gamma at the first point is exactly 0. Standard errors are the
/// root-sum-square of the trapezoid-weighted per-point errors.
std::vector<GammaPoint> gamma_ti(std::span<const MeanEstimate> ladder);
std::vector<GammaPoint> gamma_ti(std::span<const SampleBatch> ladder);

// The gamma(1) entry of a TI curve, as the Delta F estimate.
BoundEstimate delta_f_estimate(std::span<const GammaPoint> gammas);

// Looks up gamma at `alpha`; throws InputError when the grid lacks it.
const GammaPoint& gamma_at(std::span<const GammaPoint> gammas, double alpha);

// (1 - alpha) E_pi[U] + gamma(alpha), from psi = -alpha U.
BoundEstimate variational_lower(const MeanEstimate& pi_mean, const GammaPoint& gamma);
BoundEstimate variational_lower(const SampleBatch& batch_pi, const GammaPoint& gamma);

// (1 - alpha) E_{rho_alpha}[U] + gamma(alpha), using
// KL(rho_alpha, pi0) = gamma(alpha) - alpha E_{rho_alpha}[U].
BoundEstimate variational_upper(const MeanEstimate& rho_mean, const GammaPoint& gamma);
BoundEstimate variational_upper(const SampleBatch& batch_rho, const GammaPoint& gamma);

struct HomotopyCurve {
  std::vector<double> alphas;
  std::vector<double> gamma_values;
  std::vector<double> gamma_std_errors;
  std::vector<double> mean_u_values;
  std::vector<double> mean_u_std_errors;
  std::vector<double> lower_values;
  std::vector<double> lower_std_errors;
  std::vector<double> upper_values;
  std::vector<double> upper_std_errors;

  std::size_t size() const noexcept { return alphas.size(); }
};

// Curve from per-alpha means; the grid must contain 0 and 1, and the last
// entry (alpha = 1) supplies E_pi[U] for the lower bound.
HomotopyCurve homotopy_curve(std::span<const MeanEstimate> ladder);
HomotopyCurve homotopy_curve(std::span<const SampleBatch> ladder);
HomotopyCurve homotopy_curve(const SystemModel& model, std::span<const double> alphas,
                             const ChainConfig& base_cfg, std::size_t workers = 1);

// KL(pi, pi0) = Delta F - E_pi[U]. Negative raw values are clipped to 0 and flagged.
BoundEstimate kl_pi_pi0(const BoundEstimate& delta_f, const MeanEstimate& pi_mean);
BoundEstimate kl_pi_pi0(const BoundEstimate& delta_f, const SampleBatch& batch_pi);

/// E_pi[psi] - log E_pi0[exp(psi)] from psi evaluated on samples of pi and
/// pi0. With exact expectations the objective is at most KL(pi, pi0) for every
/// psi, with equality at psi = -U + const.
BoundEstimate dual_kl_objective(std::span<const double> psi_values_pi,
                                std::span<const double> psi_values_pi0);

// Same objective with explicit probability weights, for enumerated densities.
double dual_kl_objective_weighted(std::span<const double> psi, std::span<const double> pi_weights,
                                  std::span<const double> pi0_weights);

// -log mean(exp(-U)) under pi0. Kept for comparison with TI.
BoundEstimate naive_exponential(const SampleBatch& batch_pi0);

// E_rho[U] + KL(rho, pi0) for a density on an enumerated state space. Equals
// Delta F at rho = pi and exceeds it everywhere else.
double gibbs_functional(std::span<const double> u_values, std::span<const double> rho,
                        std::span<const double> pi0);

// log(sum_i w_i exp(x_i) / sum_i w_i), shifted by max x_i.
double log_mean_exp(std::span<const double> x, std::span<const double> weights = {});

}  // namespace febounds
