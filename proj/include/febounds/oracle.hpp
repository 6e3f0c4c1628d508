#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "febounds/model.hpp"

namespace febounds {

enum class OracleMethod { GaussianAnalytic, Enumeration, Quadrature };

std::string_view to_string(OracleMethod method);

struct GammaCurvePoint {
  double alpha = 0.0;
  double gamma = 0.0;
  double e_u_rho_alpha = 0.0;
};

struct OracleResult {
  double delta_f = 0.0;
  double e_u_pi = 0.0;
  double e_u_pi0 = 0.0;
  double kl_pi_pi0 = 0.0;
  double kl_pi0_pi = 0.0;
  double e_h0_pi0 = 0.0;  // reference energy scale of the decoupled system
  std::vector<GammaCurvePoint> gamma_curve;
  OracleMethod method = OracleMethod::GaussianAnalytic;
  double error_bound = 0.0;

  // Enumeration only, when requested: probabilities indexed by the spin
  // configuration bits (bit i set <=> spin i is +1), and U per configuration.
  std::vector<double> pi_density;
  std::vector<double> pi0_density;
  std::vector<double> u_table;

  // Quadrature only: the refined result disagreed with the coarse one by more
  // than the requested tolerance.
  bool tolerance_exceeded = false;
};

inline constexpr std::size_t kEnumerationCap = 24;
inline constexpr std::size_t kQuadratureMaxDimension = 3;

/// Closed-form values for quadratic H0 and U via Cholesky log-determinants:
/// Delta F = (logdet(D+C) - logdet D) / 2, E_pi[U] = tr(C (D+C)^-1) / 2 and
/// gamma(alpha) = (logdet(D + alpha C) - logdet D) / 2. Also handles the
/// constant-coupling family. Throws OracleRefusal for other kinds.
OracleResult gaussian_oracle(const SystemModel& model, std::span<const double> alphas);

/// Exact sums over all 2^n spin configurations. Refuses n > 24.
OracleResult enumerate_oracle(const SystemModel& model, std::span<const double> alphas,
                              bool keep_densities = false, std::size_t workers = 1);

struct QuadratureGrid {
  double lower = -8.0;
  double upper = 8.0;
  std::size_t points = 201;   // per axis, coarse grid; the refined grid halves the spacing
  double tolerance = 1e-5;    // error_bound above this sets tolerance_exceeded
};

/// Tensor-grid trapezoid integration over [lower, upper]^d for d <= 3.
/// The result comes from the refined grid; error_bound is the largest
/// difference between coarse and refined values. Refuses when the density is
/// not below 1e-14 (relative to its peak) on a face of the box.
OracleResult quadrature_oracle(const SystemModel& model, const QuadratureGrid& grid,
                               std::span<const double> alphas);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct BracketReport {
  std::vector<CheckOutcome> checks;
  bool all_passed() const;
};

// Bracket E_pi[U] <= Delta F <= E_pi0[U], KL >= 0, Delta F = E_pi[U] + KL,
// and E_{rho_alpha}[U] nonincreasing along the gamma curve. Tolerance is
// max(1e-10, error_bound).
BracketReport check_bracket(const OracleResult& result);

}  // namespace febounds
