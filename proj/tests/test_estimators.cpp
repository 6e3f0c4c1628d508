#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "febounds/errors.hpp"
#include "febounds/estimators.hpp"
#include "febounds/oracle.hpp"
#include "test_helpers.hpp"

using namespace febounds;
using namespace febounds::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Two spins, J = 0, U = -K s0 s1: four states summed by hand.
struct TwoSpinExact {
  double k;
  double mean_u(double alpha) const {
    double z = 0.0, zu = 0.0;
    for (double s0 : {-1.0, 1.0})
      for (double s1 : {-1.0, 1.0}) {
        const double u = -k * s0 * s1;
        z += std::exp(-alpha * u);
        zu += u * std::exp(-alpha * u);
      }
    return zu / z;
  }
  double gamma(double alpha) const {
    double z = 0.0;
    for (double s0 : {-1.0, 1.0})
      for (double s1 : {-1.0, 1.0}) z += 0.25 * std::exp(alpha * k * s0 * s1);
    return -std::log(z);
  }
};

std::vector<MeanEstimate> exact_means(const TwoSpinExact& ex, const std::vector<double>& alphas) {
  std::vector<MeanEstimate> out;
  for (double a : alphas) out.push_back({a, ex.mean_u(a), 0.0, kInf});
  return out;
}

ChainConfig chain(double alpha, std::size_t steps, std::uint64_t seed, double step = 1.0) {
  ChainConfig cfg = default_chain_config(steps, step, seed);
  cfg.target_alpha = alpha;
  return cfg;
}

SampleBatch constant_batch(double alpha, double u, std::size_t n) {
  SampleBatch b;
  b.target_alpha = alpha;
  b.u_values.assign(n, u);
  b.h0_values.assign(n, 0.0);
  return b;
}

}  // namespace

TEST(TwoSpinClosedForms, MatchHandSums) {
  const TwoSpinExact ex{1.0};
  for (double a : {0.0, 0.3, 0.5, 1.0}) {
    EXPECT_NEAR(ex.mean_u(a), -std::tanh(a), 1e-15);
    EXPECT_NEAR(ex.gamma(a), -std::log(std::cosh(a)), 1e-15);
  }
}

TEST(Bogoliubov, TwoSpinMcmcWithinThreeStandardErrors) {
  const auto m = ising_pair(0.0, 1.0);
  const auto lower = bogoliubov_lower(run_chain(m, chain(1.0, 111112, 31)));
  const auto upper = bogoliubov_upper(run_chain(m, chain(0.0, 111112, 32)));
  EXPECT_EQ(lower.kind, BoundKind::BogoliubovLower);
  EXPECT_NEAR(lower.value, -std::tanh(1.0), 3.0 * lower.std_error);
  EXPECT_NEAR(upper.value, 0.0, 3.0 * upper.std_error + 1e-15);
  EXPECT_GT(lower.std_error, 0.0);
}

TEST(Bogoliubov, GaussianMcmcWithinThreeStandardErrors) {
  const auto m = gaussian_pair(0.5);
  const auto lower = bogoliubov_lower(run_chain(m, chain(1.0, 200000, 41, 2.0)));
  const auto upper = bogoliubov_upper(run_chain(m, chain(0.0, 200000, 42, 2.0)));
  // E_pi[U] = c cov(x1, x2) = c * (-c / (1 - c^2)) = -1/3
  EXPECT_NEAR(lower.value, -1.0 / 3.0, 3.0 * lower.std_error);
  EXPECT_NEAR(upper.value, 0.0, 3.0 * upper.std_error);
}

TEST(Bogoliubov, ZeroAndConstantCoupling) {
  const auto zero = ising_pair(1.0, 0.0);
  EXPECT_EQ(bogoliubov_lower(run_chain(zero, chain(1.0, 5000, 1))).value, 0.0);
  const auto constant = constant_coupling(0.1);
  const auto up = bogoliubov_upper(run_chain(constant, chain(0.0, 5000, 1, 2.0)));
  EXPECT_EQ(up.value, 0.1);
  EXPECT_EQ(up.std_error, 0.0);
}

TEST(Bogoliubov, WrongTargetAlphaRejected) {
  const auto b = constant_batch(0.5, 1.0, 100);
  EXPECT_THROW(bogoliubov_lower(b), InputError);
  EXPECT_THROW(bogoliubov_upper(b), InputError);
  EXPECT_THROW(naive_exponential(b), InputError);
}

TEST(GammaTi, OracleFedTwoSpinWithinTolerance) {
  const TwoSpinExact ex{1.0};
  const auto g21 = gamma_ti(exact_means(ex, uniform_grid(21)));
  EXPECT_EQ(g21.front().gamma, 0.0);
  const double err21 = std::abs(g21.back().gamma + std::log(std::cosh(1.0)));
  EXPECT_LE(err21, 1e-3);
  const auto g41 = gamma_ti(exact_means(ex, uniform_grid(41)));
  const double err41 = std::abs(g41.back().gamma + std::log(std::cosh(1.0)));
  EXPECT_GE(err21 / err41, 3.0);
  // monotone integrand: trapezoid on a concave gamma undershoots in magnitude
  for (std::size_t i = 0; i < g21.size(); ++i) EXPECT_GE(g21[i].gamma, ex.gamma(g21[i].alpha) - 1e-15);
}

TEST(GammaTi, ZeroCouplingAndFlatIntegrand) {
  std::vector<MeanEstimate> zero, flat;
  for (double a : uniform_grid(11)) {
    zero.push_back({a, 0.0, 0.0, kInf});
    flat.push_back({a, 0.1, 0.0, kInf});
  }
  for (const auto& g : gamma_ti(zero)) EXPECT_EQ(g.gamma, 0.0);
  const auto g = gamma_ti(flat);
  EXPECT_EQ(g.back().gamma, 0.1);
}

TEST(GammaTi, StandardErrorIsTrapezoidWeightedRootSumSquare) {
  std::vector<MeanEstimate> ladder;
  const auto grid = uniform_grid(5);
  for (double a : grid) ladder.push_back({a, -a, 0.2, 100.0});
  const auto g = gamma_ti(ladder);
  const double h = 0.25;
  const double expected = 0.2 * std::sqrt(2 * (h / 2) * (h / 2) + 3 * h * h);
  EXPECT_NEAR(g.back().std_error, expected, 1e-15);
  EXPECT_NEAR(g[1].std_error, 0.2 * std::sqrt(2 * (h / 2) * (h / 2)), 1e-15);
  EXPECT_EQ(g[0].std_error, 0.0);
}

TEST(GammaTi, RejectsBadLadders) {
  std::vector<MeanEstimate> unsorted{{0.0, 0, 0, 1}, {0.5, 0, 0, 1}, {0.3, 0, 0, 1}};
  EXPECT_THROW(gamma_ti(unsorted), InputError);
  std::vector<MeanEstimate> no_zero{{0.1, 0, 0, 1}, {1.0, 0, 0, 1}};
  EXPECT_THROW(gamma_ti(no_zero), InputError);
}

TEST(Variational, EndpointIdentities) {
  const auto m = ising_rings(4, 1.0, 1.0);
  const auto alphas = uniform_grid(5);
  const auto ladder = run_chain_ladder(m, alphas, chain(1.0, 20000, 5));
  const auto gammas = gamma_ti(std::span<const SampleBatch>(ladder));
  const auto& pi = ladder.back();
  const auto& pi0 = ladder.front();

  const auto l0 = variational_lower(pi, gammas.front());
  const auto b_lower = bogoliubov_lower(pi);
  EXPECT_EQ(l0.value, b_lower.value);
  EXPECT_EQ(l0.std_error, b_lower.std_error);
  const auto u0 = variational_upper(pi0, gammas.front());
  const auto b_upper = bogoliubov_upper(pi0);
  EXPECT_EQ(u0.value, b_upper.value);
  EXPECT_EQ(u0.std_error, b_upper.std_error);

  EXPECT_EQ(variational_lower(pi, gammas.back()).value, gammas.back().gamma);
  EXPECT_EQ(variational_upper(pi, gammas.back()).value, gammas.back().gamma);
}

TEST(Variational, TwoSpinHalfwayValues) {
  const TwoSpinExact ex{1.0};
  const GammaPoint g{0.5, ex.gamma(0.5), 0.0, kInf};
  const MeanEstimate pi{1.0, ex.mean_u(1.0), 0.0, kInf};
  const MeanEstimate rho{0.5, ex.mean_u(0.5), 0.0, kInf};
  const double lower = variational_lower(pi, g).value;
  const double upper = variational_upper(rho, g).value;
  EXPECT_NEAR(lower, 0.5 * -std::tanh(1.0) - std::log(std::cosh(0.5)), 1e-14);
  EXPECT_NEAR(upper, 0.5 * -std::tanh(0.5) - std::log(std::cosh(0.5)), 1e-14);
  EXPECT_NEAR(lower, -0.50091, 1e-5);
  EXPECT_NEAR(upper, -0.35117, 1e-5);
  const double delta_f = -std::log(std::cosh(1.0));
  EXPECT_LT(-std::tanh(1.0), lower);
  EXPECT_LT(lower, delta_f);
  EXPECT_LT(delta_f, upper);
  EXPECT_LT(upper, 0.0);
}

TEST(Variational, InputErrors) {
  const GammaPoint g{0.5, -0.1, 0.0, 1.0};
  EXPECT_THROW(variational_upper(MeanEstimate{0.25, 0.0, 0.0, 1.0}, g), InputError);
  EXPECT_THROW(variational_lower(MeanEstimate{0.5, 0.0, 0.0, 1.0}, g), InputError);
  const std::vector<GammaPoint> gammas{{0.0, 0.0, 0.0, 1.0}, {1.0, -0.2, 0.0, 1.0}};
  EXPECT_THROW(gamma_at(gammas, 0.5), InputError);
  EXPECT_EQ(gamma_at(gammas, 1.0).gamma, -0.2);
}

TEST(HomotopyCurve, OracleFedTwoSpinIsMonotoneAndCloses) {
  const TwoSpinExact ex{1.0};
  const auto curve = homotopy_curve(exact_means(ex, uniform_grid(21)));
  ASSERT_EQ(curve.size(), 21u);
  EXPECT_NEAR(curve.lower_values.front(), -0.76159, 1e-5);
  EXPECT_EQ(curve.upper_values.front(), 0.0);
  EXPECT_NEAR(curve.lower_values.back(), -0.43378, 2e-4);
  EXPECT_EQ(curve.lower_values.back(), curve.upper_values.back());
  EXPECT_EQ(curve.lower_values.back(), curve.gamma_values.back());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve.lower_values[i], curve.lower_values[i - 1]);
    EXPECT_LE(curve.upper_values[i], curve.upper_values[i - 1]);
    EXPECT_LE(curve.lower_values[i], curve.upper_values[i]);
  }
}

TEST(HomotopyCurve, ZeroCouplingIsIdenticallyZero) {
  std::vector<MeanEstimate> zero;
  for (double a : uniform_grid(6)) zero.push_back({a, 0.0, 0.0, kInf});
  const auto curve = homotopy_curve(zero);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    EXPECT_EQ(curve.lower_values[i], 0.0);
    EXPECT_EQ(curve.upper_values[i], 0.0);
  }
}

TEST(HomotopyCurve, GaussianEndpointsMeetAtDeltaF) {
  const auto m = gaussian_pair(0.5);
  const auto alphas = uniform_grid(21);
  const auto exact = gaussian_oracle(m, alphas);
  std::vector<MeanEstimate> means;
  for (const auto& p : exact.gamma_curve) means.push_back({p.alpha, p.e_u_rho_alpha, 0.0, kInf});
  const auto curve = homotopy_curve(means);
  EXPECT_NEAR(curve.lower_values.front(), -1.0 / 3.0, 1e-14);
  EXPECT_NEAR(curve.upper_values.front(), 0.0, 1e-15);
  EXPECT_NEAR(curve.gamma_values.back(), 0.5 * std::log(0.75), 1e-3);
}

TEST(HomotopyCurve, McmcCurveInvariants) {
  const auto m = ising_rings(4, 1.0, 1.0);
  const auto alphas = uniform_grid(11);
  const auto serial = homotopy_curve(m, alphas, chain(1.0, 20000, 17), 1);
  const auto pooled = homotopy_curve(m, alphas, chain(1.0, 20000, 17), 3);
  EXPECT_EQ(serial.lower_values, pooled.lower_values);
  EXPECT_EQ(serial.upper_values, pooled.upper_values);
  EXPECT_EQ(serial.gamma_values.front(), 0.0);
  EXPECT_EQ(serial.lower_values.back(), serial.gamma_values.back());
  EXPECT_EQ(serial.upper_values.back(), serial.gamma_values.back());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    const double combined = std::hypot(serial.lower_std_errors[i], serial.upper_std_errors[i]);
    EXPECT_LE(serial.lower_values[i], serial.upper_values[i] + 3.0 * combined);
  }
  const std::vector<double> missing_one{0.0, 0.5};
  EXPECT_THROW(homotopy_curve(m, missing_one, chain(1.0, 100, 1)), InputError);
}

// Random spin models, random grids: exact means give monotone bound curves.
TEST(HomotopyCurve, PropertyOracleFedMonotonicity) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coupling(-2.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t half = 2 + rng() % 4;
    const auto m = ising_rings(half, coupling(rng), coupling(rng));
    std::vector<double> alphas{0.0, 1.0};
    const std::size_t extra = 1 + rng() % 30;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < extra; ++i) alphas.push_back(unit(rng));
    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
    const auto exact = enumerate_oracle(m, alphas);
    std::vector<MeanEstimate> means;
    for (const auto& p : exact.gamma_curve) means.push_back({p.alpha, p.e_u_rho_alpha, 0.0, kInf});
    const auto curve = homotopy_curve(means);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      EXPECT_GE(curve.lower_values[i], curve.lower_values[i - 1]) << "trial " << trial;
      EXPECT_LE(curve.upper_values[i], curve.upper_values[i - 1]) << "trial " << trial;
    }
  }
}

TEST(KlPiPi0, ExactInputs) {
  const TwoSpinExact ex{1.0};
  const BoundEstimate delta_f{ex.gamma(1.0), 0.0, kInf, BoundKind::Gamma, 1.0};
  const auto kl = kl_pi_pi0(delta_f, MeanEstimate{1.0, ex.mean_u(1.0), 0.0, kInf});
  EXPECT_NEAR(kl.value, 0.32781, 1e-5);
  EXPECT_FALSE(kl.clipped);

  const auto g = gaussian_oracle(gaussian_pair(0.5), std::vector<double>{1.0});
  const BoundEstimate gdf{g.delta_f, 0.0, kInf, BoundKind::Gamma, 1.0};
  EXPECT_NEAR(kl_pi_pi0(gdf, MeanEstimate{1.0, g.e_u_pi, 0.0, kInf}).value, 0.18949, 1e-5);

  const BoundEstimate zero{0.0, 0.0, kInf, BoundKind::Gamma, 1.0};
  EXPECT_EQ(kl_pi_pi0(zero, MeanEstimate{1.0, 0.0, 0.0, kInf}).value, 0.0);
}

TEST(KlPiPi0, NegativeRawValueIsClippedAndFlagged) {
  const BoundEstimate delta_f{-0.5, 0.01, 100.0, BoundKind::Gamma, 1.0};
  const auto kl = kl_pi_pi0(delta_f, MeanEstimate{1.0, -0.49, 0.01, 100.0});
  EXPECT_EQ(kl.value, 0.0);
  EXPECT_TRUE(kl.clipped);
  EXPECT_NEAR(*kl.unclipped_value, -0.01, 1e-15);
}

TEST(KlPiPi0, RequiresGammaAtOne) {
  const BoundEstimate wrong{0.0, 0.0, 1.0, BoundKind::BogoliubovLower, 1.0};
  EXPECT_THROW(kl_pi_pi0(wrong, MeanEstimate{1.0, 0.0, 0.0, 1.0}), InputError);
  const BoundEstimate half{0.0, 0.0, 1.0, BoundKind::Gamma, 0.5};
  EXPECT_THROW(kl_pi_pi0(half, MeanEstimate{1.0, 0.0, 0.0, 1.0}), InputError);
}

TEST(DualObjective, ZeroPsiGivesZero) {
  const std::vector<double> zeros(50, 0.0);
  const auto d = dual_kl_objective(zeros, zeros);
  EXPECT_EQ(d.value, 0.0);
  EXPECT_EQ(d.kind, BoundKind::DualObjective);
  EXPECT_THROW(dual_kl_objective({}, zeros), InputError);
}

TEST(DualObjective, LargePsiDoesNotOverflow) {
  const std::vector<double> pi{1000.0, 1000.0};
  const std::vector<double> pi0{1000.0, 999.0};
  const auto d = dual_kl_objective(pi, pi0);
  EXPECT_TRUE(std::isfinite(d.value));
  EXPECT_NEAR(d.value, -std::log((1.0 + std::exp(-1.0)) / 2.0), 1e-12);
}

TEST(DualObjective, ExactMaximizerAndUpperBound) {
  const auto m = ising_pair(0.0, 1.0);
  const auto exact = enumerate_oracle(m, std::vector<double>{}, true);
  std::vector<double> minus_u;
  for (double u : exact.u_table) minus_u.push_back(-u);
  const double at_max = dual_kl_objective_weighted(minus_u, exact.pi_density, exact.pi0_density);
  EXPECT_NEAR(at_max, 0.32781, 1e-5);
  EXPECT_NEAR(at_max, exact.kl_pi_pi0, 1e-12);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> bounded(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> psi(exact.u_table.size());
    for (auto& p : psi) p = bounded(rng);
    EXPECT_LE(dual_kl_objective_weighted(psi, exact.pi_density, exact.pi0_density),
              exact.kl_pi_pi0 + 1e-12);
  }
}

TEST(NaiveExponential, ExactCases) {
  const auto zero = naive_exponential(constant_batch(0.0, 0.0, 100));
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.bias_prone);
  EXPECT_EQ(naive_exponential(constant_batch(0.0, 0.1, 100)).value, 0.1);
  EXPECT_EQ(naive_exponential(constant_batch(0.0, -7.3, 100)).value, -7.3);
}

TEST(NaiveExponential, TwoSpinRecoversDeltaF) {
  const auto m = ising_pair(0.0, 1.0);
  const auto est = naive_exponential(run_chain(m, chain(0.0, 111112, 8)));
  EXPECT_NEAR(est.value, -std::log(std::cosh(1.0)), 3.0 * est.std_error);
}

TEST(GibbsFunctional, MinimizedByPi) {
  const auto m = ising_rings(3, 0.0, 1.3);  // H0 = 0, uniform pi0
  const auto exact = enumerate_oracle(m, std::vector<double>{}, true);
  const double at_pi = gibbs_functional(exact.u_table, exact.pi_density, exact.pi0_density);
  EXPECT_NEAR(at_pi, exact.delta_f, 1e-12);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> rho(exact.pi_density.size());
    double total = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      rho[i] = exact.pi_density[i] * (1.0 + 0.2 * noise(rng));
      total += rho[i];
    }
    for (auto& r : rho) r /= total;
    EXPECT_GT(gibbs_functional(exact.u_table, rho, exact.pi0_density), exact.delta_f);
  }
}
