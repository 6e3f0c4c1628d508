#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "febounds/errors.hpp"
#include "febounds/estimators.hpp"
#include "febounds/oracle.hpp"
#include "febounds/sampler.hpp"
#include "test_helpers.hpp"

using namespace febounds;
using namespace febounds::testing;

namespace {

ChainConfig chain(double alpha, std::size_t steps, std::uint64_t seed, double step_size = 1.0) {
  ChainConfig cfg = default_chain_config(steps, step_size, seed);
  cfg.target_alpha = alpha;
  return cfg;
}

std::size_t config_index(const State& s) {
  std::size_t index = 0;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s[k] > 0) index |= std::size_t{1} << k;
  return index;
}

}  // namespace

TEST(RunChain, DeterministicForFixedSeed) {
  const auto m = gaussian_pair(0.5);
  const auto a = run_chain(m, chain(1.0, 20000, 42));
  const auto b = run_chain(m, chain(1.0, 20000, 42));
  EXPECT_EQ(a.u_values, b.u_values);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.acceptance_rate, b.acceptance_rate);
  const auto c = run_chain(m, chain(1.0, 20000, 43));
  EXPECT_NE(a.u_values, c.u_values);

  const auto s = ising_rings(4, 1.0, 1.0);
  EXPECT_EQ(run_chain(s, chain(0.5, 20000, 42)).u_values, run_chain(s, chain(0.5, 20000, 42)).u_values);
}

TEST(RunChain, IndependentSpinsHaveZeroCorrelation) {
  const auto m = ising_pair(0.0, 0.0);
  const auto batch = run_chain(m, chain(1.0, 100000, 11));
  std::vector<double> corr;
  for (const auto& s : batch.states) corr.push_back(s[0] * s[1]);
  const auto diag = series_diagnostics(corr);
  EXPECT_LE(std::abs(stable_mean(corr)), 4.0 / std::sqrt(diag.ess_u));
  // J = K = 0: every proposal has zero energy change
  EXPECT_EQ(batch.acceptance_rate, 1.0);
}

TEST(RunChain, DecoupledGaussianHasUnitMarginals) {
  const auto m = gaussian_pair(0.0);
  const auto batch = run_chain(m, chain(0.0, 100000, 5, 2.5));
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<double> x;
    for (const auto& s : batch.states) x.push_back(s[k]);
    const double mean = stable_mean(x);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size() - 1);
    EXPECT_NEAR(var, 1.0, 0.05) << "coordinate " << k;
  }
}

TEST(RunChain, CachedEnergiesMatchStates) {
  const SystemModel models[] = {gaussian_d4(0.3), ising_rings(6, 1.0, 2.0), quartic_pair(1.0, 0.5)};
  for (const auto& m : models) {
    const auto batch = run_chain(m, chain(0.7, 5000, 9));
    ASSERT_EQ(batch.states.size(), batch.u_values.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      EXPECT_EQ(batch.u_values[i], m.eval_u(batch.states[i]));
      EXPECT_EQ(batch.h0_values[i], m.eval_h0(batch.states[i]));
    }
  }
}

TEST(RunChain, BurnInAndThinning) {
  const auto m = gaussian_pair(0.2);
  ChainConfig cfg = chain(1.0, 1000, 1);
  cfg.burn_in = 100;
  cfg.thinning = 7;
  const auto batch = run_chain(m, cfg);
  EXPECT_EQ(batch.size(), (900u + 6u) / 7u);
  cfg.keep_states = false;
  const auto slim = run_chain(m, cfg);
  EXPECT_TRUE(slim.states.empty());
  EXPECT_EQ(slim.u_values, batch.u_values);
}

TEST(RunChain, InvalidConfigs) {
  const auto m = gaussian_pair(0.2);
  ChainConfig cfg = chain(1.0, 100, 1);
  cfg.burn_in = 100;
  EXPECT_THROW(run_chain(m, cfg), ValidationError);
  cfg.burn_in = 0;
  cfg.thinning = 0;
  EXPECT_THROW(run_chain(m, cfg), ValidationError);
  cfg.thinning = 1;
  cfg.target_alpha = 1.2;
  EXPECT_THROW(run_chain(m, cfg), ValidationError);
}

TEST(RunChain, NonFiniteEnergyAbortsWithStateDump) {
  // a huge quartic step overflows x^4
  const auto m = quartic_pair(1.0, 0.0);
  ChainConfig cfg = chain(0.0, 100, 1, 1e100);
  try {
    run_chain(m, cfg);
    FAIL();
  } catch (const SamplerError& e) {
    EXPECT_NE(std::string(e.what()).find("state = ["), std::string::npos);
  }
}

TEST(RunChain, StationaryDistributionMatchesEnumeration) {
  // At J = K = 1 single flips cross between the two ordered states too rarely
  // for 10^6 steps to resolve all 256 probabilities to 0.02.
  const auto m = ising_rings(4, 0.5, 0.5);
  const std::vector<double> alphas{1.0};
  const auto exact = enumerate_oracle(m, alphas, true);
  ChainConfig cfg = chain(1.0, 1000000, 77);
  cfg.burn_in = 1000;
  const auto batch = run_chain(m, cfg);
  std::vector<double> hist(exact.pi_density.size(), 0.0);
  for (const auto& s : batch.states) hist[config_index(s)] += 1.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i)
    tv += std::abs(hist[i] / static_cast<double>(batch.size()) - exact.pi_density[i]);
  EXPECT_LE(0.5 * tv, 0.02);
}

TEST(Diagnostics, IidSeriesHasHalfIact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  SampleBatch batch;
  for (int i = 0; i < 40000; ++i) batch.u_values.push_back(normal(rng));
  const auto d = diagnostics(batch);
  EXPECT_LT(d.iact_u, 0.75);
  EXPECT_GT(d.ess_u, 0.65 * 40000);
  EXPECT_LE(d.ess_u, 40000.0);
  EXPECT_FALSE(d.degenerate);
}

TEST(Diagnostics, ShuffledChainLosesAutocorrelation) {
  const auto m = gaussian_pair(0.5);
  auto batch = run_chain(m, chain(1.0, 50000, 8, 0.3));
  const double sticky = diagnostics(batch).iact_u;
  std::mt19937_64 rng(1);
  std::shuffle(batch.u_values.begin(), batch.u_values.end(), rng);
  const double shuffled = diagnostics(batch).iact_u;
  EXPECT_GT(sticky, 5.0);
  EXPECT_LT(shuffled, 0.8);
}

TEST(Diagnostics, ConstantSeriesIsDegenerate) {
  SampleBatch batch;
  batch.u_values.assign(100, 0.3);
  const auto d = diagnostics(batch);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.iact_u, 0.5);
  EXPECT_EQ(d.ess_u, 100.0);
}

TEST(Diagnostics, OversizedStepMakesStickyChain) {
  const auto m = gaussian_pair(0.5);
  const auto good = run_chain(m, chain(1.0, 200000, 3, 1.0));
  const auto sticky = run_chain(m, chain(1.0, 200000, 3, 100.0));
  const auto dg = diagnostics(good);
  const auto ds = diagnostics(sticky);
  EXPECT_LT(ds.acceptance_rate, 0.01);
  ASSERT_FALSE(ds.degenerate);
  EXPECT_GT(ds.iact_u, 20.0 * dg.iact_u);
  EXPECT_GT(ds.iact_u, 10.0);
}

TEST(Diagnostics, TooShortSeriesRejected) {
  SampleBatch batch;
  batch.u_values.assign(5, 1.0);
  EXPECT_THROW(diagnostics(batch), InputError);
}

TEST(Ladder, SingleAndEndpointLadders) {
  const auto m = ising_pair(0.0, 1.0);
  ChainConfig base = chain(1.0, 2000, 100);
  const std::vector<double> zero{0.0};
  const auto one = run_chain_ladder(m, zero, base);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].target_alpha, 0.0);
  EXPECT_EQ(one[0].seed, 100u);

  const std::vector<double> ends{0.0, 1.0};
  const auto two = run_chain_ladder(m, ends, base);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1].target_alpha, 1.0);
  EXPECT_EQ(two[1].seed, 101u);
  ChainConfig direct = base;
  direct.seed = 101;
  EXPECT_EQ(two[1].u_values, run_chain(m, direct).u_values);
}

TEST(Ladder, WorkerCountDoesNotChangeResults) {
  const auto m = ising_rings(6, 1.0, 1.0);
  const auto alphas = uniform_grid(9);
  const ChainConfig base = chain(1.0, 5000, 7);
  const auto serial = run_chain_ladder(m, alphas, base, 1);
  const auto pooled = run_chain_ladder(m, alphas, base, 4);
  ASSERT_EQ(serial.size(), pooled.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].target_alpha, alphas[i]);
    EXPECT_EQ(serial[i].u_values, pooled[i].u_values);
    EXPECT_EQ(serial[i].states, pooled[i].states);
  }
}

TEST(Ladder, RejectsUnsortedAndTagsErrors) {
  const auto m = quartic_pair(1.0, 0.0);
  const std::vector<double> unsorted{0.0, 0.5, 0.4};
  EXPECT_THROW(run_chain_ladder(m, unsorted, chain(1.0, 100, 1)), InputError);
  const std::vector<double> alphas{0.0, 0.25};
  try {
    run_chain_ladder(m, alphas, chain(1.0, 100, 1, 1e100));
    FAIL();
  } catch (const SamplerError& e) {
    EXPECT_NE(std::string(e.what()).find("alpha = 0"), std::string::npos);
  }
}

TEST(Ladder, MeanCouplingDecreasesAlongTheLadder) {
  // d/dalpha E_{rho_alpha}[U] = -Var(U) <= 0; compared against the exact curve
  const auto m = ising_rings(6, 1.0, 1.0);
  const auto alphas = uniform_grid(21);
  const auto exact = enumerate_oracle(m, alphas);
  const auto ladder = run_chain_ladder(m, alphas, chain(1.0, 60000, 2024));
  std::vector<MeanEstimate> means;
  for (const auto& b : ladder) means.push_back(mean_u(b));
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    EXPECT_NEAR(means[i].mean, exact.gamma_curve[i].e_u_rho_alpha, 4.0 * means[i].std_error + 1e-12)
        << "alpha " << alphas[i];
    if (i > 0) {
      EXPECT_LE(exact.gamma_curve[i].e_u_rho_alpha, exact.gamma_curve[i - 1].e_u_rho_alpha);
      EXPECT_LE(means[i].mean - means[i - 1].mean,
                4.0 * std::hypot(means[i].std_error, means[i - 1].std_error));
    }
  }
}
