#include "febounds/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "febounds/errors.hpp"
#include "febounds/parallel.hpp"

namespace febounds {

std::string_view to_string(OracleMethod method) {
  switch (method) {
    case OracleMethod::GaussianAnalytic:
      return "gaussian_analytic";
    case OracleMethod::Enumeration:
      return "enumeration";
    case OracleMethod::Quadrature:
      return "quadrature";
  }
  return "unknown";
}

bool BracketReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

namespace {

void check_alphas(std::span<const double> alphas) {
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw InputError(fmt::format("alpha {} outside [0, 1]", a));
}

// ---------------------------------------------------------------- analytic

struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double logdet = 0.0;
};

Factor factor(const Eigen::MatrixXd& m, std::string_view name) {
  Factor f{Eigen::LLT<Eigen::MatrixXd>(m), 0.0};
  if (f.llt.info() != Eigen::Success)
    throw NumericalError(fmt::format("Cholesky factorization of {} failed", name));
  const Eigen::MatrixXd l = f.llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) f.logdet += 2.0 * std::log(l(i, i));
  return f;
}

OracleResult constant_coupling_oracle(const SystemModel& model, std::span<const double> alphas) {
  const double c = model.beta() * std::get<ConstantCouplingParams>(model.config().params).value;
  OracleResult r;
  r.method = OracleMethod::GaussianAnalytic;
  r.delta_f = c;
  r.e_u_pi = c;
  r.e_u_pi0 = c;
  r.e_h0_pi0 = 0.5 * static_cast<double>(model.dimension());
  for (double a : alphas) r.gamma_curve.push_back({a, a * c, c});
  return r;
}

// ------------------------------------------------------- summation oracles

// Partial sums over a contiguous chunk of nodes.
struct ChunkSums {
  std::vector<double> z;    // per tempered level: sum w exp(-(E - min))
  std::vector<double> zu;   // same, weighted by U
  double zh0 = 0.0;         // level alpha = 0, weighted by H0
  std::vector<double> face_max;
};

constexpr std::size_t kChunk = std::size_t{1} << 14;

// Visits every node of a finite state space through `node(i, state)`, which
// fills the state and returns the integration weight. Levels are
// [0, 1, alphas...]. Chunked so the reduction order is fixed.
template <typename NodeFn, typename FaceFn>
OracleResult summation_oracle(const SystemModel& model, std::size_t count,
                              std::span<const double> alphas, std::size_t faces, NodeFn node,
                              FaceFn face_mask, std::size_t workers, bool keep_densities,
                              std::vector<double>* face_max_out) {
  std::vector<double> levels{0.0, 1.0};
  levels.insert(levels.end(), alphas.begin(), alphas.end());
  const std::size_t nl = levels.size();
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  const std::size_t dim = model.dimension();

  // pass 1: minimum tempered energy per level
  std::vector<std::vector<double>> chunk_min(chunks,
                                             std::vector<double>(nl, std::numeric_limits<double>::infinity()));
  parallel_for_index(chunks, workers, [&](std::size_t c) {
    State s(dim);
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      node(i, s);
      const double h0 = model.eval_h0(s);
      const double u = model.eval_u(s);
      for (std::size_t l = 0; l < nl; ++l)
        chunk_min[c][l] = std::min(chunk_min[c][l], h0 + levels[l] * u);
    }
  });
  std::vector<double> shift(nl, std::numeric_limits<double>::infinity());
  for (const auto& cm : chunk_min)
    for (std::size_t l = 0; l < nl; ++l) shift[l] = std::min(shift[l], cm[l]);
  for (double m : shift)
    if (!std::isfinite(m)) throw NumericalError("non-finite minimum energy during summation");

  // pass 2: partition sums and first moments
  std::vector<ChunkSums> partial(chunks);
  parallel_for_index(chunks, workers, [&](std::size_t c) {
    ChunkSums& p = partial[c];
    p.z.assign(nl, 0.0);
    p.zu.assign(nl, 0.0);
    p.face_max.assign(faces, 0.0);
    State s(dim);
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double w = node(i, s);
      const double h0 = model.eval_h0(s);
      const double u = model.eval_u(s);
      const unsigned mask = face_mask(i);
      for (std::size_t l = 0; l < nl; ++l) {
        const double boltz = std::exp(-(h0 + levels[l] * u - shift[l]));
        p.z[l] += w * boltz;
        p.zu[l] += w * boltz * u;
        if (mask != 0)
          for (std::size_t f = 0; f < faces; ++f)
            if (mask & (1u << f)) p.face_max[f] = std::max(p.face_max[f], boltz);
      }
      p.zh0 += w * std::exp(-(h0 - shift[0])) * h0;
    }
  });
  std::vector<double> z(nl, 0.0), zu(nl, 0.0);
  double zh0 = 0.0;
  std::vector<double> face_max(faces, 0.0);
  for (const auto& p : partial) {
    for (std::size_t l = 0; l < nl; ++l) {
      z[l] += p.z[l];
      zu[l] += p.zu[l];
    }
    zh0 += p.zh0;
    for (std::size_t f = 0; f < faces; ++f) face_max[f] = std::max(face_max[f], p.face_max[f]);
  }
  if (face_max_out) *face_max_out = face_max;

  const double log_z0 = std::log(z[0]) - shift[0];
  const double log_z = std::log(z[1]) - shift[1];

  // pass 3: both KL divergences by direct summation of the densities
  std::vector<std::pair<double, double>> kl_partial(chunks, {0.0, 0.0});
  OracleResult r;
  if (keep_densities) {
    r.pi_density.resize(count);
    r.pi0_density.resize(count);
    r.u_table.resize(count);
  }
  parallel_for_index(chunks, workers, [&](std::size_t c) {
    State s(dim);
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double w = node(i, s);
      const double h0 = model.eval_h0(s);
      const double u = model.eval_u(s);
      const double log_pi = -(h0 + u) - log_z;
      const double log_pi0 = -h0 - log_z0;
      const double pi = std::exp(log_pi);
      const double pi0 = std::exp(log_pi0);
      kl_partial[c].first += w * pi * (log_pi - log_pi0);
      kl_partial[c].second += w * pi0 * (log_pi0 - log_pi);
      if (keep_densities) {
        r.pi_density[i] = w * pi;
        r.pi0_density[i] = w * pi0;
        r.u_table[i] = u;
      }
    }
  });
  for (const auto& [a, b] : kl_partial) {
    r.kl_pi_pi0 += a;
    r.kl_pi0_pi += b;
  }

  r.delta_f = -(log_z - log_z0);
  r.e_u_pi0 = zu[0] / z[0];
  r.e_u_pi = zu[1] / z[1];
  r.e_h0_pi0 = zh0 / z[0];
  for (std::size_t l = 2; l < nl; ++l) {
    const double log_za = std::log(z[l]) - shift[l];
    r.gamma_curve.push_back({levels[l], -(log_za - log_z0), zu[l] / z[l]});
  }
  return r;
}

}  // namespace

OracleResult gaussian_oracle(const SystemModel& model, std::span<const double> alphas) {
  check_alphas(alphas);
  if (model.kind() == ModelKind::ConstantCoupling) return constant_coupling_oracle(model, alphas);
  if (model.kind() != ModelKind::GaussianPair)
    throw OracleRefusal(fmt::format("gaussian oracle does not apply to {} models",
                                    to_string(model.kind())));
  const auto& params = std::get<GaussianPairParams>(model.config().params);
  const Eigen::MatrixXd d = model.beta() * params.decoupled;
  const Eigen::MatrixXd c = model.beta() * params.coupling;
  const auto dim = static_cast<double>(model.dimension());

  const Factor fd = factor(d, "D");
  const Factor fh = factor(d + c, "D+C");

  OracleResult r;
  r.method = OracleMethod::GaussianAnalytic;
  r.delta_f = 0.5 * (fh.logdet - fd.logdet);
  r.e_u_pi0 = 0.5 * fd.llt.solve(c).trace();
  r.e_u_pi = 0.5 * fh.llt.solve(c).trace();
  r.e_h0_pi0 = 0.5 * fd.llt.solve(d).trace();
  // KL between centred normals with precisions D+C and D
  r.kl_pi_pi0 = 0.5 * (fh.llt.solve(d).trace() - dim + fh.logdet - fd.logdet);
  r.kl_pi0_pi = 0.5 * (fd.llt.solve(d + c).trace() - dim + fd.logdet - fh.logdet);
  for (double a : alphas) {
    const Factor fa = factor(d + a * c, "D+alpha*C");
    r.gamma_curve.push_back({a, 0.5 * (fa.logdet - fd.logdet), 0.5 * fa.llt.solve(c).trace()});
  }
  return r;
}

OracleResult enumerate_oracle(const SystemModel& model, std::span<const double> alphas,
                              bool keep_densities, std::size_t workers) {
  check_alphas(alphas);
  if (!model.is_discrete())
    throw OracleRefusal(fmt::format("enumeration oracle needs a spin model, got {}",
                                    to_string(model.kind())));
  const std::size_t n = model.dimension();
  if (n > kEnumerationCap)
    throw OracleRefusal(fmt::format("enumeration refused: {} spins exceeds the cap of {} ({} states)",
                                    n, kEnumerationCap, "2^" + std::to_string(n)));
  const std::size_t count = std::size_t{1} << n;
  auto node = [n](std::size_t index, State& s) {
    for (std::size_t k = 0; k < n; ++k) s[k] = ((index >> k) & 1u) ? 1.0 : -1.0;
    return 1.0;
  };
  auto no_faces = [](std::size_t) { return 0u; };
  OracleResult r = summation_oracle(model, count, alphas, 0, node, no_faces, workers,
                                    keep_densities, nullptr);
  r.method = OracleMethod::Enumeration;
  return r;
}

OracleResult quadrature_oracle(const SystemModel& model, const QuadratureGrid& grid,
                               std::span<const double> alphas) {
  check_alphas(alphas);
  if (model.is_discrete())
    throw OracleRefusal("quadrature oracle needs a continuous model");
  const std::size_t dim = model.dimension();
  if (dim > kQuadratureMaxDimension)
    throw OracleRefusal(fmt::format("quadrature refused: dimension {} exceeds {}", dim,
                                    kQuadratureMaxDimension));
  if (!(grid.upper > grid.lower) || grid.points < 3)
    throw InputError("quadrature grid needs upper > lower and at least 3 points per axis");

  auto run = [&](std::size_t points, std::vector<double>* faces) {
    const double h = (grid.upper - grid.lower) / static_cast<double>(points - 1);
    std::size_t count = 1;
    for (std::size_t k = 0; k < dim; ++k) count *= points;
    auto node = [=](std::size_t index, State& s) {
      double w = 1.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const std::size_t j = index % points;
        index /= points;
        s[k] = grid.lower + h * static_cast<double>(j);
        w *= (j == 0 || j == points - 1) ? 0.5 * h : h;
      }
      return w;
    };
    auto face_mask = [=](std::size_t index) {
      unsigned mask = 0;
      for (std::size_t k = 0; k < dim; ++k) {
        const std::size_t j = index % points;
        index /= points;
        if (j == 0) mask |= 1u << (2 * k);
        if (j == points - 1) mask |= 1u << (2 * k + 1);
      }
      return mask;
    };
    return summation_oracle(model, count, alphas, 2 * dim, node, face_mask, 1, false, faces);
  };

  const OracleResult coarse = run(grid.points, nullptr);
  std::vector<double> faces;
  OracleResult fine = run(2 * grid.points - 1, &faces);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (!(faces[f] < 1e-14))
      throw OracleRefusal(fmt::format(
          "quadrature refused: density on face x{} = {} is {:.3g} relative to its peak "
          "(needs < 1e-14); enlarge the box",
          f / 2, f % 2 == 0 ? grid.lower : grid.upper, faces[f]));
  }

  double err = 0.0;
  auto diff = [&err](double a, double b) { err = std::max(err, std::abs(a - b)); };
  diff(coarse.delta_f, fine.delta_f);
  diff(coarse.e_u_pi, fine.e_u_pi);
  diff(coarse.e_u_pi0, fine.e_u_pi0);
  diff(coarse.kl_pi_pi0, fine.kl_pi_pi0);
  diff(coarse.kl_pi0_pi, fine.kl_pi0_pi);
  diff(coarse.e_h0_pi0, fine.e_h0_pi0);
  for (std::size_t i = 0; i < fine.gamma_curve.size(); ++i) {
    diff(coarse.gamma_curve[i].gamma, fine.gamma_curve[i].gamma);
    diff(coarse.gamma_curve[i].e_u_rho_alpha, fine.gamma_curve[i].e_u_rho_alpha);
  }
  fine.method = OracleMethod::Quadrature;
  fine.error_bound = err;
  fine.tolerance_exceeded = err > grid.tolerance;
  return fine;
}

BracketReport check_bracket(const OracleResult& result) {
  const double tol = std::max(1e-10, result.error_bound);
  BracketReport report;
  auto add = [&](std::string name, bool ok, std::string detail) {
    report.checks.push_back({std::move(name), ok, std::move(detail)});
  };

  add("bracket", result.e_u_pi <= result.delta_f + tol && result.delta_f <= result.e_u_pi0 + tol,
      fmt::format("{:.17g} <= {:.17g} <= {:.17g}", result.e_u_pi, result.delta_f, result.e_u_pi0));
  add("kl_nonnegative", result.kl_pi_pi0 >= -tol && result.kl_pi0_pi >= -tol,
      fmt::format("KL(pi,pi0) = {:.17g}, KL(pi0,pi) = {:.17g}", result.kl_pi_pi0, result.kl_pi0_pi));
  const double residual = result.delta_f - result.e_u_pi - result.kl_pi_pi0;
  add("kl_identity", std::abs(residual) <= tol,
      fmt::format("Delta F - E_pi[U] - KL(pi,pi0) = {:.3g}", residual));

  bool monotone = true;
  std::string where = "ok";
  for (std::size_t i = 1; i < result.gamma_curve.size(); ++i) {
    const auto& prev = result.gamma_curve[i - 1];
    const auto& cur = result.gamma_curve[i];
    if (cur.alpha > prev.alpha && cur.e_u_rho_alpha > prev.e_u_rho_alpha + tol) {
      monotone = false;
      where = fmt::format("E[U] rises between alpha {} and {}", prev.alpha, cur.alpha);
      break;
    }
  }
  add("gamma_curve_monotone", monotone, where);
  return report;
}

}  // namespace febounds
