#include "febounds/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "febounds/errors.hpp"

namespace febounds {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::GaussianPair:
      return "gaussian-pair";
    case ModelKind::IsingBlock:
      return "ising-block";
    case ModelKind::QuarticPair:
      return "quartic-pair";
    case ModelKind::ConstantCoupling:
      return "constant-coupling";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::GaussianPair, ModelKind::IsingBlock, ModelKind::QuarticPair,
                    ModelKind::ConstantCoupling}) {
    if (to_string(kind) == name) return kind;
  }
  throw InputError(fmt::format("unknown model kind '{}'", name));
}

ModelKind kind_of(const ModelParams& params) {
  struct Visitor {
    ModelKind operator()(const GaussianPairParams&) const { return ModelKind::GaussianPair; }
    ModelKind operator()(const IsingBlockParams&) const { return ModelKind::IsingBlock; }
    ModelKind operator()(const QuarticPairParams&) const { return ModelKind::QuarticPair; }
    ModelKind operator()(const ConstantCouplingParams&) const {
      return ModelKind::ConstantCoupling;
    }
  };
  return std::visit(Visitor{}, params);
}

bool is_positive_definite(const Eigen::MatrixXd& matrix, double pivot_tolerance) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd pivots = llt.matrixL().toDenseMatrix().diagonal();
  for (Eigen::Index i = 0; i < pivots.size(); ++i) {
    if (!(pivots[i] * pivots[i] > pivot_tolerance)) return false;
  }
  return true;
}

namespace {

bool is_symmetric(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale) return false;
  return true;
}

std::string edge_str(const Edge& e) { return fmt::format("({}, {})", e.first, e.second); }

}  // namespace

SystemModel SystemModel::build(ModelConfig config) {
  SystemModel model;
  model.kind_ = kind_of(config.params);

  if (!(config.beta > 0.0) || !std::isfinite(config.beta))
    throw ValidationError(fmt::format("beta must be positive and finite, got {}", config.beta));
  if (config.subsystem_split.empty())
    throw ValidationError("subsystem_split must not be empty");
  for (auto size : config.subsystem_split)
    if (size == 0) throw ValidationError("subsystem_split entries must be positive");
  if (model.kind_ != ModelKind::ConstantCoupling && config.subsystem_split.size() != 2)
    throw ValidationError(fmt::format("{} models couple exactly two subsystems, got {}",
                                      to_string(model.kind_), config.subsystem_split.size()));

  model.dimension_ = std::accumulate(config.subsystem_split.begin(),
                                     config.subsystem_split.end(), std::size_t{0});
  for (std::size_t b = 0; b < config.subsystem_split.size(); ++b)
    for (std::size_t k = 0; k < config.subsystem_split[b]; ++k) model.block_index_.push_back(b);

  const double beta = config.beta;
  const auto d = static_cast<Eigen::Index>(model.dimension_);

  if (auto* g = std::get_if<GaussianPairParams>(&config.params)) {
    if (g->decoupled.rows() != d || g->decoupled.cols() != d)
      throw ValidationError(fmt::format("D must be {}x{}", d, d));
    if (g->coupling.rows() != d || g->coupling.cols() != d)
      throw ValidationError(fmt::format("C must be {}x{}", d, d));
    if (!g->decoupled.allFinite() || !g->coupling.allFinite())
      throw ValidationError("D and C must be finite");
    if (!is_symmetric(g->decoupled)) throw ValidationError("D is not symmetric");
    if (!is_symmetric(g->coupling)) throw ValidationError("C is not symmetric");
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const bool same_block = model.block_index_[i] == model.block_index_[j];
        if (!same_block && g->decoupled(i, j) != 0.0)
          throw ValidationError(
              fmt::format("D is not block diagonal: entry ({}, {}) couples subsystems", i, j));
        if (same_block && g->coupling(i, j) != 0.0)
          throw ValidationError(
              fmt::format("C has a nonzero intra-subsystem entry at ({}, {})", i, j));
      }
    }
    if (!is_positive_definite(g->decoupled))
      throw ValidationError("D is not positive definite");
    if (!is_positive_definite(g->decoupled + g->coupling))
      throw ValidationError("D+C is not positive definite");
    model.scaled_d_ = beta * g->decoupled;
    model.scaled_c_ = beta * g->coupling;
  } else if (auto* ising = std::get_if<IsingBlockParams>(&config.params)) {
    if (!std::isfinite(ising->intra_strength) || !std::isfinite(ising->cross_strength))
      throw ValidationError("J and K must be finite");
    model.intra_neighbors_.assign(model.dimension_, {});
    model.cross_neighbors_.assign(model.dimension_, {});
    auto check_edge = [&](const Edge& e, bool cross) {
      if (e.first >= model.dimension_ || e.second >= model.dimension_)
        throw ValidationError(fmt::format("edge {} has an index outside 0..{}", edge_str(e),
                                          model.dimension_ - 1));
      if (e.first == e.second)
        throw ValidationError(fmt::format("edge {} is a self loop", edge_str(e)));
      const bool same_block = model.block_index_[e.first] == model.block_index_[e.second];
      if (cross && same_block)
        throw ValidationError(fmt::format("cross edge {} lies inside one block", edge_str(e)));
      if (!cross && !same_block)
        throw ValidationError(fmt::format("intra edge {} spans two blocks", edge_str(e)));
    };
    for (const auto& e : ising->intra_edges) {
      check_edge(e, false);
      model.intra_neighbors_[e.first].push_back(e.second);
      model.intra_neighbors_[e.second].push_back(e.first);
    }
    for (const auto& e : ising->cross_edges) {
      check_edge(e, true);
      model.cross_neighbors_[e.first].push_back(e.second);
      model.cross_neighbors_[e.second].push_back(e.first);
    }
    model.scaled_j_ = beta * ising->intra_strength;
    model.scaled_k_ = beta * ising->cross_strength;
  } else if (auto* q = std::get_if<QuarticPairParams>(&config.params)) {
    if (model.dimension_ != 2 || config.subsystem_split[0] != 1)
      throw ValidationError("quartic-pair requires subsystem_split [1, 1]");
    if (!(q->stiffness > 0.0) || !std::isfinite(q->stiffness))
      throw ValidationError("quartic stiffness a must be positive");
    if (!std::isfinite(q->coupling)) throw ValidationError("quartic coupling c must be finite");
    model.scaled_a_ = beta * q->stiffness;
    model.scaled_quartic_c_ = beta * q->coupling;
  } else if (auto* c = std::get_if<ConstantCouplingParams>(&config.params)) {
    if (!std::isfinite(c->value)) throw ValidationError("constant coupling must be finite");
    model.scaled_constant_ = beta * c->value;
  }

  model.config_ = std::move(config);
  return model;
}

void SystemModel::check_dimension(std::span<const double> state) const {
  if (state.size() != dimension_)
    throw InputError(
        fmt::format("state has {} entries, model dimension is {}", state.size(), dimension_));
}

void SystemModel::validate_state(std::span<const double> state) const {
  check_dimension(state);
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (is_discrete() && state[i] != 1.0 && state[i] != -1.0)
      throw InputError(fmt::format("spin {} is {}, expected +1 or -1", i, state[i]));
    if (!std::isfinite(state[i])) throw InputError(fmt::format("coordinate {} is not finite", i));
  }
}

namespace {

double half_quadratic_form(const Eigen::MatrixXd& m, std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double row = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) row += m(i, j) * x[i];
    total += row * x[j];
  }
  return 0.5 * total;
}

double bond_sum(std::span<const double> s, const std::vector<Edge>& edges) {
  double total = 0.0;
  for (const auto& [i, j] : edges) total += s[i] * s[j];
  return total;
}

}  // namespace

double SystemModel::eval_h0(std::span<const double> state) const {
  check_dimension(state);
  switch (kind_) {
    case ModelKind::GaussianPair:
      return half_quadratic_form(scaled_d_, state);
    case ModelKind::IsingBlock:
      return -scaled_j_ * bond_sum(state, std::get<IsingBlockParams>(config_.params).intra_edges);
    case ModelKind::QuarticPair: {
      const double x1 = state[0] * state[0];
      const double x2 = state[1] * state[1];
      return scaled_a_ * (x1 * x1 + x2 * x2) / 4.0;
    }
    case ModelKind::ConstantCoupling: {
      double sq = 0.0;
      for (double x : state) sq += x * x;
      return 0.5 * beta() * sq;
    }
  }
  return 0.0;
}

double SystemModel::eval_u(std::span<const double> state) const {
  check_dimension(state);
  switch (kind_) {
    case ModelKind::GaussianPair:
      return half_quadratic_form(scaled_c_, state);
    case ModelKind::IsingBlock:
      return -scaled_k_ * bond_sum(state, std::get<IsingBlockParams>(config_.params).cross_edges);
    case ModelKind::QuarticPair:
      return scaled_quartic_c_ * state[0] * state[1];
    case ModelKind::ConstantCoupling:
      return scaled_constant_;
  }
  return 0.0;
}

double SystemModel::eval_h(std::span<const double> state) const {
  return eval_h0(state) + eval_u(state);
}

double SystemModel::tempered_energy(double alpha, std::span<const double> state) const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InputError(fmt::format("alpha must lie in [0, 1], got {}", alpha));
  return eval_h0(state) + alpha * eval_u(state);
}

FlipDelta SystemModel::flip_delta(std::span<const double> state, std::size_t site) const {
  if (!is_discrete()) throw InputError("flip_delta requires a discrete model");
  check_dimension(state);
  if (site >= dimension_) throw InputError(fmt::format("site {} out of range", site));
  double intra = 0.0;
  for (auto j : intra_neighbors_[site]) intra += state[j];
  double cross = 0.0;
  for (auto j : cross_neighbors_[site]) cross += state[j];
  // -J s_i sum_j s_j  ->  +J s_i sum_j s_j after the flip
  return {2.0 * scaled_j_ * state[site] * intra, 2.0 * scaled_k_ * state[site] * cross};
}

}  // namespace febounds
