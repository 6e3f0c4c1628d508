#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace febounds {

// Continuous coordinates, or spins stored as exactly -1.0 / +1.0.
using State = std::vector<double>;

enum class ModelKind { GaussianPair, IsingBlock, QuarticPair, ConstantCoupling };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

using Edge = std::pair<std::size_t, std::size_t>;

// H0 = x'Dx/2, U = x'Cx/2. D is block diagonal, C lives off the diagonal blocks.
struct GaussianPairParams {
  Eigen::MatrixXd decoupled;
  Eigen::MatrixXd coupling;
};

// H0 = -J sum_intra s_i s_j, U = -K sum_cross s_i s_j.
struct IsingBlockParams {
  double intra_strength = 0.0;
  double cross_strength = 0.0;
  std::vector<Edge> intra_edges;
  std::vector<Edge> cross_edges;
};

// H0 = a (x1^4 + x2^4) / 4, U = c x1 x2.
struct QuarticPairParams {
  double stiffness = 1.0;
  double coupling = 0.0;
};

// H0 = |x|^2 / 2, U = value everywhere. Degenerate case where both
// Bogoliubov bounds are sharp.
struct ConstantCouplingParams {
  double value = 0.0;
};

using ModelParams =
    std::variant<GaussianPairParams, IsingBlockParams, QuarticPairParams, ConstantCouplingParams>;

struct ModelConfig {
  std::vector<std::size_t> subsystem_split;
  double beta = 1.0;
  ModelParams params;
};

// Energy change produced by flipping one spin.
struct FlipDelta {
  double h0 = 0.0;
  double u = 0.0;
};

/// A coupled system H = H0 + U over a fixed state space.
///
/// All energies returned are dimensionless: the inverse temperature is folded
/// into the parameters at construction, so eval_h0 returns beta*H0 and so on.
/// Instances are immutable and can be shared between threads.
class SystemModel {
 public:
  /// Validates `config` and returns the model. Throws ValidationError naming
  /// the failed matrix (D, D+C) or the offending edge.
  static SystemModel build(ModelConfig config);

  ModelKind kind() const noexcept { return kind_; }
  bool is_discrete() const noexcept { return kind_ == ModelKind::IsingBlock; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const std::size_t> subsystem_split() const noexcept { return config_.subsystem_split; }
  std::size_t block_of(std::size_t coordinate) const { return block_index_.at(coordinate); }
  double beta() const noexcept { return config_.beta; }

  // Parameters as supplied, before beta scaling.
  const ModelConfig& config() const noexcept { return config_; }

  double eval_h0(std::span<const double> state) const;
  double eval_u(std::span<const double> state) const;
  double eval_h(std::span<const double> state) const;

  // H0 + alpha U, the energy of the tempered density rho_alpha.
  double tempered_energy(double alpha, std::span<const double> state) const;

  // Discrete models only.
  FlipDelta flip_delta(std::span<const double> state, std::size_t site) const;

  // Throws InputError unless `state` has the right length (and +-1 entries
  // for discrete models).
  void validate_state(std::span<const double> state) const;

 private:
  SystemModel() = default;
  void check_dimension(std::span<const double> state) const;

  ModelConfig config_;
  ModelKind kind_ = ModelKind::GaussianPair;
  std::size_t dimension_ = 0;
  std::vector<std::size_t> block_index_;

  // beta-scaled parameters
  Eigen::MatrixXd scaled_d_;
  Eigen::MatrixXd scaled_c_;
  double scaled_j_ = 0.0;
  double scaled_k_ = 0.0;
  double scaled_a_ = 0.0;
  double scaled_quartic_c_ = 0.0;
  double scaled_constant_ = 0.0;

  std::vector<std::vector<std::size_t>> intra_neighbors_;
  std::vector<std::vector<std::size_t>> cross_neighbors_;
};

ModelKind kind_of(const ModelParams& params);

// True when the symmetric matrix admits a Cholesky factorization with every
// squared pivot above `pivot_tolerance`.
bool is_positive_definite(const Eigen::MatrixXd& matrix, double pivot_tolerance = 1e-10);

}  // namespace febounds
