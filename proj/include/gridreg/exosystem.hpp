#pragma once

#include "gridreg/dispatch.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridreg {

using Eigen::RowVectorXd;

/// Linear signal generator sigma' = S sigma, output R sigma.
///
/// Propagation is closed form and needs S in block-rotation form: 2x2 blocks
/// [[0, mu], [-mu, 0]] (and 1x1 zero blocks) on the diagonal, zeros elsewhere.
/// Such a block maps sigma(0) to [[cos mu t, sin mu t], [-sin mu t, cos mu t]] sigma(0).
class SinusoidalGenerator {
 public:
  SinusoidalGenerator() = default;
  /// Throws std::invalid_argument when the dimensions of S, R and sigma(0) disagree.
  SinusoidalGenerator(MatrixXd s, RowVectorXd r, VectorXd sigma0);

  /// Two-state generator with R = (1, 0) whose output is amplitude * sin(freq t + phase).
  static SinusoidalGenerator sinusoid(double freq_rad_s, double amplitude, double phase = 0.0);

  int dim() const { return static_cast<int>(sigma0_.size()); }
  const MatrixXd& s() const { return s_; }
  const RowVectorXd& r() const { return r_; }
  const VectorXd& initial_state() const { return sigma0_; }

  bool block_rotation_form() const { return block_form_; }
  /// Rotation frequencies of the 2x2 blocks, in order (zero for 1x1 blocks).
  const std::vector<double>& frequencies() const { return freqs_; }

  /// sigma(t); throws std::logic_error when S is not in block-rotation form.
  VectorXd state_at(double t) const;
  double output_at(double t) const { return r_.dot(state_at(t)); }

  /// Same dynamics, initial state scaled.
  SinusoidalGenerator scaled(double factor) const { return {s_, r_, sigma0_ * factor}; }

 private:
  MatrixXd s_;
  RowVectorXd r_;
  VectorXd sigma0_;
  bool block_form_ = true;
  std::vector<double> freqs_;
  std::vector<int> block_sizes_;
};

/// Demand model P^l = Pi1 sigma1 + Q^-1 1 R2 sigma2 + blockdiag(R3i) sigma3.
struct Exosystem {
  VectorXd constant;                                       // Pi1 sigma1, per-unit
  std::optional<SinusoidalGenerator> common;               // compensable block (R2, S2)
  std::vector<std::optional<SinusoidalGenerator>> residual;  // per node (R3i, S3i); empty = none

  int size() const { return static_cast<int>(constant.size()); }
  bool has_residual() const;
  bool time_varying() const { return common.has_value() || has_residual(); }
  const SinusoidalGenerator* residual_at(int node) const;
};

VectorXd demand_at(const Exosystem& exo, double t, const CostModel& c);

struct GeneratorCheck {
  std::string label;
  int dim = 0;
  double skew_error = 0.0;         // ||S + S^T||
  double min_abs_imag = 0.0;       // smallest |Im lambda(S)|
  double max_abs_real = 0.0;       // largest |Re lambda(S)|
  int observability_rank = 0;
  bool skew_ok = false;
  bool spectrum_ok = false;        // purely imaginary and zero-free
  bool observable = false;
  bool rotation_form = false;
  bool pass() const { return skew_ok && spectrum_ok && observable && rotation_form; }
};

struct ExosystemReport {
  std::vector<GeneratorCheck> generators;  // common, residual per node, combined pairs
  std::vector<std::string> issues;
  bool pass() const { return issues.empty(); }
};

/// Checks the structural hypotheses of the internal-model controllers: S skew
/// with a purely imaginary, zero-free spectrum, observable output pairs
/// (including the combined common+residual pair at each node).
ExosystemReport validate(const Exosystem& exo);

int observability_rank(const MatrixXd& s, const RowVectorXd& r, double tol = 1e-10);

/// Optimal steady-state input u(t) = u1 + Q^-1 1 R2 sigma2(t) + R3 sigma3(t).
/// The residual part is compensated locally and so is not cost optimal.
VectorXd optimal_feedforward(const Exosystem& exo, const CostModel& c, double t);

struct ResidualGroup {
  double freq = 0.0;
  bool compensable = false;
  double off_direction = 0.0;
};

struct DemandDecomposition {
  bool has_common = false;  // always compensable: injected along Q^-1 1
  std::vector<ResidualGroup> residual_groups;
  std::string description;
};

/// Groups the per-node sinusoids by frequency and tests each group's amplitude
/// (sine and cosine coefficients) against the compensable direction Q^-1 1.
DemandDecomposition decompose_demand(const Exosystem& exo, const CostModel& c, double tol = 1e-9);

}  // namespace gridreg
