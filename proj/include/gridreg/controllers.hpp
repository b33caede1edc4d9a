#pragma once

#include "gridreg/dispatch.hpp"
#include "gridreg/exosystem.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gridreg {

/// Undirected information-exchange graph among the area controllers. Links
/// can be deactivated and reactivated at event boundaries; the Laplacian is
/// rebuilt from the active links.
class CommGraph {
 public:
  CommGraph() = default;
  /// Zero-based node pairs. Throws std::invalid_argument on bad endpoints,
  /// self loops or duplicates.
  CommGraph(int num_nodes, std::vector<std::pair<int, int>> links);

  int size() const { return num_nodes_; }
  const MatrixXd& laplacian() const { return laplacian_; }
  bool connected() const { return connected_; }
  bool has_link(int i, int j) const;
  std::vector<std::pair<int, int>> active_links() const;

  /// Throws std::invalid_argument when the link is not active.
  CommGraph drop_link(int i, int j) const;
  /// Reactivates a dropped link or appends a new one; throws if already active.
  CommGraph add_link(int i, int j) const;

 private:
  void rebuild();
  std::optional<std::size_t> find(int i, int j) const;

  int num_nodes_ = 0;
  std::vector<std::pair<int, int>> links_;
  std::vector<bool> active_;
  MatrixXd laplacian_;
  bool connected_ = true;
};

enum class ControllerVariant {
  open_loop,  // fixed generation, no controller states
  constant,   // consensus integrators theta1
  common,     // theta1 + internal models of the common sinusoid
  wide,       // theta1 + common + per-node residual internal models
};

std::string to_string(ControllerVariant v);

struct ControllerGains {
  double alpha = 1.0;
  double beta1 = 1.0;
  double beta2 = 1.0;
  VectorXd beta3;  // per node; empty means all ones

  double beta3_at(int i) const { return beta3.size() ? beta3(i) : 1.0; }
  void validate(int n) const;
};

/// theta2 stacks n copies of the common-block state (node-major); theta3
/// stacks the residual states of nodes 1..n back to back.
struct ControllerState {
  VectorXd theta1;
  VectorXd theta2;
  VectorXd theta3;

  Eigen::Index total_size() const { return theta1.size() + theta2.size() + theta3.size(); }
};

/// The (S, R) pairs embedded in the controllers.
struct InternalModel {
  std::optional<SinusoidalGenerator> common;
  std::vector<std::optional<SinusoidalGenerator>> residual;

  static InternalModel of(const Exosystem& exo);
};

/// Distributed internal-model controller with gains:
///   theta1' = -alpha L theta1 - beta1 Q^-1 omega
///   theta2' = (I x S2) theta2 - beta2 (I x R2^T) Q^-1 omega
///   theta3' = blockdiag(S3i) theta3 - blockdiag(R3i^T) diag(beta3) omega
///   u = Q^-1 (beta1 theta1 - R) + beta2 Q^-1 (I x R2) theta2 + diag(beta3) blockdiag(R3i) theta3
/// R is the optional linear cost term. Blocks not used by the variant are absent.
class InternalModelController {
 public:
  InternalModelController() = default;
  /// Throws std::invalid_argument when the variant needs a block the internal
  /// model does not declare (common variant without a common block).
  InternalModelController(ControllerVariant variant, CostModel cost, ControllerGains gains, InternalModel model);

  ControllerVariant variant() const { return variant_; }
  const ControllerGains& gains() const { return gains_; }
  const CostModel& cost() const { return cost_; }
  int num_nodes() const { return cost_.size(); }
  int common_dim() const { return uses_common() ? model_.common->dim() : 0; }
  int residual_dim(int node) const;
  int residual_total_dim() const;

  bool uses_theta1() const { return variant_ != ControllerVariant::open_loop; }
  bool uses_common() const;
  bool uses_residual() const;

  /// Throws std::invalid_argument when a block has the wrong dimension.
  ControllerState derivative(const ControllerState& cs, const VectorXd& omega, const CommGraph& comm) const;
  VectorXd output(const ControllerState& cs) const;

  /// State that reproduces the feedforward input of `exo` at time t when
  /// omega = 0: theta1 = theta_bar / beta1, theta2_i = sigma2(t) / beta2,
  /// theta3_i = sigma3i(t) / beta3_i.
  ControllerState reference_state(const Exosystem& exo, double t) const;

  ControllerState zero_state() const;
  void check_dims(const ControllerState& cs) const;

 private:
  ControllerVariant variant_ = ControllerVariant::open_loop;
  CostModel cost_;
  ControllerGains gains_;
  InternalModel model_;
  std::vector<int> residual_offsets_;
};

/// theta_bar = 1 1^T (P^l + Q^-1 R) / (1^T Q^-1 1), the consensus value whose
/// image Q^-1 (theta_bar - R) is the optimal dispatch.
VectorXd consensus_reference(const CostModel& c, const VectorXd& constant_load);

// Per-variant entry points.
VectorXd controller_rhs_constant(const ControllerState& cs, const VectorXd& omega, const CostModel& c,
                                 const CommGraph& comm, const ControllerGains& gains = {});
VectorXd output_constant(const ControllerState& cs, const CostModel& c, const ControllerGains& gains = {});

struct CommonDerivative {
  VectorXd theta1;
  VectorXd theta2;
};
CommonDerivative controller_rhs_common(const ControllerState& cs, const VectorXd& omega, const CostModel& c,
                                       const CommGraph& comm, const Exosystem& exo, const ControllerGains& gains = {});
VectorXd output_common(const ControllerState& cs, const CostModel& c, const Exosystem& exo,
                       const ControllerGains& gains = {});

ControllerState controller_rhs_wide(const ControllerState& cs, const VectorXd& omega, const CostModel& c,
                                    const CommGraph& comm, const Exosystem& exo, const ControllerGains& gains = {});
VectorXd output_wide(const ControllerState& cs, const CostModel& c, const Exosystem& exo,
                     const ControllerGains& gains = {});

CommGraph drop_link(const CommGraph& comm, int i, int j);

}  // namespace gridreg
