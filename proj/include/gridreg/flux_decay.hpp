#pragma once

#include "gridreg/grid.hpp"

#include <vector>

namespace gridreg {

/// Physical state of the network in edge coordinates.
struct GridState {
  VectorXd eta;    // relative angles D^T delta, rad
  VectorXd omega;  // frequency deviation, per-unit
  VectorXd voltage;
};

struct GridDerivative {
  VectorXd eta;
  VectorXd omega;
  VectorXd voltage;
};

/// Per-line coupling output lambda = Gamma(V) sin(eta).
struct LineFlows {
  VectorXd lambda;
};

/// gamma_k = V_i V_j B_ij for each line. Throws std::domain_error if any V <= 0.
VectorXd gamma(const VectorXd& voltage, const GridGraph& g);

/// Symmetric n x n matrix with E_ii from the model and E_ij = -B_ij cos(eta_k).
MatrixXd e_matrix(const VectorXd& eta, const FluxDecayModel& model);

struct NodeDominance {
  double self_magnitude = 0.0;  // |B_ii|
  double line_sum = 0.0;        // sum over neighbours of |B_ij|
  double margin = 0.0;          // self_magnitude - line_sum
  bool reactance_ok = false;    // X_d > X_dp > 0
  bool pass = false;
};

struct DominanceReport {
  std::vector<NodeDominance> nodes;
  bool pass = false;
};

/// Sufficient conditions under which E(eta) is positive definite for every eta:
/// X_d > X_dp > 0, B_ii < 0 and |B_ii| > sum_j |B_ij| at every node.
DominanceReport check_e_positive_definite(const GridGraph& g, const AreaParams& p);

/// Right-hand side of the flux-decay network in (eta, omega, V) coordinates:
///   eta'  = D^T omega
///   M omega' = u - D Gamma(V) sin(eta) - A omega - P^l
///   T V'  = -E(eta) V + Efd
/// Throws std::domain_error when any voltage is nonpositive.
GridDerivative dynamics_rhs(const GridState& x, const VectorXd& u, const VectorXd& load,
                            const FluxDecayModel& model);

LineFlows line_flows(const GridState& x, const GridGraph& g);

/// Measured output y = omega.
inline const VectorXd& output(const GridState& x) { return x.omega; }

}  // namespace gridreg
