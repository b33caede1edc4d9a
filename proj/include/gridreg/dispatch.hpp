#pragma once

#include "gridreg/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridreg {

/// C(u) = 1/2 u^T Q u (+ R^T u + 1^T S in the linear-quadratic variant).
/// Costs are in $10^4/h with u in per-unit on a 1000 MVA base.
struct CostModel {
  VectorXd q;                  // diagonal of Q, all > 0
  std::optional<VectorXd> r;   // linear terms
  std::optional<VectorXd> s;   // constants

  static CostModel from_params(const AreaParams& p);

  int size() const { return static_cast<int>(q.size()); }
  VectorXd q_inverse() const { return q.cwiseInverse(); }
  bool linear_quadratic() const { return r.has_value() || s.has_value(); }
  /// Throws std::invalid_argument if some q_i <= 0 or sizes disagree.
  void validate() const;
};

struct DispatchSolution {
  VectorXd u_bar;
  double lambda_bar = 0.0;  // multiplier of the balance constraint
  double cost = 0.0;
};

/// Closed-form minimiser of 1/2 u^T Q u subject to 1^T (u - P^l) = 0:
/// u = Q^-1 1 1^T P^l / (1^T Q^-1 1), lambda = -1^T P^l / (1^T Q^-1 1).
DispatchSolution optimal_dispatch(const CostModel& c, const VectorXd& load);

/// Linear-quadratic variant: u = Q^-1 (theta - R) with
/// theta = 1 1^T (P^l + Q^-1 R) / (1^T Q^-1 1). Reduces to optimal_dispatch for R = 0.
DispatchSolution optimal_dispatch_lq(const CostModel& c, const VectorXd& load);

/// Dispatches with the LQ formula when the cost model carries linear terms.
DispatchSolution dispatch_for(const CostModel& c, const VectorXd& load);

double generation_cost(const CostModel& c, const VectorXd& u);

/// P = Q^-1 1 1^T / (1^T Q^-1 1) - I. Its null space is spanned by Q^-1 1,
/// the only direction of demand that can be compensated at zero frequency
/// deviation without changing the steady-state line flows.
MatrixXd compensable_projector(const CostModel& c);
VectorXd compensable_direction(const CostModel& c);

/// A sinusoidal demand component with per-node amplitudes.
struct DemandDirection {
  std::string label;
  VectorXd amplitudes;
  bool declared_common = false;
};

struct DirectionClass {
  std::string label;
  bool compensable = false;
  /// Component of the amplitude vector orthogonal to Q^-1 1, relative to its norm.
  double off_direction = 0.0;
  /// Best scalar k with amplitudes ~= k Q^-1 1.
  double scale = 0.0;
};

/// Classifies demand directions. A block declared common whose amplitudes are
/// not proportional to Q^-1 1 throws std::invalid_argument naming the block and
/// the offending direction.
std::vector<DirectionClass> classify_directions(const std::vector<DemandDirection>& blocks,
                                                const CostModel& c, double tol = 1e-9);

}  // namespace gridreg
