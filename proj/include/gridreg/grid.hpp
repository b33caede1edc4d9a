#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace gridreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One transmission line. `from` is the '+' end of the edge, `to` the '-' end.
/// Node indices are zero-based.
struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;  // B_ij, per-unit, > 0
};

/// Undirected lossless transmission network with a fixed edge orientation.
///
/// Holds the node-by-edge incidence matrix D (column k has +1 at the '+' end
/// and -1 at the '-' end of line k), its entrywise absolute value |D|, the line
/// susceptances and the per-node self-susceptances B_ii.
class GridGraph {
 public:
  GridGraph() = default;

  /// Throws std::invalid_argument on out-of-range endpoints, self loops,
  /// duplicate lines, B_ij <= 0 or B_ii >= 0. Connectivity is not enforced
  /// here; query connected().
  GridGraph(int num_nodes, std::vector<Line> lines, VectorXd self_susceptance);

  int num_nodes() const { return num_nodes_; }
  int num_lines() const { return static_cast<int>(lines_.size()); }
  const std::vector<Line>& lines() const { return lines_; }
  const Line& line(int k) const { return lines_[static_cast<std::size_t>(k)]; }
  const VectorXd& self_susceptance() const { return self_susceptance_; }

  const MatrixXd& incidence() const { return incidence_; }
  const MatrixXd& abs_incidence() const { return abs_incidence_; }

  /// Line index joining i and j (either orientation), if any.
  std::optional<int> find_line(int i, int j) const;

  bool connected() const { return connected_; }
  /// True when the graph is connected and has no cycles (m = n - 1).
  bool is_tree() const { return connected_ && num_lines() == num_nodes_ - 1; }

  /// Columns span the cycle space N(D); empty for forests.
  MatrixXd cycle_basis() const;

  /// Same topology with the orientation of line k reversed.
  GridGraph with_flipped_line(int k) const;

 private:
  int num_nodes_ = 0;
  std::vector<Line> lines_;
  VectorXd self_susceptance_;
  MatrixXd incidence_;
  MatrixXd abs_incidence_;
  bool connected_ = false;
};

/// Per-area physical and cost constants, one entry per node.
struct AreaParams {
  VectorXd inertia;       // M, per-unit s^2
  VectorXd damping;       // A, per-unit
  VectorXd t_do;          // open-circuit transient time constant, s
  VectorXd x_d;           // synchronous reactance, per-unit
  VectorXd x_dp;          // transient reactance, per-unit
  VectorXd e_f;           // exciter voltage, per-unit
  VectorXd q;             // quadratic cost coefficient, $10^4/h per pu^2
  std::optional<VectorXd> r;  // linear cost term
  std::optional<VectorXd> s;  // constant cost term

  int size() const { return static_cast<int>(inertia.size()); }

  /// Throws std::invalid_argument when sizes disagree or M, A, T_do, q are not
  /// positive or X_d > X_dp > 0 fails.
  void validate() const;
};

/// Network plus parameters with the constant model quantities precomputed:
/// the excitation vector Efd_i = E_fi / (X_di - X'_di), the voltage time
/// constants T_i = T_doi / (X_di - X'_di) and the diagonal of E.
class FluxDecayModel {
 public:
  FluxDecayModel() = default;
  FluxDecayModel(GridGraph graph, AreaParams params);

  const GridGraph& graph() const { return graph_; }
  const AreaParams& params() const { return params_; }
  int num_nodes() const { return graph_.num_nodes(); }
  int num_lines() const { return graph_.num_lines(); }

  const VectorXd& excitation() const { return excitation_; }
  const VectorXd& voltage_time_constant() const { return voltage_tc_; }
  /// E_ii = (1 - B_ii (X_d - X'_d)) / (X_d - X'_d); also the diagonal F of W2.
  const VectorXd& e_diagonal() const { return e_diag_; }

  FluxDecayModel with_params(AreaParams params) const { return {graph_, std::move(params)}; }

 private:
  GridGraph graph_;
  AreaParams params_;
  VectorXd excitation_;
  VectorXd voltage_tc_;
  VectorXd e_diag_;
};

}  // namespace gridreg
