#pragma once

#include "gridreg/dispatch.hpp"
#include "gridreg/flux_decay.hpp"

#include <optional>
#include <string>

namespace gridreg {

struct Equilibrium {
  VectorXd eta_bar;
  double omega_star = 0.0;
  VectorXd voltage_bar;
  VectorXd u_bar;
  double residual_norm = 0.0;  // inf-norm of the full steady-state residual
};

enum class SolveStatus { converged, not_converged, nonpositive_voltage, singular_jacobian };

struct RegulatorSolution {
  SolveStatus status = SolveStatus::not_converged;
  Equilibrium equilibrium;  // last iterate when not converged
  int iterations = 0;
  bool secure = false;      // every eta_bar in (-pi/2, pi/2)
  std::string message;

  bool converged() const { return status == SolveStatus::converged; }
  /// Converged and inside the security region: usable as a controller reference.
  bool usable() const { return converged() && secure; }
};

struct NewtonOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;  // on the residual inf-norm
  int max_halvings = 40;
};

struct InitialGuess {
  std::optional<VectorXd> delta;    // node angles; node 1 is forced to 0
  std::optional<VectorXd> voltage;  // defaults to ones
};

/// Common frequency of any equilibrium: 1^T (u - P^l) / 1^T A 1.
double sync_frequency(const VectorXd& u, const VectorXd& load, const VectorXd& damping);

/// Damped Newton solve of the steady-state equations with omega = omega_star 1:
/// node power balances 2..n and all n voltage equations, unknowns
/// (delta_2..delta_n, V). The first balance follows from the others and is
/// checked afterwards through residual_norm.
///
/// Lines-free networks are solved directly (eta is empty). Throws
/// std::invalid_argument for a network that has lines but is not connected.
RegulatorSolution solve_regulator(const FluxDecayModel& model, const VectorXd& u, const VectorXd& load,
                                  const InitialGuess& guess = {}, const NewtonOptions& opts = {});

/// Full steady-state residual (balances for all nodes, voltage equations).
VectorXd regulator_residual(const FluxDecayModel& model, const VectorXd& eta, const VectorXd& voltage,
                            double omega_star, const VectorXd& u, const VectorXd& load);

struct AcyclicAngles {
  bool feasible = false;
  double sine_inf_norm = 0.0;
  VectorXd eta_bar;  // arcsin of the required sines when feasible
};

/// Explicit steady-state angles on a tree for given voltages:
/// sin(eta) = Gamma(V)^-1 D^+ (I - A 1 1^T / 1^T A 1)(u - P^l).
/// Throws std::invalid_argument when the graph is not a tree.
AcyclicAngles acyclic_eta(const GridGraph& g, const VectorXd& voltage_bar, const VectorXd& u,
                          const VectorXd& load, const VectorXd& damping);

/// True iff every component lies in the open interval (-pi/2, pi/2).
bool check_security(const VectorXd& eta);

struct Assumption3Report {
  bool pass = false;
  double min_eig = 0.0;
};

/// Smallest eigenvalue of
///   E(eta) - diag(V)^-1 |D| Gamma(V) diag(sin) diag(cos)^-1 diag(sin) |D|^T diag(V)^-1,
/// the Schur complement of the W2 Hessian. Throws std::invalid_argument
/// outside the security region or for nonpositive voltages.
Assumption3Report check_assumption3(const VectorXd& eta_bar, const VectorXd& voltage_bar,
                                    const FluxDecayModel& model);

struct Assumption4Report {
  bool pass = false;
  DispatchSolution dispatch;
  RegulatorSolution solution;  // steady state under the optimal injections
};

/// Feasibility of the optimal dispatch: solves the steady-state equations with
/// u = optimal dispatch (so omega_star = 0) and passes iff the solution is
/// secure.
Assumption4Report check_assumption4(const FluxDecayModel& model, const CostModel& c, const VectorXd& load,
                                    const InitialGuess& guess = {});

}  // namespace gridreg
