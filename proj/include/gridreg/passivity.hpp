#pragma once

#include "gridreg/controllers.hpp"
#include "gridreg/flux_decay.hpp"

#include <span>

namespace gridreg {

/// W1 = 1/2 (omega - omega_bar)^T M (omega - omega_bar).
double w1(const VectorXd& omega, const VectorXd& omega_bar, const VectorXd& inertia);

/// Incremental storage of the angle/voltage subsystem,
///   W2 = -1^T Gamma(V) cos(eta) + 1^T Gamma(V_bar) cos(eta_bar)
///        - (Gamma(V_bar) sin(eta_bar))^T (eta - eta_bar) - Efd^T (V - V_bar)
///        + 1/2 V^T F V - 1/2 V_bar^T F V_bar,     F = diag(E_ii).
/// Evaluated in increments so that it stays accurate close to the reference.
double w2(const VectorXd& eta, const VectorXd& eta_bar, const VectorXd& voltage, const VectorXd& voltage_bar,
          const FluxDecayModel& model);

/// (Gamma(V) sin eta - Gamma(V_bar) sin eta_bar ; E(eta) V - Efd), ordered (eta, V).
VectorXd grad_w2(const VectorXd& eta, const VectorXd& eta_bar, const VectorXd& voltage, const VectorXd& voltage_bar,
                 const FluxDecayModel& model);

/// [[Gamma(V) diag(cos eta), H^T], [H, E(eta)]] with H = diag(V)^-1 |D| Gamma(V) diag(sin eta).
MatrixXd hessian_w2(const VectorXd& eta, const VectorXd& voltage, const FluxDecayModel& model);

/// ||grad_V W2||^2 weighted by T^-1.
double grad_v_term(const VectorXd& eta, const VectorXd& voltage, const FluxDecayModel& model);

/// Reference point of the open-loop plant: an equilibrium for input u_bar.
struct PlantReference {
  VectorXd eta_bar;
  VectorXd omega_bar;
  VectorXd voltage_bar;
  VectorXd u_bar;
};

struct StorageReport {
  double w1 = 0.0;
  double w2 = 0.0;
  double u = 0.0;      // W1 + W2
  double theta = 0.0;  // controller part, 0 in open loop
  double z = 0.0;      // U + Theta
  double dz_dt_analytic = 0.0;
  double rho_term = 0.0;          // (omega - omega_bar)^T A (omega - omega_bar)
  double grad_v_term = 0.0;       // ||grad_V W2||^2_{T^-1}
  double laplacian_term = 0.0;    // alpha (theta1 - theta1_bar)^T L (theta1 - theta1_bar)
  double supply_term = 0.0;       // (omega - omega_bar)^T (u - u_bar), open loop only
  double disturbance_term = 0.0;  // (omega - omega_bar)^T Q^l
};

/// Plant storage U = W1 + W2 with
///   dU/dt = -rho - ||grad_V W2||^2_{T^-1} + (omega - omega_bar)^T (u - u_bar) - (omega - omega_bar)^T Q^l
/// where the plant runs with input u, the load the reference was computed
/// for, and an extra disturbance Q^l (may be empty).
StorageReport open_loop_storage(const GridState& x, const VectorXd& u, const VectorXd& disturbance,
                                const PlantReference& ref, const FluxDecayModel& model);

/// Z = U + 1/2 ||theta - theta_bar(t)||^2 around (eta_bar, 0, V_bar, theta_bar(t)), with
///   dZ/dt = -omega^T A omega - ||grad_V W2||^2_{T^-1} - alpha (theta1 - theta1_bar)^T L (theta1 - theta1_bar)
///           - omega^T Q^l.
/// theta_bar(t) comes from ctrl.reference_state(exo, t). Throws
/// std::invalid_argument for the open-loop variant or mismatched dimensions.
StorageReport closed_loop_z(const GridState& x, const ControllerState& cs, double t, const VectorXd& disturbance,
                            const VectorXd& eta_bar, const VectorXd& voltage_bar, const Exosystem& exo,
                            const InternalModelController& ctrl, const CommGraph& comm, const FluxDecayModel& model);

/// Largest |central difference of `values` - `rates`| over interior samples.
/// Samples may be unevenly spaced.
double fd_rate_mismatch(std::span<const double> times, std::span<const double> values, std::span<const double> rates);

/// Open-loop dissipation check along a sampled trajectory under constant load:
/// finite-difference dU/dt against the analytic right-hand side.
double dissipation_check_open_loop(std::span<const double> times, std::span<const GridState> states,
                                   std::span<const VectorXd> inputs, const PlantReference& ref,
                                   const FluxDecayModel& model);

}  // namespace gridreg
