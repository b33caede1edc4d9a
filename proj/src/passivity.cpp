#include "gridreg/passivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gridreg {

namespace {

// sin(d) - d without cancellation for small d.
double sin_minus_arg(double d) {
  if (std::abs(d) < 1e-2) {
    const double d2 = d * d;
    return -d * d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0));
  }
  return std::sin(d) - d;
}

// cos(eb + d) - cos(eb) + sin(eb) d, the second-order remainder.
double cos_remainder(double eb, double d) {
  const double h = std::sin(0.5 * d);
  return -2.0 * std::cos(eb) * h * h - std::sin(eb) * sin_minus_arg(d);
}

}  // namespace

double w1(const VectorXd& omega, const VectorXd& omega_bar, const VectorXd& inertia) {
  const VectorXd d = omega - omega_bar;
  return 0.5 * d.dot(inertia.cwiseProduct(d));
}

double w2(const VectorXd& eta, const VectorXd& eta_bar, const VectorXd& voltage, const VectorXd& voltage_bar,
          const FluxDecayModel& model) {
  const GridGraph& g = model.graph();
  if (eta.size() != g.num_lines() || eta_bar.size() != g.num_lines())
    throw std::invalid_argument("w2: eta has wrong length");
  const VectorXd gam_bar = gamma(voltage_bar, g);
  gamma(voltage, g);  // positivity check
  const VectorXd dv = voltage - voltage_bar;

  double total = 0.0;
  for (int k = 0; k < g.num_lines(); ++k) {
    const Line& l = g.line(k);
    const double dgam =
        l.susceptance * (dv(l.from) * voltage(l.to) + voltage_bar(l.from) * dv(l.to));
    total -= dgam * std::cos(eta(k));
    total -= gam_bar(k) * cos_remainder(eta_bar(k), eta(k) - eta_bar(k));
  }
  total += 0.5 * dv.dot(model.e_diagonal().cwiseProduct(voltage + voltage_bar));
  total -= model.excitation().dot(dv);
  return total;
}

VectorXd grad_w2(const VectorXd& eta, const VectorXd& eta_bar, const VectorXd& voltage, const VectorXd& voltage_bar,
                 const FluxDecayModel& model) {
  const GridGraph& g = model.graph();
  const auto m = g.num_lines();
  const auto n = g.num_nodes();
  VectorXd out(m + n);
  out.head(m) = gamma(voltage, g).cwiseProduct(eta.array().sin().matrix()) -
                gamma(voltage_bar, g).cwiseProduct(eta_bar.array().sin().matrix());
  out.tail(n) = e_matrix(eta, model) * voltage - model.excitation();
  return out;
}

MatrixXd hessian_w2(const VectorXd& eta, const VectorXd& voltage, const FluxDecayModel& model) {
  const GridGraph& g = model.graph();
  const auto m = g.num_lines();
  const auto n = g.num_nodes();
  const VectorXd gam = gamma(voltage, g);
  MatrixXd h = MatrixXd::Zero(m + n, m + n);
  h.topLeftCorner(m, m) = gam.cwiseProduct(eta.array().cos().matrix()).asDiagonal();
  const MatrixXd cross = voltage.cwiseInverse().asDiagonal() * g.abs_incidence() *
                         gam.cwiseProduct(eta.array().sin().matrix()).asDiagonal();
  h.bottomLeftCorner(n, m) = cross;
  h.topRightCorner(m, n) = cross.transpose();
  h.bottomRightCorner(n, n) = e_matrix(eta, model);
  return h;
}

double grad_v_term(const VectorXd& eta, const VectorXd& voltage, const FluxDecayModel& model) {
  const VectorXd gv = e_matrix(eta, model) * voltage - model.excitation();
  return gv.dot(gv.cwiseQuotient(model.voltage_time_constant()));
}

StorageReport open_loop_storage(const GridState& x, const VectorXd& u, const VectorXd& disturbance,
                                const PlantReference& ref, const FluxDecayModel& model) {
  const AreaParams& p = model.params();
  const VectorXd dw = x.omega - ref.omega_bar;
  StorageReport r;
  r.w1 = w1(x.omega, ref.omega_bar, p.inertia);
  r.w2 = w2(x.eta, ref.eta_bar, x.voltage, ref.voltage_bar, model);
  r.u = r.w1 + r.w2;
  r.z = r.u;
  r.rho_term = dw.dot(p.damping.cwiseProduct(dw));
  r.grad_v_term = grad_v_term(x.eta, x.voltage, model);
  r.supply_term = dw.dot(u - ref.u_bar);
  r.disturbance_term = disturbance.size() ? dw.dot(disturbance) : 0.0;
  r.dz_dt_analytic = -r.rho_term - r.grad_v_term + r.supply_term - r.disturbance_term;
  return r;
}

StorageReport closed_loop_z(const GridState& x, const ControllerState& cs, double t, const VectorXd& disturbance,
                            const VectorXd& eta_bar, const VectorXd& voltage_bar, const Exosystem& exo,
                            const InternalModelController& ctrl, const CommGraph& comm, const FluxDecayModel& model) {
  if (!ctrl.uses_theta1()) throw std::invalid_argument("closed_loop_z: the open-loop variant has no controller storage");
  ctrl.check_dims(cs);
  const AreaParams& p = model.params();
  const ControllerState ref = ctrl.reference_state(exo, t);

  StorageReport r;
  r.w1 = w1(x.omega, VectorXd::Zero(x.omega.size()), p.inertia);
  r.w2 = w2(x.eta, eta_bar, x.voltage, voltage_bar, model);
  r.u = r.w1 + r.w2;
  const VectorXd d1 = cs.theta1 - ref.theta1;
  r.theta = 0.5 * (d1.squaredNorm() + (cs.theta2 - ref.theta2).squaredNorm() + (cs.theta3 - ref.theta3).squaredNorm());
  r.z = r.u + r.theta;
  r.rho_term = x.omega.dot(p.damping.cwiseProduct(x.omega));
  r.grad_v_term = grad_v_term(x.eta, x.voltage, model);
  r.laplacian_term = ctrl.gains().alpha * d1.dot(comm.laplacian() * d1);
  r.disturbance_term = disturbance.size() ? x.omega.dot(disturbance) : 0.0;
  r.dz_dt_analytic = -r.rho_term - r.grad_v_term - r.laplacian_term - r.disturbance_term;
  return r;
}

double fd_rate_mismatch(std::span<const double> times, std::span<const double> values, std::span<const double> rates) {
  if (times.size() != values.size() || times.size() != rates.size())
    throw std::invalid_argument("fd_rate_mismatch: length mismatch");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const double hl = times[k] - times[k - 1];
    const double hr = times[k + 1] - times[k];
    // Second-order three-point derivative on a nonuniform grid.
    const double fd = (-hr / (hl * (hl + hr))) * values[k - 1] + ((hr - hl) / (hl * hr)) * values[k] +
                      (hl / (hr * (hl + hr))) * values[k + 1];
    worst = std::max(worst, std::abs(fd - rates[k]));
  }
  return worst;
}

double dissipation_check_open_loop(std::span<const double> times, std::span<const GridState> states,
                                   std::span<const VectorXd> inputs, const PlantReference& ref,
                                   const FluxDecayModel& model) {
  if (states.size() != times.size() || inputs.size() != times.size())
    throw std::invalid_argument("dissipation_check_open_loop: length mismatch");
  std::vector<double> values(times.size());
  std::vector<double> rates(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto rep = open_loop_storage(states[k], inputs[k], VectorXd(), ref, model);
    values[k] = rep.u;
    rates[k] = rep.dz_dt_analytic;
  }
  return fd_rate_mismatch(times, values, rates);
}

}  // namespace gridreg
