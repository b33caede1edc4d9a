#include "gridreg/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gridreg {

namespace {

struct Unknowns {
  VectorXd delta;
  VectorXd voltage;
};

VectorXd pack(const Unknowns& x) {
  const auto n = x.voltage.size();
  VectorXd out(2 * n - 1);
  out.head(n - 1) = x.delta.tail(n - 1);
  out.tail(n) = x.voltage;
  return out;
}

Unknowns unpack(const VectorXd& z, Eigen::Index n) {
  Unknowns x;
  x.delta = VectorXd::Zero(n);
  x.delta.tail(n - 1) = z.head(n - 1);
  x.voltage = z.tail(n);
  return x;
}

bool all_positive(const VectorXd& v) { return (v.array() > 0.0).all(); }

// Reduced residual (balances 2..n, voltage equations) and its Jacobian in
// (delta_2..delta_n, V).
void reduced_system(const FluxDecayModel& model, const Unknowns& x, double omega_star, const VectorXd& u,
                    const VectorXd& load, VectorXd& f, MatrixXd& jac) {
  const GridGraph& g = model.graph();
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const MatrixXd& d = g.incidence();
  const VectorXd eta = d.transpose() * x.delta;
  const VectorXd full = regulator_residual(model, eta, x.voltage, omega_star, u, load);
  f.resize(2 * n - 1);
  f.head(n - 1) = full.segment(1, n - 1);
  f.tail(n) = full.tail(n);

  const VectorXd gam = gamma(x.voltage, g);
  // Balance block: P_i = ... - sum_k D_ik gamma_k sin(eta_k).
  MatrixXd dp_ddelta = -d * (gam.array() * eta.array().cos()).matrix().asDiagonal() * d.transpose();
  MatrixXd dp_dv = MatrixXd::Zero(n, n);
  // Voltage block: Q_i = Efd_i - (E(eta) V)_i.
  MatrixXd dq_ddelta = MatrixXd::Zero(n, n);
  const MatrixXd dq_dv = -e_matrix(eta, model);
  for (int k = 0; k < g.num_lines(); ++k) {
    const Line& l = g.line(k);
    const double s = std::sin(eta(k));
    // d gamma_k / d V_from = gamma_k / V_from, likewise for V_to.
    const double dg_from = gam(k) / x.voltage(l.from);
    const double dg_to = gam(k) / x.voltage(l.to);
    dp_dv(l.from, l.from) -= s * dg_from;
    dp_dv(l.from, l.to) -= s * dg_to;
    dp_dv(l.to, l.from) += s * dg_from;
    dp_dv(l.to, l.to) += s * dg_to;
    // dQ_from / d eta_k = -B sin(eta_k) V_to, dQ_to / d eta_k = -B sin(eta_k) V_from,
    // and d eta_k / d delta = e_from - e_to.
    const double a = -l.susceptance * s * x.voltage(l.to);
    const double b = -l.susceptance * s * x.voltage(l.from);
    dq_ddelta(l.from, l.from) += a;
    dq_ddelta(l.from, l.to) -= a;
    dq_ddelta(l.to, l.from) += b;
    dq_ddelta(l.to, l.to) -= b;
  }
  jac.resize(2 * n - 1, 2 * n - 1);
  jac.topLeftCorner(n - 1, n - 1) = dp_ddelta.bottomRightCorner(n - 1, n - 1);
  jac.topRightCorner(n - 1, n) = dp_dv.bottomRows(n - 1);
  jac.bottomLeftCorner(n, n - 1) = dq_ddelta.rightCols(n - 1);
  jac.bottomRightCorner(n, n) = dq_dv;
}

void finish(RegulatorSolution& sol, const FluxDecayModel& model, const VectorXd& eta, const VectorXd& voltage,
            double omega_star, const VectorXd& u, const VectorXd& load) {
  sol.equilibrium.eta_bar = eta;
  sol.equilibrium.voltage_bar = voltage;
  sol.equilibrium.omega_star = omega_star;
  sol.equilibrium.u_bar = u;
  if (all_positive(voltage)) {
    sol.equilibrium.residual_norm =
        regulator_residual(model, eta, voltage, omega_star, u, load).lpNorm<Eigen::Infinity>();
  } else {
    sol.equilibrium.residual_norm = std::numeric_limits<double>::infinity();
  }
  sol.secure = check_security(eta);
}

}  // namespace

double sync_frequency(const VectorXd& u, const VectorXd& load, const VectorXd& damping) {
  return (u - load).sum() / damping.sum();
}

VectorXd regulator_residual(const FluxDecayModel& model, const VectorXd& eta, const VectorXd& voltage,
                            double omega_star, const VectorXd& u, const VectorXd& load) {
  const GridGraph& g = model.graph();
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const VectorXd lambda = gamma(voltage, g).cwiseProduct(eta.array().sin().matrix());
  VectorXd r(2 * n);
  r.head(n) = u - model.params().damping * omega_star - load - g.incidence() * lambda;
  r.tail(n) = model.excitation() - e_matrix(eta, model) * voltage;
  return r;
}

RegulatorSolution solve_regulator(const FluxDecayModel& model, const VectorXd& u, const VectorXd& load,
                                  const InitialGuess& guess, const NewtonOptions& opts) {
  const GridGraph& g = model.graph();
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  if (u.size() != n || load.size() != n) throw std::invalid_argument("solve_regulator: input has wrong length");
  const double omega_star = sync_frequency(u, load, model.params().damping);

  RegulatorSolution sol;
  if (g.num_lines() == 0) {
    // Decoupled areas: E is diagonal and there are no angles.
    const VectorXd voltage = model.excitation().cwiseQuotient(model.e_diagonal());
    finish(sol, model, VectorXd(0), voltage, omega_star, u, load);
    if (!all_positive(voltage)) {
      sol.status = SolveStatus::nonpositive_voltage;
      sol.message = "decoupled voltage solution is not positive";
    } else if (sol.equilibrium.residual_norm <= opts.tolerance) {
      sol.status = SolveStatus::converged;
    } else {
      sol.status = SolveStatus::not_converged;
      sol.message = "decoupled areas cannot share a common frequency for this imbalance";
    }
    return sol;
  }
  if (!g.connected()) throw std::invalid_argument("solve_regulator: network with lines must be connected");

  Unknowns x;
  x.delta = guess.delta.value_or(VectorXd::Zero(n));
  x.voltage = guess.voltage.value_or(VectorXd::Ones(n));
  if (x.delta.size() != n || x.voltage.size() != n)
    throw std::invalid_argument("solve_regulator: guess has wrong length");
  x.delta.array() -= x.delta(0);
  if (!all_positive(x.voltage)) throw std::invalid_argument("solve_regulator: guess voltage must be positive");

  VectorXd f;
  MatrixXd jac;
  reduced_system(model, x, omega_star, u, load, f, jac);
  double norm = f.lpNorm<Eigen::Infinity>();

  sol.status = SolveStatus::not_converged;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    sol.iterations = it;
    if (norm <= opts.tolerance) {
      sol.status = SolveStatus::converged;
      break;
    }
    if (it == opts.max_iterations) break;

    Eigen::ColPivHouseholderQR<MatrixXd> qr(jac);
    if (qr.rank() < jac.rows()) {
      sol.status = SolveStatus::singular_jacobian;
      sol.message = "Jacobian is singular";
      break;
    }
    const VectorXd step = qr.solve(-f);
    const VectorXd z = pack(x);

    double scale = 1.0;
    bool accepted = false;
    bool hit_nonpositive = false;
    for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
      Unknowns trial = unpack(z + scale * step, n);
      if (!all_positive(trial.voltage)) {
        hit_nonpositive = true;
        continue;
      }
      VectorXd f_trial;
      MatrixXd jac_trial;
      reduced_system(model, trial, omega_star, u, load, f_trial, jac_trial);
      const double trial_norm = f_trial.lpNorm<Eigen::Infinity>();
      if (trial_norm < norm || trial_norm <= opts.tolerance) {
        x = std::move(trial);
        f = std::move(f_trial);
        jac = std::move(jac_trial);
        norm = trial_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      sol.status = hit_nonpositive ? SolveStatus::nonpositive_voltage : SolveStatus::not_converged;
      sol.message = hit_nonpositive ? "voltage iterate left the positive orthant" : "line search stalled";
      break;
    }
  }

  const VectorXd eta = g.incidence().transpose() * x.delta;
  finish(sol, model, eta, x.voltage, omega_star, u, load);
  if (sol.status == SolveStatus::converged && sol.equilibrium.residual_norm > 10.0 * opts.tolerance) {
    // The implied first balance failed, which only happens for ill-posed input.
    sol.status = SolveStatus::not_converged;
  }
  if (sol.status != SolveStatus::converged && sol.message.empty()) {
    std::ostringstream msg;
    msg << "no steady state found near the guess after " << sol.iterations << " iterations (residual " << norm
        << ")";
    sol.message = msg.str();
  }
  return sol;
}

AcyclicAngles acyclic_eta(const GridGraph& g, const VectorXd& voltage_bar, const VectorXd& u, const VectorXd& load,
                          const VectorXd& damping) {
  if (!g.is_tree()) throw std::invalid_argument("acyclic_eta: the graph must be a tree");
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const MatrixXd& d = g.incidence();
  const MatrixXd d_pinv = (d.transpose() * d).inverse() * d.transpose();
  const MatrixXd centering = MatrixXd::Identity(n, n) - damping * VectorXd::Ones(n).transpose() / damping.sum();
  const VectorXd sines = (d_pinv * centering * (u - load)).cwiseQuotient(gamma(voltage_bar, g));

  AcyclicAngles out;
  out.sine_inf_norm = sines.size() ? sines.lpNorm<Eigen::Infinity>() : 0.0;
  out.feasible = out.sine_inf_norm < 1.0;
  if (out.feasible) out.eta_bar = sines.array().asin().matrix();
  return out;
}

bool check_security(const VectorXd& eta) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  return (eta.array().abs() < half_pi).all();
}

Assumption3Report check_assumption3(const VectorXd& eta_bar, const VectorXd& voltage_bar,
                                    const FluxDecayModel& model) {
  if (!check_security(eta_bar)) throw std::invalid_argument("check_assumption3: eta outside the security region");
  const GridGraph& g = model.graph();
  const VectorXd gam = gamma(voltage_bar, g);
  const VectorXd s = eta_bar.array().sin().matrix();
  const VectorXd c = eta_bar.array().cos().matrix();
  const VectorXd weights = gam.cwiseProduct(s).cwiseProduct(s).cwiseQuotient(c);
  const MatrixXd left = voltage_bar.cwiseInverse().asDiagonal() * g.abs_incidence();
  MatrixXd schur = e_matrix(eta_bar, model) - left * weights.asDiagonal() * left.transpose();
  schur = 0.5 * (schur + schur.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(schur, Eigen::EigenvaluesOnly);
  Assumption3Report report;
  report.min_eig = eig.eigenvalues().minCoeff();
  report.pass = report.min_eig > 0.0;
  return report;
}

Assumption4Report check_assumption4(const FluxDecayModel& model, const CostModel& c, const VectorXd& load,
                                    const InitialGuess& guess) {
  Assumption4Report report;
  report.dispatch = dispatch_for(c, load);
  report.solution = solve_regulator(model, report.dispatch.u_bar, load, guess);
  report.pass = report.solution.usable();
  return report;
}

}  // namespace gridreg
