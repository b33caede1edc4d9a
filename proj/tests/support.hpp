// Shared fixtures and independent oracles for the test binaries.
#pragma once

#include "gridreg/controllers.hpp"
#include "gridreg/dispatch.hpp"
#include "gridreg/equilibrium.hpp"
#include "gridreg/exosystem.hpp"
#include "gridreg/flux_decay.hpp"
#include "gridreg/grid.hpp"
#include "gridreg/passivity.hpp"
#include "gridreg/simulation.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using gridreg::MatrixXd;
using gridreg::VectorXd;

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Four-area ring with the reference parameter table.
inline gridreg::AreaParams four_area_params() {
  gridreg::AreaParams p;
  p.inertia = vec({5.22, 3.98, 4.49, 4.22});
  p.damping = vec({1.60, 1.22, 1.38, 1.42});
  p.t_do = vec({5.54, 7.41, 6.11, 6.22});
  p.x_d = vec({1.84, 1.62, 1.80, 1.94});
  p.x_dp = vec({0.25, 0.17, 0.36, 0.44});
  p.e_f = vec({4.41, 4.20, 4.37, 4.45});
  p.q = vec({1.00, 0.75, 1.50, 0.50});
  return p;
}

inline gridreg::GridGraph four_area_graph() {
  return {4,
          {{0, 1, 25.6}, {1, 2, 33.1}, {2, 3, 16.6}, {0, 3, 21.0}},
          vec({-49.61, -61.66, -52.17, -40.18})};
}

inline gridreg::FluxDecayModel four_area_model() { return {four_area_graph(), four_area_params()}; }

inline gridreg::CommGraph four_area_comm() { return {4, {{0, 3}, {0, 2}, {1, 2}, {2, 3}}}; }

inline VectorXd load_before() { return vec({2.00, 1.00, 1.50, 1.00}); }
inline VectorXd load_after() { return vec({2.20, 1.05, 1.55, 1.10}); }

inline gridreg::Scenario scenario_one() {
  gridreg::Scenario sc;
  sc.model = four_area_model();
  sc.cost = gridreg::CostModel::from_params(sc.model.params());
  sc.demand.constant = load_before();
  sc.variant = gridreg::ControllerVariant::constant;
  sc.comm = four_area_comm();
  gridreg::Exosystem after;
  after.constant = load_after();
  sc.events.push_back({10.0, gridreg::LoadStep{after}});
  sc.events.push_back({70.0, gridreg::LinkChange{0, 2, true}});
  return sc;
}

inline gridreg::Exosystem residual_demand(const VectorXd& constant, double scale, const VectorXd& weights) {
  gridreg::Exosystem exo;
  exo.constant = constant;
  const double mu = 2.0 * std::numbers::pi / 30.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    exo.residual.push_back(gridreg::SinusoidalGenerator::sinusoid(mu, scale * weights(i)));
  return exo;
}

inline gridreg::Scenario scenario_two() {
  gridreg::Scenario sc;
  sc.model = four_area_model();
  sc.cost = gridreg::CostModel::from_params(sc.model.params());
  sc.demand = residual_demand(load_before(), 0.040, vec({1.10, 1.20, 0.98, 1.00}));
  sc.variant = gridreg::ControllerVariant::wide;
  sc.gains.beta3 = VectorXd::Constant(4, 0.5);
  sc.comm = four_area_comm();
  sc.events.push_back({10.0, gridreg::LoadStep{residual_demand(load_after(), 0.044, vec({1.04, 1.30, 0.99, 1.00}))}});
  return sc;
}

// Node-angle form of the flux-decay dynamics, written per node from the
// line list. Returns (delta', omega', V').
struct NodeDerivative {
  VectorXd delta, omega, voltage;
};

inline NodeDerivative node_angle_rhs(const VectorXd& delta, const VectorXd& omega, const VectorXd& v,
                                     const VectorXd& u, const VectorXd& load, const gridreg::GridGraph& g,
                                     const gridreg::AreaParams& p) {
  const auto n = delta.size();
  NodeDerivative d{omega, VectorXd::Zero(n), VectorXd::Zero(n)};
  VectorXd p_el = VectorXd::Zero(n);
  VectorXd q_couple = VectorXd::Zero(n);
  for (const auto& l : g.lines()) {
    const double s = std::sin(delta(l.from) - delta(l.to));
    const double c = std::cos(delta(l.from) - delta(l.to));
    p_el(l.from) += v(l.from) * v(l.to) * l.susceptance * s;
    p_el(l.to) -= v(l.from) * v(l.to) * l.susceptance * s;
    q_couple(l.from) += l.susceptance * v(l.to) * c;
    q_couple(l.to) += l.susceptance * v(l.from) * c;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xg = p.x_d(i) - p.x_dp(i);
    d.omega(i) = (u(i) - p_el(i) - p.damping(i) * omega(i) - load(i)) / p.inertia(i);
    // T_do V' = E_f - (1 - B_ii (X_d - X'_d)) V + (X_d - X'_d) sum_j B_ij V_j cos(delta_i - delta_j)
    const double self = 1.0 - g.self_susceptance()(i) * xg;
    d.voltage(i) = (p.e_f(i) - self * v(i) + xg * q_couple(i)) / p.t_do(i);
  }
  return d;
}

// Projected gradient descent on 1/2 u^T Q u over {1^T u = 1^T P^l}.
inline VectorXd projected_gradient_dispatch(const VectorXd& q, const VectorXd& load, int iterations = 20000) {
  const auto n = q.size();
  VectorXd u = VectorXd::Constant(n, load.sum() / static_cast<double>(n));
  const double step = 1.0 / q.maxCoeff();
  for (int k = 0; k < iterations; ++k) {
    VectorXd grad = q.cwiseProduct(u);
    grad.array() -= grad.mean();
    u -= step * grad;
  }
  return u;
}

// Classical RK4 on a linear system x' = S x.
inline VectorXd rk4_linear(const MatrixXd& s, const VectorXd& x0, double t, int steps) {
  VectorXd x = x0;
  const double h = t / steps;
  for (int k = 0; k < steps; ++k) {
    const VectorXd k1 = s * x;
    const VectorXd k2 = s * (x + 0.5 * h * k1);
    const VectorXd k3 = s * (x + 0.5 * h * k2);
    const VectorXd k4 = s * (x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

// Central finite-difference gradient.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x, double h) {
  const VectorXd f0 = f(x);
  MatrixXd j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

inline double rel_error(const VectorXd& a, const VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline double rel_error(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Random connected network: a random spanning tree plus `extra` chords.
inline gridreg::FluxDecayModel random_model(std::mt19937_64& rng, int n, int extra) {
  std::uniform_real_distribution<double> b(5.0, 30.0);
  std::vector<gridreg::Line> lines;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    const int j = parent(rng);
    if (rng() % 2) {
      lines.push_back({i, j, b(rng)});
    } else {
      lines.push_back({j, i, b(rng)});
    }
  }
  std::uniform_int_distribution<int> node(0, n - 1);
  for (int added = 0, tries = 0; added < extra && tries < 100; ++tries) {
    const int i = node(rng), j = node(rng);
    if (i == j) continue;
    bool dup = false;
    for (const auto& l : lines) dup = dup || (l.from == i && l.to == j) || (l.from == j && l.to == i);
    if (dup) continue;
    lines.push_back({i, j, b(rng)});
    ++added;
  }
  VectorXd sum = VectorXd::Zero(n);
  for (const auto& l : lines) {
    sum(l.from) += l.susceptance;
    sum(l.to) += l.susceptance;
  }
  std::uniform_real_distribution<double> margin(1.0, 10.0);
  VectorXd b_self(n);
  for (int i = 0; i < n; ++i) b_self(i) = -(sum(i) + margin(rng));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  gridreg::AreaParams p;
  for (VectorXd* v : {&p.inertia, &p.damping, &p.t_do, &p.x_d, &p.x_dp, &p.e_f, &p.q}) v->resize(n);
  for (int i = 0; i < n; ++i) {
    p.inertia(i) = 3.0 + 3.0 * unit(rng);
    p.damping(i) = 1.0 + unit(rng);
    p.t_do(i) = 5.0 + 3.0 * unit(rng);
    p.x_dp(i) = 0.15 + 0.3 * unit(rng);
    p.x_d(i) = p.x_dp(i) + 1.2 + 0.5 * unit(rng);
    p.e_f(i) = 4.0 + 0.5 * unit(rng);
    p.q(i) = 0.5 + unit(rng);
  }
  return {gridreg::GridGraph(n, std::move(lines), b_self), p};
}

}  // namespace testing_support
