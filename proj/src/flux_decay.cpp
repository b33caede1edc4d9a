#include "gridreg/flux_decay.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gridreg {

namespace {

void require_positive_voltage(const VectorXd& voltage) {
  for (Eigen::Index i = 0; i < voltage.size(); ++i) {
    if (!(voltage(i) > 0.0))
      throw std::domain_error("nonpositive voltage at node " + std::to_string(i + 1));
  }
}

}  // namespace

VectorXd gamma(const VectorXd& voltage, const GridGraph& g) {
  if (voltage.size() != g.num_nodes()) throw std::invalid_argument("gamma: voltage has wrong length");
  require_positive_voltage(voltage);
  VectorXd out(g.num_lines());
  for (int k = 0; k < g.num_lines(); ++k) {
    const Line& l = g.line(k);
    out(k) = voltage(l.from) * voltage(l.to) * l.susceptance;
  }
  return out;
}

MatrixXd e_matrix(const VectorXd& eta, const FluxDecayModel& model) {
  const GridGraph& g = model.graph();
  if (eta.size() != g.num_lines()) throw std::invalid_argument("e_matrix: eta has wrong length");
  MatrixXd e = model.e_diagonal().asDiagonal();
  for (int k = 0; k < g.num_lines(); ++k) {
    const Line& l = g.line(k);
    const double off = -l.susceptance * std::cos(eta(k));
    e(l.from, l.to) = off;
    e(l.to, l.from) = off;
  }
  return e;
}

DominanceReport check_e_positive_definite(const GridGraph& g, const AreaParams& p) {
  DominanceReport report;
  report.pass = true;
  report.nodes.resize(static_cast<std::size_t>(g.num_nodes()));
  for (int k = 0; k < g.num_lines(); ++k) {
    const Line& l = g.line(k);
    report.nodes[static_cast<std::size_t>(l.from)].line_sum += std::abs(l.susceptance);
    report.nodes[static_cast<std::size_t>(l.to)].line_sum += std::abs(l.susceptance);
  }
  for (int i = 0; i < g.num_nodes(); ++i) {
    auto& node = report.nodes[static_cast<std::size_t>(i)];
    const double b_self = g.self_susceptance()(i);
    node.self_magnitude = std::abs(b_self);
    node.margin = node.self_magnitude - node.line_sum;
    node.reactance_ok = i < p.size() && p.x_dp(i) > 0.0 && p.x_d(i) > p.x_dp(i);
    node.pass = node.reactance_ok && b_self < 0.0 && node.margin > 0.0;
    report.pass = report.pass && node.pass;
  }
  return report;
}

GridDerivative dynamics_rhs(const GridState& x, const VectorXd& u, const VectorXd& load,
                            const FluxDecayModel& model) {
  const GridGraph& g = model.graph();
  const AreaParams& p = model.params();
  const MatrixXd& d = g.incidence();

  const VectorXd lambda = gamma(x.voltage, g).cwiseProduct(x.eta.array().sin().matrix());

  GridDerivative dx;
  dx.eta = d.transpose() * x.omega;
  dx.omega = (u - d * lambda - p.damping.cwiseProduct(x.omega) - load).cwiseQuotient(p.inertia);
  dx.voltage = (model.excitation() - e_matrix(x.eta, model) * x.voltage).cwiseQuotient(model.voltage_time_constant());
  return dx;
}

LineFlows line_flows(const GridState& x, const GridGraph& g) {
  return {gamma(x.voltage, g).cwiseProduct(x.eta.array().sin().matrix())};
}

}  // namespace gridreg
