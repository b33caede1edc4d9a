#include "gridreg/dispatch.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gridreg {

CostModel CostModel::from_params(const AreaParams& p) {
  CostModel c;
  c.q = p.q;
  c.r = p.r;
  c.s = p.s;
  return c;
}

void CostModel::validate() const {
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!(q(i) > 0.0)) throw std::invalid_argument("cost: q must be positive");
  }
  if (r && r->size() != q.size()) throw std::invalid_argument("cost: R has wrong length");
  if (s && s->size() != q.size()) throw std::invalid_argument("cost: S has wrong length");
}

DispatchSolution optimal_dispatch(const CostModel& c, const VectorXd& load) {
  if (load.size() != c.size()) throw std::invalid_argument("dispatch: load has wrong length");
  const VectorXd q_inv = c.q_inverse();
  const double denom = q_inv.sum();
  const double total = load.sum();
  DispatchSolution sol;
  sol.u_bar = q_inv * (total / denom);
  sol.lambda_bar = -total / denom;
  sol.cost = generation_cost(c, sol.u_bar);
  return sol;
}

DispatchSolution optimal_dispatch_lq(const CostModel& c, const VectorXd& load) {
  if (load.size() != c.size()) throw std::invalid_argument("dispatch: load has wrong length");
  const VectorXd q_inv = c.q_inverse();
  const VectorXd r = c.r.value_or(VectorXd::Zero(c.size()));
  const double theta = (load + q_inv.cwiseProduct(r)).sum() / q_inv.sum();
  DispatchSolution sol;
  sol.u_bar = q_inv.cwiseProduct(VectorXd::Constant(c.size(), theta) - r);
  // grad C(u) + 1 lambda = Q u + R + 1 lambda = theta 1 + 1 lambda = 0
  sol.lambda_bar = -theta;
  sol.cost = generation_cost(c, sol.u_bar);
  return sol;
}

DispatchSolution dispatch_for(const CostModel& c, const VectorXd& load) {
  return c.r ? optimal_dispatch_lq(c, load) : optimal_dispatch(c, load);
}

double generation_cost(const CostModel& c, const VectorXd& u) {
  if (u.size() != c.size()) throw std::invalid_argument("cost: u has wrong length");
  double cost = 0.5 * u.dot(c.q.cwiseProduct(u));
  if (c.r) cost += c.r->dot(u);
  if (c.s) cost += c.s->sum();
  return cost;
}

VectorXd compensable_direction(const CostModel& c) { return c.q_inverse(); }

MatrixXd compensable_projector(const CostModel& c) {
  const VectorXd q_inv = c.q_inverse();
  const auto n = q_inv.size();
  return q_inv * VectorXd::Ones(n).transpose() / q_inv.sum() - MatrixXd::Identity(n, n);
}

std::vector<DirectionClass> classify_directions(const std::vector<DemandDirection>& blocks,
                                                const CostModel& c, double tol) {
  const VectorXd dir = compensable_direction(c);
  std::vector<DirectionClass> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.amplitudes.size() != dir.size())
      throw std::invalid_argument("demand block '" + b.label + "' has wrong length");
    DirectionClass cls;
    cls.label = b.label;
    const double norm = b.amplitudes.norm();
    if (norm == 0.0) {
      cls.compensable = true;
    } else {
      cls.scale = b.amplitudes.dot(dir) / dir.squaredNorm();
      const VectorXd residual = b.amplitudes - cls.scale * dir;
      cls.off_direction = residual.norm() / norm;
      cls.compensable = cls.off_direction <= tol;
      if (b.declared_common && !cls.compensable) {
        std::ostringstream msg;
        msg << "demand block '" << b.label << "' is declared common but its injection is not proportional to "
            << "Q^-1 1; offending component (" << residual.transpose() << ")";
        throw std::invalid_argument(msg.str());
      }
    }
    out.push_back(cls);
  }
  return out;
}

}  // namespace gridreg
