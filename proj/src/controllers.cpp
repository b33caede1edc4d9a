#include "gridreg/controllers.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gridreg {

CommGraph::CommGraph(int num_nodes, std::vector<std::pair<int, int>> links) : num_nodes_(num_nodes) {
  if (num_nodes_ <= 0) throw std::invalid_argument("comm graph: node count must be positive");
  for (const auto& [i, j] : links) {
    if (i < 0 || j < 0 || i >= num_nodes_ || j >= num_nodes_)
      throw std::invalid_argument("comm graph: link endpoint out of range");
    if (i == j) throw std::invalid_argument("comm graph: self loop");
    if (find(i, j)) throw std::invalid_argument("comm graph: duplicate link");
    links_.emplace_back(i, j);
    active_.push_back(true);
  }
  rebuild();
}

std::optional<std::size_t> CommGraph::find(int i, int j) const {
  for (std::size_t k = 0; k < links_.size(); ++k) {
    const auto& [a, b] = links_[k];
    if ((a == i && b == j) || (a == j && b == i)) return k;
  }
  return std::nullopt;
}

bool CommGraph::has_link(int i, int j) const {
  const auto k = find(i, j);
  return k && active_[*k];
}

std::vector<std::pair<int, int>> CommGraph::active_links() const {
  std::vector<std::pair<int, int>> out;
  for (std::size_t k = 0; k < links_.size(); ++k)
    if (active_[k]) out.push_back(links_[k]);
  return out;
}

CommGraph CommGraph::drop_link(int i, int j) const {
  const auto k = find(i, j);
  if (!k || !active_[*k])
    throw std::invalid_argument("comm graph: no active link between " + std::to_string(i + 1) + " and " +
                                std::to_string(j + 1));
  CommGraph out = *this;
  out.active_[*k] = false;
  out.rebuild();
  return out;
}

CommGraph CommGraph::add_link(int i, int j) const {
  if (i < 0 || j < 0 || i >= num_nodes_ || j >= num_nodes_ || i == j)
    throw std::invalid_argument("comm graph: invalid link");
  CommGraph out = *this;
  if (const auto k = find(i, j)) {
    if (active_[*k]) throw std::invalid_argument("comm graph: link already active");
    out.active_[*k] = true;
  } else {
    out.links_.emplace_back(i, j);
    out.active_.push_back(true);
  }
  out.rebuild();
  return out;
}

void CommGraph::rebuild() {
  laplacian_ = MatrixXd::Zero(num_nodes_, num_nodes_);
  std::vector<int> parent(static_cast<std::size_t>(num_nodes_));
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  int components = num_nodes_;
  for (std::size_t k = 0; k < links_.size(); ++k) {
    if (!active_[k]) continue;
    const auto [i, j] = links_[k];
    laplacian_(i, i) += 1.0;
    laplacian_(j, j) += 1.0;
    laplacian_(i, j) -= 1.0;
    laplacian_(j, i) -= 1.0;
    const int a = root(i), b = root(j);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  connected_ = components == 1;
}

std::string to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::open_loop: return "open_loop";
    case ControllerVariant::constant: return "constant";
    case ControllerVariant::common: return "common";
    case ControllerVariant::wide: return "wide";
  }
  return "unknown";
}

void ControllerGains::validate(int n) const {
  if (!(alpha > 0.0 && beta1 > 0.0 && beta2 > 0.0)) throw std::invalid_argument("controller gains must be positive");
  if (beta3.size() != 0 && beta3.size() != n) throw std::invalid_argument("beta3 must have one entry per node");
  if (beta3.size() && !(beta3.array() > 0.0).all()) throw std::invalid_argument("beta3 must be positive");
}

InternalModel InternalModel::of(const Exosystem& exo) { return {exo.common, exo.residual}; }

InternalModelController::InternalModelController(ControllerVariant variant, CostModel cost, ControllerGains gains,
                                                 InternalModel model)
    : variant_(variant), cost_(std::move(cost)), gains_(std::move(gains)), model_(std::move(model)) {
  cost_.validate();
  gains_.validate(cost_.size());
  if (variant_ == ControllerVariant::common && !model_.common)
    throw std::invalid_argument("controller: the common variant needs a common demand block");
  if (!model_.residual.empty() && static_cast<int>(model_.residual.size()) != cost_.size())
    throw std::invalid_argument("controller: residual blocks must be declared for every node or none");
  residual_offsets_.assign(static_cast<std::size_t>(cost_.size()) + 1, 0);
  for (int i = 0; i < cost_.size(); ++i) {
    const int d = uses_residual() && model_.residual[static_cast<std::size_t>(i)]
                      ? model_.residual[static_cast<std::size_t>(i)]->dim()
                      : 0;
    residual_offsets_[static_cast<std::size_t>(i) + 1] = residual_offsets_[static_cast<std::size_t>(i)] + d;
  }
}

bool InternalModelController::uses_common() const {
  return (variant_ == ControllerVariant::common || variant_ == ControllerVariant::wide) && model_.common &&
         model_.common->dim() > 0;
}

bool InternalModelController::uses_residual() const {
  return variant_ == ControllerVariant::wide &&
         std::any_of(model_.residual.begin(), model_.residual.end(), [](const auto& g) { return g && g->dim() > 0; });
}

int InternalModelController::residual_dim(int node) const {
  return residual_offsets_[static_cast<std::size_t>(node) + 1] - residual_offsets_[static_cast<std::size_t>(node)];
}

int InternalModelController::residual_total_dim() const { return residual_offsets_.back(); }

ControllerState InternalModelController::zero_state() const {
  const int n = num_nodes();
  ControllerState cs;
  cs.theta1 = uses_theta1() ? VectorXd::Zero(n) : VectorXd();
  cs.theta2 = VectorXd::Zero(n * common_dim());
  cs.theta3 = VectorXd::Zero(residual_total_dim());
  return cs;
}

void InternalModelController::check_dims(const ControllerState& cs) const {
  const int n = num_nodes();
  if (cs.theta1.size() != (uses_theta1() ? n : 0)) throw std::invalid_argument("controller: theta1 has wrong size");
  if (cs.theta2.size() != n * common_dim()) throw std::invalid_argument("controller: theta2 has wrong size");
  if (cs.theta3.size() != residual_total_dim())
    throw std::invalid_argument("controller: theta3 does not match the residual block dimensions");
}

ControllerState InternalModelController::derivative(const ControllerState& cs, const VectorXd& omega,
                                                    const CommGraph& comm) const {
  check_dims(cs);
  const int n = num_nodes();
  if (omega.size() != n) throw std::invalid_argument("controller: omega has wrong size");
  ControllerState ds;
  if (!uses_theta1()) return ds;
  if (comm.size() != n) throw std::invalid_argument("controller: comm graph size mismatch");

  const VectorXd q_inv_omega = cost_.q_inverse().cwiseProduct(omega);
  ds.theta1 = -gains_.alpha * (comm.laplacian() * cs.theta1) - gains_.beta1 * q_inv_omega;

  const int d2 = common_dim();
  ds.theta2.resize(n * d2);
  for (int i = 0; i < n && d2 > 0; ++i) {
    const auto& g = *model_.common;
    ds.theta2.segment(i * d2, d2) =
        g.s() * cs.theta2.segment(i * d2, d2) - gains_.beta2 * q_inv_omega(i) * g.r().transpose();
  }

  ds.theta3.resize(residual_total_dim());
  for (int i = 0; i < n; ++i) {
    const int d3 = residual_dim(i);
    if (d3 == 0) continue;
    const auto& g = *model_.residual[static_cast<std::size_t>(i)];
    const int off = residual_offsets_[static_cast<std::size_t>(i)];
    ds.theta3.segment(off, d3) = g.s() * cs.theta3.segment(off, d3) - gains_.beta3_at(i) * omega(i) * g.r().transpose();
  }
  return ds;
}

VectorXd InternalModelController::output(const ControllerState& cs) const {
  check_dims(cs);
  const int n = num_nodes();
  if (!uses_theta1()) throw std::logic_error("controller: the open-loop variant has no output map");
  const VectorXd q_inv = cost_.q_inverse();
  VectorXd u = gains_.beta1 * q_inv.cwiseProduct(cs.theta1);
  if (cost_.r) u -= q_inv.cwiseProduct(*cost_.r);

  const int d2 = common_dim();
  for (int i = 0; i < n && d2 > 0; ++i)
    u(i) += gains_.beta2 * q_inv(i) * model_.common->r().dot(cs.theta2.segment(i * d2, d2));

  for (int i = 0; i < n; ++i) {
    const int d3 = residual_dim(i);
    if (d3 == 0) continue;
    const int off = residual_offsets_[static_cast<std::size_t>(i)];
    u(i) += gains_.beta3_at(i) * model_.residual[static_cast<std::size_t>(i)]->r().dot(cs.theta3.segment(off, d3));
  }
  return u;
}

ControllerState InternalModelController::reference_state(const Exosystem& exo, double t) const {
  const int n = num_nodes();
  ControllerState cs = zero_state();
  if (!uses_theta1()) return cs;
  cs.theta1 = consensus_reference(cost_, exo.constant) / gains_.beta1;

  const int d2 = common_dim();
  if (d2 > 0) {
    if (!exo.common || exo.common->dim() != d2)
      throw std::invalid_argument("controller: exosystem common block does not match the internal model");
    const VectorXd sigma2 = exo.common->state_at(t) / gains_.beta2;
    for (int i = 0; i < n; ++i) cs.theta2.segment(i * d2, d2) = sigma2;
  }
  for (int i = 0; i < n; ++i) {
    const int d3 = residual_dim(i);
    if (d3 == 0) continue;
    const auto* g = exo.residual_at(i);
    if (!g || g->dim() != d3)
      throw std::invalid_argument("controller: exosystem residual block does not match the internal model");
    cs.theta3.segment(residual_offsets_[static_cast<std::size_t>(i)], d3) = g->state_at(t) / gains_.beta3_at(i);
  }
  return cs;
}

VectorXd consensus_reference(const CostModel& c, const VectorXd& constant_load) {
  const VectorXd q_inv = c.q_inverse();
  VectorXd shifted = constant_load;
  if (c.r) shifted += q_inv.cwiseProduct(*c.r);
  return VectorXd::Constant(c.size(), shifted.sum() / q_inv.sum());
}

VectorXd controller_rhs_constant(const ControllerState& cs, const VectorXd& omega, const CostModel& c,
                                 const CommGraph& comm, const ControllerGains& gains) {
  const InternalModelController ctrl(ControllerVariant::constant, c, gains, {});
  ControllerState reduced{cs.theta1, {}, {}};
  return ctrl.derivative(reduced, omega, comm).theta1;
}

VectorXd output_constant(const ControllerState& cs, const CostModel& c, const ControllerGains& gains) {
  const InternalModelController ctrl(ControllerVariant::constant, c, gains, {});
  return ctrl.output({cs.theta1, {}, {}});
}

CommonDerivative controller_rhs_common(const ControllerState& cs, const VectorXd& omega, const CostModel& c,
                                       const CommGraph& comm, const Exosystem& exo, const ControllerGains& gains) {
  const InternalModelController ctrl(ControllerVariant::common, c, gains, {exo.common, {}});
  auto ds = ctrl.derivative({cs.theta1, cs.theta2, {}}, omega, comm);
  return {std::move(ds.theta1), std::move(ds.theta2)};
}

VectorXd output_common(const ControllerState& cs, const CostModel& c, const Exosystem& exo,
                       const ControllerGains& gains) {
  const InternalModelController ctrl(ControllerVariant::common, c, gains, {exo.common, {}});
  return ctrl.output({cs.theta1, cs.theta2, {}});
}

ControllerState controller_rhs_wide(const ControllerState& cs, const VectorXd& omega, const CostModel& c,
                                    const CommGraph& comm, const Exosystem& exo, const ControllerGains& gains) {
  const InternalModelController ctrl(ControllerVariant::wide, c, gains, InternalModel::of(exo));
  return ctrl.derivative(cs, omega, comm);
}

VectorXd output_wide(const ControllerState& cs, const CostModel& c, const Exosystem& exo,
                     const ControllerGains& gains) {
  const InternalModelController ctrl(ControllerVariant::wide, c, gains, InternalModel::of(exo));
  return ctrl.output(cs);
}

CommGraph drop_link(const CommGraph& comm, int i, int j) { return comm.drop_link(i, j); }

}  // namespace gridreg
