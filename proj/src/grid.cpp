#include "gridreg/grid.hpp"

#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace gridreg {

namespace {

bool graph_connected(int n, const std::vector<Line>& lines) {
  if (n <= 1) return true;
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int components = n;
  for (const auto& l : lines) {
    const int a = find(l.from);
    const int b = find(l.to);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  return components == 1;
}

}  // namespace

GridGraph::GridGraph(int num_nodes, std::vector<Line> lines, VectorXd self_susceptance)
    : num_nodes_(num_nodes), lines_(std::move(lines)), self_susceptance_(std::move(self_susceptance)) {
  if (num_nodes_ <= 0) throw std::invalid_argument("grid: node count must be positive");
  if (self_susceptance_.size() != num_nodes_)
    throw std::invalid_argument("grid: self-susceptance vector has wrong length");
  for (int i = 0; i < num_nodes_; ++i) {
    if (!(self_susceptance_(i) < 0.0))
      throw std::invalid_argument("grid: self-susceptance B_ii must be negative at node " +
                                  std::to_string(i + 1));
  }

  std::set<std::pair<int, int>> seen;
  const int m = num_lines();
  incidence_ = MatrixXd::Zero(num_nodes_, m);
  for (int k = 0; k < m; ++k) {
    const Line& l = lines_[static_cast<std::size_t>(k)];
    if (l.from < 0 || l.from >= num_nodes_ || l.to < 0 || l.to >= num_nodes_)
      throw std::invalid_argument("grid: line " + std::to_string(k + 1) + " has an endpoint out of range");
    if (l.from == l.to) throw std::invalid_argument("grid: line " + std::to_string(k + 1) + " is a self loop");
    if (!(l.susceptance > 0.0))
      throw std::invalid_argument("grid: line " + std::to_string(k + 1) + " must have B_ij > 0");
    if (!seen.emplace(std::min(l.from, l.to), std::max(l.from, l.to)).second)
      throw std::invalid_argument("grid: duplicate line between nodes " + std::to_string(l.from + 1) +
                                  " and " + std::to_string(l.to + 1));
    incidence_(l.from, k) = 1.0;
    incidence_(l.to, k) = -1.0;
  }
  abs_incidence_ = incidence_.cwiseAbs();
  connected_ = graph_connected(num_nodes_, lines_);
}

std::optional<int> GridGraph::find_line(int i, int j) const {
  for (int k = 0; k < num_lines(); ++k) {
    const Line& l = line(k);
    if ((l.from == i && l.to == j) || (l.from == j && l.to == i)) return k;
  }
  return std::nullopt;
}

MatrixXd GridGraph::cycle_basis() const {
  if (num_lines() == 0) return MatrixXd(0, 0);
  Eigen::FullPivLU<MatrixXd> lu(incidence_);
  MatrixXd kernel = lu.kernel();
  // FullPivLU returns a single zero column when the kernel is trivial.
  if (kernel.cols() == 1 && kernel.norm() == 0.0) return MatrixXd(num_lines(), 0);
  return kernel;
}

GridGraph GridGraph::with_flipped_line(int k) const {
  std::vector<Line> lines = lines_;
  std::swap(lines.at(static_cast<std::size_t>(k)).from, lines.at(static_cast<std::size_t>(k)).to);
  return GridGraph(num_nodes_, std::move(lines), self_susceptance_);
}

void AreaParams::validate() const {
  const auto n = inertia.size();
  auto check_size = [n](const VectorXd& v, const char* name) {
    if (v.size() != n) throw std::invalid_argument(std::string("area params: ") + name + " has wrong length");
  };
  check_size(damping, "A");
  check_size(t_do, "T_do");
  check_size(x_d, "X_d");
  check_size(x_dp, "X_dp");
  check_size(e_f, "E_f");
  check_size(q, "q");
  if (r) check_size(*r, "r");
  if (s) check_size(*s, "s");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string node = " at node " + std::to_string(i + 1);
    if (!(inertia(i) > 0.0)) throw std::invalid_argument("area params: M must be positive" + node);
    if (!(damping(i) > 0.0)) throw std::invalid_argument("area params: A must be positive" + node);
    if (!(t_do(i) > 0.0)) throw std::invalid_argument("area params: T_do must be positive" + node);
    if (!(q(i) > 0.0)) throw std::invalid_argument("area params: q must be positive" + node);
    if (!(x_dp(i) > 0.0 && x_d(i) > x_dp(i)))
      throw std::invalid_argument("area params: X_d > X_dp > 0 violated" + node);
  }
}

FluxDecayModel::FluxDecayModel(GridGraph graph, AreaParams params)
    : graph_(std::move(graph)), params_(std::move(params)) {
  params_.validate();
  if (params_.size() != graph_.num_nodes())
    throw std::invalid_argument("model: parameter count does not match node count");
  const VectorXd gap = params_.x_d - params_.x_dp;
  excitation_ = params_.e_f.cwiseQuotient(gap);
  voltage_tc_ = params_.t_do.cwiseQuotient(gap);
  e_diag_ = (VectorXd::Ones(gap.size()) - graph_.self_susceptance().cwiseProduct(gap)).cwiseQuotient(gap);
}

}  // namespace gridreg
