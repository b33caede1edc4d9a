#include "gridreg/exosystem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gridreg {

namespace {

constexpr double kStructureTol = 1e-12;

bool zero_outside_block(const MatrixXd& s, int start, int size) {
  const int d = static_cast<int>(s.rows());
  for (int i = start; i < start + size; ++i) {
    for (int j = 0; j < d; ++j) {
      if (j >= start && j < start + size) continue;
      if (std::abs(s(i, j)) > kStructureTol || std::abs(s(j, i)) > kStructureTol) return false;
    }
  }
  return true;
}

}  // namespace

SinusoidalGenerator::SinusoidalGenerator(MatrixXd s, RowVectorXd r, VectorXd sigma0)
    : s_(std::move(s)), r_(std::move(r)), sigma0_(std::move(sigma0)) {
  const auto d = sigma0_.size();
  if (s_.rows() != d || s_.cols() != d || r_.size() != d)
    throw std::invalid_argument("exosystem: S, R and sigma(0) dimensions disagree");

  int i = 0;
  while (i < d) {
    const bool pair = i + 1 < d && std::abs(s_(i, i + 1)) > kStructureTol;
    if (pair) {
      const double mu = s_(i, i + 1);
      block_form_ = block_form_ && std::abs(s_(i, i)) <= kStructureTol && std::abs(s_(i + 1, i + 1)) <= kStructureTol &&
                    std::abs(s_(i + 1, i) + mu) <= kStructureTol && zero_outside_block(s_, i, 2);
      freqs_.push_back(mu);
      block_sizes_.push_back(2);
      i += 2;
    } else {
      block_form_ = block_form_ && std::abs(s_(i, i)) <= kStructureTol && zero_outside_block(s_, i, 1);
      freqs_.push_back(0.0);
      block_sizes_.push_back(1);
      i += 1;
    }
  }
}

SinusoidalGenerator SinusoidalGenerator::sinusoid(double freq_rad_s, double amplitude, double phase) {
  MatrixXd s(2, 2);
  s << 0.0, freq_rad_s, -freq_rad_s, 0.0;
  RowVectorXd r(2);
  r << 1.0, 0.0;
  // R sigma(t) = cos(mu t) sigma_a + sin(mu t) sigma_b = A sin(mu t + phi).
  VectorXd sigma0(2);
  sigma0 << amplitude * std::sin(phase), amplitude * std::cos(phase);
  return {std::move(s), std::move(r), std::move(sigma0)};
}

VectorXd SinusoidalGenerator::state_at(double t) const {
  if (!block_form_) throw std::logic_error("exosystem: S is not in block-rotation form");
  VectorXd out = sigma0_;
  int i = 0;
  for (std::size_t b = 0; b < block_sizes_.size(); ++b) {
    if (block_sizes_[b] == 2) {
      const double c = std::cos(freqs_[b] * t);
      const double sn = std::sin(freqs_[b] * t);
      const double a = sigma0_(i);
      const double bb = sigma0_(i + 1);
      out(i) = c * a + sn * bb;
      out(i + 1) = -sn * a + c * bb;
    }
    i += block_sizes_[b];
  }
  return out;
}

bool Exosystem::has_residual() const {
  return std::any_of(residual.begin(), residual.end(), [](const auto& g) { return g.has_value() && g->dim() > 0; });
}

const SinusoidalGenerator* Exosystem::residual_at(int node) const {
  if (residual.empty()) return nullptr;
  const auto& g = residual.at(static_cast<std::size_t>(node));
  return g ? &*g : nullptr;
}

VectorXd demand_at(const Exosystem& exo, double t, const CostModel& c) {
  if (exo.constant.size() != c.size()) throw std::invalid_argument("demand: size mismatch with cost model");
  VectorXd load = exo.constant;
  if (exo.common) load += c.q_inverse() * exo.common->output_at(t);
  for (int i = 0; i < exo.size(); ++i) {
    if (const auto* g = exo.residual_at(i)) load(i) += g->output_at(t);
  }
  return load;
}

int observability_rank(const MatrixXd& s, const RowVectorXd& r, double tol) {
  const auto d = s.rows();
  if (d == 0) return 0;
  MatrixXd obs(d, d);
  RowVectorXd row = r;
  for (Eigen::Index k = 0; k < d; ++k) {
    obs.row(k) = row;
    row = row * s;
  }
  Eigen::JacobiSVD<MatrixXd> svd(obs);
  const auto& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv(0) : 0.0);
  return static_cast<int>((sv.array() > tol * scale).count());
}

namespace {

GeneratorCheck check_generator(const std::string& label, const MatrixXd& s, const RowVectorXd& r, bool rotation_form) {
  GeneratorCheck g;
  g.label = label;
  g.dim = static_cast<int>(s.rows());
  g.rotation_form = rotation_form;
  g.skew_error = (s + s.transpose()).norm();
  g.skew_ok = g.skew_error <= kStructureTol;
  if (g.dim > 0) {
    Eigen::EigenSolver<MatrixXd> es(s, false);
    const auto ev = es.eigenvalues();
    g.min_abs_imag = ev.imag().cwiseAbs().minCoeff();
    g.max_abs_real = ev.real().cwiseAbs().maxCoeff();
    g.spectrum_ok = g.max_abs_real <= 1e-10 && g.min_abs_imag > 1e-10;
  }
  g.observability_rank = observability_rank(s, r);
  g.observable = g.dim > 0 && g.observability_rank == g.dim;
  return g;
}

void collect(ExosystemReport& report, GeneratorCheck g) {
  if (!g.rotation_form) report.issues.push_back(g.label + ": S is not in block-rotation form");
  if (!g.skew_ok) report.issues.push_back(g.label + ": S is not skew-symmetric");
  if (!g.spectrum_ok) report.issues.push_back(g.label + ": spectrum of S is not purely imaginary and zero-free");
  if (!g.observable)
    report.issues.push_back(g.label + ": (R, S) is not observable (rank " + std::to_string(g.observability_rank) +
                            " of " + std::to_string(g.dim) + ")");
  report.generators.push_back(std::move(g));
}

}  // namespace

ExosystemReport validate(const Exosystem& exo) {
  ExosystemReport report;
  if (!exo.residual.empty() && static_cast<int>(exo.residual.size()) != exo.size())
    report.issues.push_back("residual blocks must be declared for every node or none");

  if (exo.common) {
    collect(report, check_generator("common", exo.common->s(), exo.common->r(), exo.common->block_rotation_form()));
  }
  for (std::size_t i = 0; i < exo.residual.size(); ++i) {
    const auto& g = exo.residual[i];
    if (!g || g->dim() == 0) continue;
    const std::string label = "residual node " + std::to_string(i + 1);
    collect(report, check_generator(label, g->s(), g->r(), g->block_rotation_form()));
    if (exo.common) {
      const int d2 = exo.common->dim();
      const int d3 = g->dim();
      MatrixXd s = MatrixXd::Zero(d2 + d3, d2 + d3);
      s.topLeftCorner(d2, d2) = exo.common->s();
      s.bottomRightCorner(d3, d3) = g->s();
      RowVectorXd r(d2 + d3);
      r << exo.common->r(), g->r();
      collect(report, check_generator("common+" + label, s, r,
                                      exo.common->block_rotation_form() && g->block_rotation_form()));
    }
  }
  return report;
}

VectorXd optimal_feedforward(const Exosystem& exo, const CostModel& c, double t) {
  VectorXd u = dispatch_for(c, exo.constant).u_bar;
  if (exo.common) u += c.q_inverse() * exo.common->output_at(t);
  for (int i = 0; i < exo.size(); ++i) {
    if (const auto* g = exo.residual_at(i)) u(i) += g->output_at(t);
  }
  return u;
}

DemandDecomposition decompose_demand(const Exosystem& exo, const CostModel& c, double tol) {
  DemandDecomposition out;
  out.has_common = exo.common.has_value();

  // Per frequency: cosine and sine coefficient vectors of the node outputs.
  struct Coeffs {
    VectorXd cos_part;
    VectorXd sin_part;
  };
  std::map<double, Coeffs> groups;
  const auto n = exo.size();
  for (int i = 0; i < n; ++i) {
    const auto* g = exo.residual_at(i);
    if (!g) continue;
    if (!g->block_rotation_form()) throw std::invalid_argument("decompose_demand: residual S not in rotation form");
    int k = 0;
    for (double mu : g->frequencies()) {
      auto& grp = groups[std::abs(mu)];
      if (grp.cos_part.size() == 0) {
        grp.cos_part = VectorXd::Zero(n);
        grp.sin_part = VectorXd::Zero(n);
      }
      if (mu == 0.0) {
        grp.cos_part(i) += g->r()(k) * g->initial_state()(k);
        k += 1;
        continue;
      }
      const double r1 = g->r()(k), r2 = g->r()(k + 1);
      const double s1 = g->initial_state()(k), s2 = g->initial_state()(k + 1);
      const double sign = mu > 0.0 ? 1.0 : -1.0;
      grp.cos_part(i) += r1 * s1 + r2 * s2;
      grp.sin_part(i) += sign * (r1 * s2 - r2 * s1);
      k += 2;
    }
  }

  std::ostringstream desc;
  desc << (out.has_common ? "common block compensable along Q^-1 1" : "no common block");
  for (const auto& [mu, coeffs] : groups) {
    const auto classes =
        classify_directions({{"cos", coeffs.cos_part, false}, {"sin", coeffs.sin_part, false}}, c, tol);
    ResidualGroup grp;
    grp.freq = mu;
    grp.compensable = classes[0].compensable && classes[1].compensable;
    grp.off_direction = std::max(classes[0].off_direction, classes[1].off_direction);
    out.residual_groups.push_back(grp);
    desc << "; residual at " << mu << " rad/s "
         << (grp.compensable ? "lies in R(Q^-1 1)" : "does not lie in R(Q^-1 1), compensated locally");
  }
  out.description = desc.str();
  return out;
}

}  // namespace gridreg
