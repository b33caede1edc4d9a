#include "gridreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gridreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Layout {
  Eigen::Index m = 0, n = 0, t1 = 0, t2 = 0, t3 = 0;

  Eigen::Index size() const { return m + 2 * n + t1 + t2 + t3; }
};

Layout layout_of(const FluxDecayModel& model, const ControllerState& cs) {
  return {model.num_lines(), model.num_nodes(), cs.theta1.size(), cs.theta2.size(), cs.theta3.size()};
}

VectorXd pack(const Layout& l, const GridState& x, const ControllerState& cs) {
  VectorXd y(l.size());
  y << x.eta, x.omega, x.voltage, cs.theta1, cs.theta2, cs.theta3;
  return y;
}

void unpack(const Layout& l, const VectorXd& y, GridState& x, ControllerState& cs) {
  Eigen::Index o = 0;
  x.eta = y.segment(o, l.m);
  o += l.m;
  x.omega = y.segment(o, l.n);
  o += l.n;
  x.voltage = y.segment(o, l.n);
  o += l.n;
  cs.theta1 = y.segment(o, l.t1);
  o += l.t1;
  cs.theta2 = y.segment(o, l.t2);
  o += l.t2;
  cs.theta3 = y.segment(o, l.t3);
}

void require_size(const VectorXd& v, int n, const char* what) {
  if (v.size() != 0 && v.size() != n) throw std::invalid_argument(std::string(what) + " has wrong length");
}

void require_same_blocks(const Exosystem& a, const Exosystem& b, const InternalModelController& ctrl) {
  if (ctrl.uses_common() && (!b.common || b.common->dim() != a.common->dim()))
    throw std::invalid_argument("load step: common block must keep the dimension of the internal model");
  for (int i = 0; i < a.size() && ctrl.uses_residual(); ++i) {
    const int d = ctrl.residual_dim(i);
    const auto* g = b.residual_at(i);
    if ((g ? g->dim() : 0) != d)
      throw std::invalid_argument("load step: residual block of node " + std::to_string(i + 1) +
                                  " must keep the dimension of the internal model");
  }
}

// Node angles consistent with eta, used as a Newton starting point.
VectorXd node_angles(const GridGraph& g, const VectorXd& eta) {
  if (g.num_lines() == 0) return VectorXd::Zero(g.num_nodes());
  return g.incidence().transpose().completeOrthogonalDecomposition().solve(eta);
}

// Mutable part of the closed loop; changed only at step boundaries.
struct LoopConfig {
  Exosystem demand;
  CommGraph comm;
  std::vector<Disturbance> disturbances;
};

VectorXd disturbance_at(const LoopConfig& cfg, int n, double t) {
  VectorXd out = VectorXd::Zero(n);
  for (const auto& d : cfg.disturbances) {
    // Active disturbances are evaluated without the switch-off, which is an event.
    if (d.shape == Disturbance::Shape::exp_pulse) {
      out += d.amplitude * std::exp(-(t - d.t0) / d.duration);
    } else {
      out += d.amplitude;
    }
  }
  return out;
}

class ClosedLoop {
 public:
  ClosedLoop(const Scenario& sc, const InternalModelController& ctrl, VectorXd u_open, Layout layout)
      : sc_(sc), ctrl_(ctrl), u_open_(std::move(u_open)), layout_(layout) {}

  const Layout& layout() const { return layout_; }

  VectorXd input(const ControllerState& cs) const { return ctrl_.uses_theta1() ? ctrl_.output(cs) : u_open_; }

  VectorXd load(const LoopConfig& cfg, double t) const {
    return demand_at(cfg.demand, t, sc_.cost) + disturbance_at(cfg, layout_.n, t);
  }

  VectorXd rhs(const LoopConfig& cfg, double t, const VectorXd& y) const {
    GridState x;
    ControllerState cs;
    unpack(layout_, y, x, cs);
    const VectorXd u = input(cs);
    const GridDerivative dx = dynamics_rhs(x, u, load(cfg, t), sc_.model);
    ControllerState dcs;
    if (ctrl_.uses_theta1()) dcs = ctrl_.derivative(cs, x.omega, cfg.comm);
    return pack(layout_, {dx.eta, dx.omega, dx.voltage}, dcs);
  }

  VectorXd rk4(const LoopConfig& cfg, double t, double h, const VectorXd& y) const {
    const VectorXd k1 = rhs(cfg, t, y);
    const VectorXd k2 = rhs(cfg, t + 0.5 * h, y + 0.5 * h * k1);
    const VectorXd k3 = rhs(cfg, t + 0.5 * h, y + 0.5 * h * k2);
    const VectorXd k4 = rhs(cfg, t + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

 private:
  const Scenario& sc_;
  const InternalModelController& ctrl_;
  VectorXd u_open_;
  Layout layout_;
};

VectorXd reference_input(const Scenario& sc, const VectorXd& constant_load) {
  if (sc.variant == ControllerVariant::open_loop)
    return sc.open_loop_input.value_or(dispatch_for(sc.cost, sc.demand.constant).u_bar);
  return dispatch_for(sc.cost, constant_load).u_bar;
}

Segment make_segment(const Scenario& sc, double t, const Exosystem& demand, const InitialGuess& guess) {
  Segment seg;
  seg.t_start = t;
  seg.demand = demand;
  seg.reference = solve_regulator(sc.model, reference_input(sc, demand.constant), demand.constant, guess);
  seg.reference_ok = seg.reference.usable();
  return seg;
}

StorageReport nan_report() {
  StorageReport r;
  r.w1 = r.w2 = r.u = r.theta = r.z = r.dz_dt_analytic = kNaN;
  r.rho_term = r.grad_v_term = r.laplacian_term = r.supply_term = r.disturbance_term = kNaN;
  return r;
}

}  // namespace

VectorXd Disturbance::at(double t) const {
  if (t < t0) return VectorXd::Zero(amplitude.size());
  if (shape == Shape::exp_pulse) return amplitude * std::exp(-(t - t0) / duration);
  return t < t0 + duration ? amplitude : VectorXd::Zero(amplitude.size());
}

std::optional<double> Disturbance::end() const {
  if (shape == Shape::rect_pulse) return t0 + duration;
  return std::nullopt;
}

double Disturbance::l2_norm_squared() const {
  const double a2 = amplitude.squaredNorm();
  return shape == Shape::exp_pulse ? 0.5 * a2 * duration : a2 * duration;
}

bool InitialPolicy::perturbed() const {
  auto nonzero = [](const VectorXd& v) { return v.size() && !v.isZero(0.0); };
  return nonzero(delta_offset) || nonzero(omega_offset) || nonzero(voltage_offset) || nonzero(theta1_offset);
}

InternalModelController Scenario::controller() const {
  return {variant, cost, gains, InternalModel::of(demand)};
}

void Scenario::validate() const {
  const int n = model.num_nodes();
  if (n == 0) throw std::invalid_argument("scenario: empty network");
  model.params().validate();
  if (model.params().size() != n) throw std::invalid_argument("scenario: parameters do not match the network");
  cost.validate();
  if (cost.size() != n) throw std::invalid_argument("scenario: cost model does not match the network");
  if (demand.size() != n) throw std::invalid_argument("scenario: demand does not match the network");
  if (!demand.residual.empty() && static_cast<int>(demand.residual.size()) != n)
    throw std::invalid_argument("scenario: residual demand must be declared for every node or none");
  if (variant != ControllerVariant::open_loop && comm.size() != n)
    throw std::invalid_argument("scenario: communication graph does not match the network");
  if (open_loop_input && open_loop_input->size() != n)
    throw std::invalid_argument("scenario: open-loop input has wrong length");
  const InternalModelController ctrl = controller();

  if (!(integrator.dt > 0.0) || !std::isfinite(integrator.dt)) throw std::invalid_argument("scenario: dt must be positive");
  if (!(integrator.t_end >= 0.0) || !std::isfinite(integrator.t_end))
    throw std::invalid_argument("scenario: t_end must be nonnegative");
  if (integrator.stride < 1) throw std::invalid_argument("scenario: stride must be at least 1");

  require_size(initial.delta_offset, n, "delta offset");
  require_size(initial.omega_offset, n, "omega offset");
  require_size(initial.voltage_offset, n, "voltage offset");
  require_size(initial.theta1_offset, n, "theta1 offset");

  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& ev : events) {
    if (!(ev.t > prev)) throw std::invalid_argument("scenario: event times must be strictly increasing");
    if (ev.t < 0.0 || ev.t > integrator.t_end) throw std::invalid_argument("scenario: event outside [0, t_end]");
    prev = ev.t;
    if (const auto* step = std::get_if<LoadStep>(&ev.action)) {
      if (step->demand.size() != n) throw std::invalid_argument("load step: demand has wrong length");
      require_same_blocks(demand, step->demand, ctrl);
    } else if (const auto* link = std::get_if<LinkChange>(&ev.action)) {
      if (link->i < 0 || link->j < 0 || link->i >= n || link->j >= n || link->i == link->j)
        throw std::invalid_argument("link event: invalid endpoints");
    } else if (const auto* dist = std::get_if<Disturbance>(&ev.action)) {
      if (dist->amplitude.size() != n) throw std::invalid_argument("disturbance: amplitude has wrong length");
      if (!(dist->duration > 0.0)) throw std::invalid_argument("disturbance: duration must be positive");
    }
  }
}

InitialCondition initial_condition(const Scenario& sc) {
  const InternalModelController ctrl = sc.controller();
  const GridGraph& g = sc.model.graph();
  const int n = sc.model.num_nodes();

  InitialCondition ic;
  ic.equilibrium = solve_regulator(sc.model, reference_input(sc, sc.demand.constant), sc.demand.constant);
  if (!ic.equilibrium.converged())
    throw std::runtime_error("initial steady state not found: " + ic.equilibrium.message);
  const Equilibrium& eq = ic.equilibrium.equilibrium;

  ic.x.eta = eq.eta_bar;
  ic.x.omega = VectorXd::Constant(n, eq.omega_star);
  ic.x.voltage = eq.voltage_bar;
  ic.cs = ctrl.reference_state(sc.demand, 0.0);

  const InitialPolicy& p = sc.initial;
  if (p.delta_offset.size()) ic.x.eta += g.incidence().transpose() * p.delta_offset;
  if (p.omega_offset.size()) ic.x.omega += p.omega_offset;
  if (p.voltage_offset.size()) ic.x.voltage += p.voltage_offset;
  if (p.theta1_offset.size() && ctrl.uses_theta1()) ic.cs.theta1 += p.theta1_offset;
  if (!(ic.x.voltage.array() > 0.0).all()) throw std::runtime_error("initial voltage offset makes a voltage nonpositive");
  return ic;
}

Trajectory simulate(const Scenario& sc) {
  sc.validate();
  const InternalModelController ctrl = sc.controller();
  const InitialCondition ic = initial_condition(sc);
  const int n = sc.model.num_nodes();
  const GridGraph& g = sc.model.graph();
  const Layout layout = layout_of(sc.model, ic.cs);
  const VectorXd u_open = sc.variant == ControllerVariant::open_loop ? reference_input(sc, sc.demand.constant)
                                                                     : VectorXd();
  const ClosedLoop loop(sc, ctrl, u_open, layout);

  const double dt = sc.integrator.dt;
  const double t_end = sc.integrator.t_end;
  const double snap = 1e-9 * dt;

  Trajectory traj;
  LoopConfig cfg{sc.demand, sc.comm, {}};
  Segment first;
  first.demand = sc.demand;
  first.reference = ic.equilibrium;
  first.reference_ok = ic.equilibrium.usable();
  traj.segments.push_back(std::move(first));

  // Breakpoints: event times and rect-pulse ends.
  std::vector<double> breaks;
  for (const auto& ev : sc.events) {
    breaks.push_back(ev.t);
    if (const auto* d = std::get_if<Disturbance>(&ev.action)) {
      if (d->end()) breaks.push_back(ev.t + d->duration);
    }
  }
  std::sort(breaks.begin(), breaks.end());

  std::size_t next_event = 0;
  auto apply_events = [&](double t, const GridState& x) {
    // Switch off finished rect pulses first.
    std::erase_if(cfg.disturbances, [&](const Disturbance& d) {
      return d.shape == Disturbance::Shape::rect_pulse && d.t0 + d.duration <= t + snap;
    });
    while (next_event < sc.events.size() && sc.events[next_event].t <= t + snap) {
      const Event& ev = sc.events[next_event++];
      if (const auto* step = std::get_if<LoadStep>(&ev.action)) {
        cfg.demand = step->demand;
        const auto& prev = traj.segments.back().reference.equilibrium;
        InitialGuess guess;
        if (prev.voltage_bar.size() == n && (prev.voltage_bar.array() > 0.0).all()) {
          guess.delta = node_angles(g, prev.eta_bar);
          guess.voltage = prev.voltage_bar;
        } else {
          guess.delta = node_angles(g, x.eta);
          guess.voltage = x.voltage;
        }
        traj.segments.push_back(make_segment(sc, t, cfg.demand, guess));
      } else if (const auto* link = std::get_if<LinkChange>(&ev.action)) {
        cfg.comm = link->drop ? cfg.comm.drop_link(link->i, link->j) : cfg.comm.add_link(link->i, link->j);
      } else if (const auto* dist = std::get_if<Disturbance>(&ev.action)) {
        Disturbance d = *dist;
        d.t0 = ev.t;
        cfg.disturbances.push_back(std::move(d));
      }
    }
  };

  auto record = [&](double t, const VectorXd& y) {
    Sample s;
    s.t = t;
    unpack(layout, y, s.x, s.cs);
    s.u = loop.input(s.cs);
    s.load = loop.load(cfg, t);
    s.cost = generation_cost(sc.cost, s.u);
    s.segment = static_cast<int>(traj.segments.size()) - 1;
    s.vdot_inf = dynamics_rhs(s.x, s.u, s.load, sc.model).voltage.lpNorm<Eigen::Infinity>();
    const Segment& seg = traj.segments.back();
    const VectorXd dist = disturbance_at(cfg, n, t);
    if (!seg.reference_ok) {
      s.storage = nan_report();
    } else if (ctrl.uses_theta1()) {
      s.storage = closed_loop_z(s.x, s.cs, t, dist, seg.reference.equilibrium.eta_bar,
                                seg.reference.equilibrium.voltage_bar, seg.demand, ctrl, cfg.comm, sc.model);
    } else {
      const Equilibrium& eq = seg.reference.equilibrium;
      const PlantReference ref{eq.eta_bar, VectorXd::Constant(n, eq.omega_star), eq.voltage_bar, eq.u_bar};
      s.storage = open_loop_storage(s.x, s.u, dist, ref, sc.model);
    }
    traj.samples.push_back(std::move(s));
  };

  VectorXd y = pack(layout, ic.x, ic.cs);
  apply_events(0.0, ic.x);
  record(0.0, y);

  double t = 0.0;
  long long k = 0;
  std::size_t next_break = 0;
  while (t < t_end - snap) {
    while (next_break < breaks.size() && breaks[next_break] <= t + snap) ++next_break;
    const double t_grid = static_cast<double>(k + 1) * dt;
    double target = t_grid;
    bool on_grid = true;
    if (t_end < t_grid - snap) {
      target = t_end;
      on_grid = false;
    }
    if (next_break < breaks.size() && breaks[next_break] < target - snap) {
      target = breaks[next_break];
      on_grid = false;
    }

    VectorXd y_next;
    try {
      y_next = loop.rk4(cfg, t, target - t, y);
    } catch (const std::domain_error& e) {
      traj.aborted = true;
      traj.reason = std::string(e.what()) + " during the step from t = " + std::to_string(t);
      break;
    }
    if (!y_next.allFinite()) {
      traj.aborted = true;
      traj.reason = "non-finite state during the step from t = " + std::to_string(t);
      break;
    }
    if (!(y_next.segment(layout.m + layout.n, layout.n).array() > 0.0).all()) {
      traj.aborted = true;
      traj.reason = "nonpositive voltage at t = " + std::to_string(target);
      break;
    }
    y = std::move(y_next);
    if (on_grid) {
      ++k;
      t = t_grid;
    } else {
      t = target;
    }
    GridState x;
    ControllerState cs;
    unpack(layout, y, x, cs);
    apply_events(t, x);
    if (on_grid && k % sc.integrator.stride == 0) record(t, y);
  }

  traj.final_time = t;
  unpack(layout, y, traj.final_state, traj.final_controller);
  return traj;
}

std::optional<double> steady_state_time(const Trajectory& traj, const Scenario& sc, double window, double tol) {
  if (traj.samples.empty()) return std::nullopt;
  const bool open = sc.variant == ControllerVariant::open_loop;
  std::size_t first_ok = traj.samples.size();
  for (std::size_t k = traj.samples.size(); k-- > 0;) {
    const Sample& s = traj.samples[k];
    const Segment& seg = traj.segments[static_cast<std::size_t>(s.segment)];
    const VectorXd u_bar = open ? seg.reference.equilibrium.u_bar : optimal_feedforward(seg.demand, sc.cost, s.t);
    const double worst = std::max({s.x.omega.lpNorm<Eigen::Infinity>(), (s.u - u_bar).lpNorm<Eigen::Infinity>(),
                                   s.vdot_inf});
    if (!(worst < tol)) break;
    first_ok = k;
  }
  if (first_ok == traj.samples.size()) return std::nullopt;
  const double t0 = traj.samples[first_ok].t;
  if (traj.samples.back().t - t0 < window - 1e-9) return std::nullopt;
  return t0;
}

RobustnessResult robustness_experiment(const Scenario& sc, const Disturbance& profile) {
  for (const auto& ev : sc.events) {
    if (std::holds_alternative<LoadStep>(ev.action))
      throw std::invalid_argument("robustness experiment: the scenario must not contain load steps");
  }
  Scenario run = sc;
  run.integrator.stride = 1;
  Event ev{profile.t0, profile};
  const auto pos = std::lower_bound(run.events.begin(), run.events.end(), profile.t0,
                                    [](const Event& e, double t) { return e.t < t; });
  run.events.insert(pos, std::move(ev));

  const Trajectory traj = simulate(run);
  RobustnessResult r;
  r.aborted = traj.aborted;
  if (traj.samples.empty()) return r;
  const auto& eq = traj.segments.front().reference.equilibrium;
  const double omega_bar = sc.variant == ControllerVariant::open_loop ? eq.omega_star : 0.0;

  double prev_in = 0.0, prev_out = 0.0;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const Sample& s = traj.samples[k];
    const double in = profile.at(s.t).squaredNorm();
    const VectorXd dw = s.x.omega.array() - omega_bar;
    const double out = dw.squaredNorm();
    r.linf_out = std::max(r.linf_out, std::sqrt(out));
    if (k > 0) {
      const double h = s.t - traj.samples[k - 1].t;
      r.l2_in += 0.5 * h * (in + prev_in);
      r.l2_out += 0.5 * h * (out + prev_out);
    }
    prev_in = in;
    prev_out = out;
  }
  const VectorXd& a = sc.model.params().damping;
  r.z0 = traj.samples.front().storage.z;
  r.epsilon = a.minCoeff();
  r.gamma = 1.0 / (2.0 * r.epsilon);
  r.a_tilde_min = (a.array() - 0.5 * r.epsilon).minCoeff();
  r.bound_rhs = (r.z0 + r.gamma * r.l2_in) / r.a_tilde_min;
  r.bound_holds = r.linf_out * r.linf_out <= r.bound_rhs;
  if (r.l2_in > 0.0) {
    r.linf_gain = r.linf_out / std::sqrt(r.l2_in);
    r.l2_gain = std::sqrt(r.l2_out / r.l2_in);
  }
  return r;
}

}  // namespace gridreg
