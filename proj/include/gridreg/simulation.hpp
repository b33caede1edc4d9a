#pragma once

#include "gridreg/controllers.hpp"
#include "gridreg/equilibrium.hpp"
#include "gridreg/exosystem.hpp"
#include "gridreg/passivity.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gridreg {

/// Replaces the demand model from the event time on.
struct LoadStep {
  Exosystem demand;
};

/// Deactivates (drop) or activates a communication link; zero-based nodes.
struct LinkChange {
  int i = 0;
  int j = 0;
  bool drop = true;
};

/// Extra load Q^l(t) = amplitude * shape(t - t0) added on top of the demand
/// from the event time on. exp_pulse: exp(-(t - t0) / duration);
/// rect_pulse: 1 on [t0, t0 + duration), 0 afterwards.
struct Disturbance {
  enum class Shape { exp_pulse, rect_pulse };
  Shape shape = Shape::exp_pulse;
  VectorXd amplitude;
  double t0 = 0.0;
  double duration = 1.0;

  VectorXd at(double t) const;
  /// Time at which the profile switches off discontinuously, if any.
  std::optional<double> end() const;
  /// Closed-form integral of ||Q^l||^2 over [t0, infinity).
  double l2_norm_squared() const;
  Disturbance scaled(double c) const { return {shape, amplitude * c, t0, duration}; }
};

using EventAction = std::variant<LoadStep, LinkChange, Disturbance>;

struct Event {
  double t = 0.0;
  EventAction action;
};

struct IntegratorSettings {
  double dt = 1e-3;
  double t_end = 100.0;
  int stride = 100;  // record every stride-th grid step
};

/// "equilibrium" starts on the steady state of the initial demand; the
/// offsets (empty = zero) are added on top. Angle offsets act on node angles,
/// so eta moves by D^T delta_offset.
struct InitialPolicy {
  VectorXd delta_offset;
  VectorXd omega_offset;
  VectorXd voltage_offset;
  VectorXd theta1_offset;

  bool perturbed() const;
};

struct Scenario {
  FluxDecayModel model;
  CostModel cost;
  Exosystem demand;
  ControllerVariant variant = ControllerVariant::constant;
  ControllerGains gains;
  CommGraph comm;
  std::optional<VectorXd> open_loop_input;  // defaults to the dispatch of the initial constant demand
  std::vector<Event> events;
  IntegratorSettings integrator;
  InitialPolicy initial;

  /// Throws std::invalid_argument on inconsistent sizes, dt <= 0, t_end < 0,
  /// events out of order or outside [0, t_end], or a common variant without a
  /// common demand block.
  void validate() const;
  InternalModelController controller() const;
};

/// Steady state a segment is measured against.
struct Segment {
  double t_start = 0.0;
  Exosystem demand;
  RegulatorSolution reference;  // eta_bar, V_bar, omega_star, u_bar for the constant demand
  bool reference_ok = false;
};

struct Sample {
  double t = 0.0;
  GridState x;
  ControllerState cs;
  VectorXd u;
  VectorXd load;  // demand plus disturbance
  double cost = 0.0;
  StorageReport storage;  // NaN when the segment has no usable reference
  double vdot_inf = 0.0;
  int segment = 0;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<Segment> segments;
  bool aborted = false;
  std::string reason;
  double final_time = 0.0;  // last time the state was valid
  GridState final_state;
  ControllerState final_controller;
};

struct InitialCondition {
  GridState x;
  ControllerState cs;
  RegulatorSolution equilibrium;
};

/// Throws std::runtime_error when the steady state of the initial demand
/// cannot be found.
InitialCondition initial_condition(const Scenario& sc);

/// Fixed-step classical RK4 on (eta, omega, V, theta1, theta2, theta3) over
/// the grid t_k = k dt. Steps are split at event times so events land on step
/// boundaries; samples are recorded after the events at their time have been
/// applied. Integration stops with `aborted` set on a nonpositive voltage or a
/// non-finite state.
Trajectory simulate(const Scenario& sc);

/// Earliest recorded time from which max(|omega|_inf, |u - u_bar(t)|_inf,
/// |V'|_inf) < tol holds up to the end of the run, provided at least `window`
/// seconds remain. u_bar(t) is the optimal feedforward of the current demand
/// (the fixed input in open loop).
std::optional<double> steady_state_time(const Trajectory& traj, const Scenario& sc, double window = 5.0,
                                        double tol = 1e-6);

struct RobustnessResult {
  double l2_in = 0.0;     // trapezoidal integral of ||Q^l||^2
  double linf_out = 0.0;  // sup ||omega - omega_bar||
  double l2_out = 0.0;    // trapezoidal integral of ||omega - omega_bar||^2
  double z0 = 0.0;
  double epsilon = 0.0;   // min A
  double gamma = 0.0;     // 1 / (2 epsilon)
  double a_tilde_min = 0.0;
  double bound_rhs = 0.0;  // (Z(0) + gamma l2_in) / min A_tilde
  bool bound_holds = false;  // linf_out^2 <= bound_rhs
  double linf_gain = 0.0;   // linf_out / sqrt(l2_in), 0 when l2_in = 0
  double l2_gain = 0.0;     // sqrt(l2_out / l2_in)
  bool aborted = false;
};

/// Runs sc with the extra disturbance recorded at every step. sc must have no
/// load steps (throws std::invalid_argument otherwise).
RobustnessResult robustness_experiment(const Scenario& sc, const Disturbance& profile);

}  // namespace gridreg
