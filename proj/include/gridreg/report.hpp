#pragma once

#include "gridreg/config.hpp"
#include "gridreg/simulation.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace gridreg {

/// 17 significant digits, "nan"/"inf" for non-finite values.
std::string format_number(double x);

/// t, omega_1..n, V_1..n, eta_1..m, u_1..n, Pl_1..n, theta1_1..n, cost, W1, W2, U, Theta, Z
std::vector<std::string> trajectory_columns(int n, int m);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int n, int m);

/// Storage terms and convergence measures per sample. u_dev is measured
/// against the optimal feedforward of the current demand (the fixed input in
/// open loop); dZ_step is Z(t_k) - Z(t_{k-1}) within a segment.
void write_monitors_csv(std::ostream& out, const Trajectory& traj, const Scenario& sc);

/// Largest sample-to-sample increase of Z within segments (NaN samples skipped).
double max_z_increase(const Trajectory& traj);

nlohmann::json summary_json(const ScenarioConfig& cfg, const Trajectory& traj);

struct CheckRow {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Structural and feasibility checks for a scenario: E dominance, steady
/// state, security, Schur complement, dispatch feasibility, communication
/// connectivity (initially and after every link event), exosystem structure.
std::vector<CheckRow> run_checks(const Scenario& sc);
void print_checks(std::ostream& out, const std::vector<CheckRow>& rows);

/// Per demand segment (initial and each load step): optimal dispatch, its
/// multiplier and cost, and the cost of self-supply u = P^l.
nlohmann::json dispatch_json(const Scenario& sc);

/// Per demand segment: steady state under the optimal dispatch.
nlohmann::json equilibrium_json(const Scenario& sc);

}  // namespace gridreg
