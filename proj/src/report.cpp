#include "gridreg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace gridreg {

namespace {

using nlohmann::json;

json to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
  return out;
}

json number_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void append(std::string& line, double x) {
  line += ',';
  line += format_number(x);
}

void append(std::string& line, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) append(line, v(i));
}

struct DemandSegment {
  double t = 0.0;
  const Exosystem* demand = nullptr;
};

std::vector<DemandSegment> demand_segments(const Scenario& sc) {
  std::vector<DemandSegment> out{{0.0, &sc.demand}};
  for (const auto& ev : sc.events) {
    if (const auto* step = std::get_if<LoadStep>(&ev.action)) out.push_back({ev.t, &step->demand});
  }
  return out;
}

VectorXd segment_input(const Scenario& sc, const Exosystem& demand) {
  if (sc.variant == ControllerVariant::open_loop)
    return sc.open_loop_input.value_or(dispatch_for(sc.cost, sc.demand.constant).u_bar);
  return dispatch_for(sc.cost, demand.constant).u_bar;
}

InitialGuess guess_from(const RegulatorSolution& prev, const GridGraph& g) {
  InitialGuess guess;
  if (!prev.converged() || g.num_lines() == 0) return guess;
  guess.delta = g.incidence().transpose().completeOrthogonalDecomposition().solve(prev.equilibrium.eta_bar);
  guess.voltage = prev.equilibrium.voltage_bar;
  return guess;
}

std::string status_text(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::not_converged: return "not_converged";
    case SolveStatus::nonpositive_voltage: return "nonpositive_voltage";
    case SolveStatus::singular_jacobian: return "singular_jacobian";
  }
  return "unknown";
}

std::string fmt(double x, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> trajectory_columns(int n, int m) {
  std::vector<std::string> cols{"t"};
  auto add = [&](const char* prefix, int count) {
    for (int i = 1; i <= count; ++i) cols.push_back(std::string(prefix) + "_" + std::to_string(i));
  };
  add("omega", n);
  add("V", n);
  add("eta", m);
  add("u", n);
  add("Pl", n);
  add("theta1", n);
  for (const char* c : {"cost", "W1", "W2", "U", "Theta", "Z"}) cols.emplace_back(c);
  return cols;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int n, int m) {
  const auto cols = trajectory_columns(n, m);
  std::string header;
  for (std::size_t i = 0; i < cols.size(); ++i) header += (i ? "," : "") + cols[i];
  out << header << '\n';
  const VectorXd no_theta = VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (const Sample& s : traj.samples) {
    std::string line = format_number(s.t);
    append(line, s.x.omega);
    append(line, s.x.voltage);
    append(line, s.x.eta);
    append(line, s.u);
    append(line, s.load);
    append(line, s.cs.theta1.size() ? s.cs.theta1 : no_theta);
    append(line, s.cost);
    append(line, s.storage.w1);
    append(line, s.storage.w2);
    append(line, s.storage.u);
    append(line, s.storage.theta);
    append(line, s.storage.z);
    out << line << '\n';
  }
}

double max_z_increase(const Trajectory& traj) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const Sample& a = traj.samples[k - 1];
    const Sample& b = traj.samples[k];
    if (a.segment != b.segment || !std::isfinite(a.storage.z) || !std::isfinite(b.storage.z)) continue;
    worst = std::max(worst, b.storage.z - a.storage.z);
  }
  return worst;
}

void write_monitors_csv(std::ostream& out, const Trajectory& traj, const Scenario& sc) {
  out << "t,segment,W1,W2,U,Theta,Z,dZ_dt,rho,gradV,laplacian,supply,disturbance,dZ_step,omega_inf,u_dev_inf,"
         "Vdot_inf\n";
  const bool open = sc.variant == ControllerVariant::open_loop;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const Sample& s = traj.samples[k];
    const Segment& seg = traj.segments[static_cast<std::size_t>(s.segment)];
    const VectorXd u_bar = open ? seg.reference.equilibrium.u_bar : optimal_feedforward(seg.demand, sc.cost, s.t);
    double dz_step = std::numeric_limits<double>::quiet_NaN();
    if (k > 0 && traj.samples[k - 1].segment == s.segment) dz_step = s.storage.z - traj.samples[k - 1].storage.z;
    std::string line = format_number(s.t);
    line += ',' + std::to_string(s.segment);
    for (double v : {s.storage.w1, s.storage.w2, s.storage.u, s.storage.theta, s.storage.z, s.storage.dz_dt_analytic,
                     s.storage.rho_term, s.storage.grad_v_term, s.storage.laplacian_term, s.storage.supply_term,
                     s.storage.disturbance_term, dz_step, s.x.omega.lpNorm<Eigen::Infinity>(),
                     (s.u - u_bar).lpNorm<Eigen::Infinity>(), s.vdot_inf})
      append(line, v);
    out << line << '\n';
  }
}

json summary_json(const ScenarioConfig& cfg, const Trajectory& traj) {
  const Scenario& sc = cfg.scenario;
  json out;
  out["description"] = cfg.description;
  out["nodes"] = sc.model.num_nodes();
  out["lines"] = sc.model.num_lines();
  out["variant"] = to_string(sc.variant);
  out["aborted"] = traj.aborted;
  if (traj.aborted) out["abort_reason"] = traj.reason;
  out["final_time"] = traj.final_time;
  out["samples"] = traj.samples.size();
  out["dt"] = sc.integrator.dt;
  out["stride"] = sc.integrator.stride;

  json segs = json::array();
  for (const Segment& seg : traj.segments) {
    const Equilibrium& eq = seg.reference.equilibrium;
    segs.push_back({{"t_start", seg.t_start},
                    {"constant_demand", to_json(seg.demand.constant)},
                    {"reference_status", status_text(seg.reference.status)},
                    {"reference_secure", seg.reference.secure},
                    {"omega_star", number_json(eq.omega_star)},
                    {"eta_bar", to_json(eq.eta_bar)},
                    {"V_bar", to_json(eq.voltage_bar)},
                    {"u_bar", to_json(eq.u_bar)}});
  }
  out["segments"] = segs;

  if (!traj.samples.empty()) {
    const Sample& last = traj.samples.back();
    const Segment& seg = traj.segments[static_cast<std::size_t>(last.segment)];
    const DispatchSolution opt = dispatch_for(sc.cost, seg.demand.constant);
    json fin;
    fin["t"] = last.t;
    fin["omega_inf"] = last.x.omega.lpNorm<Eigen::Infinity>();
    fin["u"] = to_json(last.u);
    fin["u_bar"] = to_json(opt.u_bar);
    fin["u_error_inf"] = (last.u - optimal_feedforward(seg.demand, sc.cost, last.t)).lpNorm<Eigen::Infinity>();
    fin["cost"] = last.cost;
    fin["cost_optimal"] = opt.cost;
    fin["cost_self_supply"] = generation_cost(sc.cost, seg.demand.constant);
    fin["Z"] = number_json(last.storage.z);
    out["last_sample"] = fin;
  }
  out["max_Z_increase_within_segments"] = number_json(max_z_increase(traj));
  const auto settle = steady_state_time(traj, sc);
  out["steady_state_rule"] = "max(|omega|, |u - u_bar(t)|, |dV/dt|) < 1e-6 up to the end, over at least 5 s";
  out["steady_state_time"] = settle ? json(*settle) : json(nullptr);
  return out;
}

std::vector<CheckRow> run_checks(const Scenario& sc) {
  std::vector<CheckRow> rows;
  const GridGraph& g = sc.model.graph();

  const DominanceReport dom = check_e_positive_definite(g, sc.model.params());
  {
    std::string detail = "margins |B_ii| - sum |B_ij|:";
    for (std::size_t i = 0; i < dom.nodes.size(); ++i) detail += " " + fmt(dom.nodes[i].margin, 4);
    rows.push_back({"E(eta) positive definite (dominance)", dom.pass, detail});
  }

  RegulatorSolution initial;
  try {
    initial = solve_regulator(sc.model, segment_input(sc, sc.demand), sc.demand.constant);
    rows.push_back({"steady state at the initial demand", initial.converged(),
                    status_text(initial.status) + ", residual " + fmt(initial.equilibrium.residual_norm, 3) + ", " +
                        std::to_string(initial.iterations) + " iterations"});
  } catch (const std::exception& e) {
    rows.push_back({"steady state at the initial demand", false, e.what()});
  }

  if (initial.converged()) {
    const VectorXd& eta = initial.equilibrium.eta_bar;
    const double worst = eta.size() ? eta.cwiseAbs().maxCoeff() : 0.0;
    rows.push_back({"security |eta_bar| < pi/2", initial.secure,
                    "max |eta_bar| = " + fmt(worst, 4) + " (limit " + fmt(std::numbers::pi / 2.0, 4) + ")"});
    if (initial.secure) {
      const auto a3 = check_assumption3(eta, initial.equilibrium.voltage_bar, sc.model);
      rows.push_back({"Schur complement of the W2 Hessian positive", a3.pass, "min eigenvalue " + fmt(a3.min_eig, 4)});
    } else {
      rows.push_back({"Schur complement of the W2 Hessian positive", false, "not evaluated outside the security region"});
    }
  }

  {
    RegulatorSolution prev;
    for (const auto& seg : demand_segments(sc)) {
      const std::string name = "optimal dispatch feasible (demand from t = " + fmt(seg.t) + ")";
      try {
        const auto a4 = check_assumption4(sc.model, sc.cost, seg.demand->constant, guess_from(prev, g));
        prev = a4.solution;
        rows.push_back({name, a4.pass,
                        status_text(a4.solution.status) + (a4.solution.secure ? ", secure" : ", not secure") +
                            ", cost " + fmt(a4.dispatch.cost)});
      } catch (const std::exception& e) {
        rows.push_back({name, false, e.what()});
      }
    }
  }

  if (sc.variant != ControllerVariant::open_loop) {
    CommGraph comm = sc.comm;
    rows.push_back({"communication graph connected (t = 0)", comm.connected(),
                    std::to_string(comm.active_links().size()) + " active links"});
    for (const auto& ev : sc.events) {
      const auto* link = std::get_if<LinkChange>(&ev.action);
      if (!link) continue;
      const std::string name = "communication graph connected (after t = " + fmt(ev.t) + ")";
      try {
        comm = link->drop ? comm.drop_link(link->i, link->j) : comm.add_link(link->i, link->j);
        rows.push_back({name, comm.connected(), std::to_string(comm.active_links().size()) + " active links"});
      } catch (const std::exception& e) {
        rows.push_back({name, false, e.what()});
      }
    }
  }

  for (const auto& seg : demand_segments(sc)) {
    const std::string name = "exosystem structure (demand from t = " + fmt(seg.t) + ")";
    if (!seg.demand->time_varying()) {
      rows.push_back({name, true, "constant demand only"});
      continue;
    }
    const ExosystemReport rep = validate(*seg.demand);
    std::string detail;
    for (const auto& issue : rep.issues) detail += (detail.empty() ? "" : "; ") + issue;
    if (detail.empty()) {
      try {
        detail = decompose_demand(*seg.demand, sc.cost).description;
      } catch (const std::exception& e) {
        detail = e.what();
      }
    }
    rows.push_back({name, rep.pass(), detail});
  }
  return rows;
}

void print_checks(std::ostream& out, const std::vector<CheckRow>& rows) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  for (const auto& r : rows) {
    out << (r.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << r.name << "  "
        << r.detail << '\n';
  }
}

json dispatch_json(const Scenario& sc) {
  json out = json::array();
  for (const auto& seg : demand_segments(sc)) {
    const DispatchSolution sol = dispatch_for(sc.cost, seg.demand->constant);
    out.push_back({{"t_start", seg.t},
                   {"constant_demand", to_json(seg.demand->constant)},
                   {"u_bar", to_json(sol.u_bar)},
                   {"lambda_bar", sol.lambda_bar},
                   {"cost", sol.cost},
                   {"cost_self_supply", generation_cost(sc.cost, seg.demand->constant)}});
  }
  return out;
}

json equilibrium_json(const Scenario& sc) {
  json out = json::array();
  RegulatorSolution prev;
  for (const auto& seg : demand_segments(sc)) {
    const VectorXd u = segment_input(sc, *seg.demand);
    const RegulatorSolution sol = solve_regulator(sc.model, u, seg.demand->constant, guess_from(prev, sc.model.graph()));
    prev = sol;
    const Equilibrium& eq = sol.equilibrium;
    out.push_back({{"t_start", seg.t},
                   {"status", status_text(sol.status)},
                   {"secure", sol.secure},
                   {"iterations", sol.iterations},
                   {"residual", number_json(eq.residual_norm)},
                   {"omega_star", eq.omega_star},
                   {"eta_bar", to_json(eq.eta_bar)},
                   {"V_bar", to_json(eq.voltage_bar)},
                   {"u", to_json(u)}});
  }
  return out;
}

}  // namespace gridreg
