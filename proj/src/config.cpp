#include "gridreg/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <set>

namespace gridreg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) fail(path, "unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path, std::string("missing key '") + key + "'");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "expected a finite number");
  return x;
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

VectorXd vector_of(const json& v, const std::string& path, std::optional<int> expected = std::nullopt) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  if (expected && static_cast<int>(v.size()) != *expected)
    fail(path, "expected " + std::to_string(*expected) + " entries, got " + std::to_string(v.size()));
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

int node_index(const json& v, const std::string& path, int n) {
  if (!v.is_number_integer()) fail(path, "expected an integer node index");
  const int i = v.get<int>();
  if (i < 1 || i > n) fail(path, "node index " + std::to_string(i) + " outside 1.." + std::to_string(n));
  return i - 1;
}

std::pair<int, int> node_pair(const json& v, const std::string& path, int n) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected a pair of node indices");
  return {node_index(v[0], path + "[0]", n), node_index(v[1], path + "[1]", n)};
}

// Exactly one of freq_rad_s, freq_hz, period_s.
double frequency(const json& obj, const std::string& path) {
  int given = 0;
  double mu = 0.0;
  if (obj.contains("freq_rad_s")) {
    mu = number(obj.at("freq_rad_s"), path + ".freq_rad_s");
    ++given;
  }
  if (obj.contains("freq_hz")) {
    mu = 2.0 * std::numbers::pi * number(obj.at("freq_hz"), path + ".freq_hz");
    ++given;
  }
  if (obj.contains("period_s")) {
    const double period = number(obj.at("period_s"), path + ".period_s");
    if (!(period > 0.0)) fail(path + ".period_s", "must be positive");
    mu = 2.0 * std::numbers::pi / period;
    ++given;
  }
  if (given != 1) fail(path, "give exactly one of freq_rad_s, freq_hz, period_s");
  return mu;
}

Exosystem parse_demand(const json& obj, const std::string& path, const CostModel& cost) {
  check_keys(obj, path, {"constant", "common", "residual"});
  const int n = cost.size();
  Exosystem exo;
  exo.constant = vector_of(require(obj, path, "constant"), path + ".constant", n);

  if (obj.contains("common") && !obj.at("common").is_null()) {
    const std::string p = path + ".common";
    const json& c = obj.at("common");
    check_keys(c, p, {"freq_rad_s", "freq_hz", "period_s", "amplitude", "amplitudes", "phase", "injection_check"});
    if (c.contains("injection_check") && c.at("injection_check") != "auto")
      fail(p + ".injection_check", "only \"auto\" is supported");
    const double mu = frequency(c, p);
    const double phase = number_or(c, p, "phase", 0.0);
    double amplitude = 0.0;
    if (c.contains("amplitude") == c.contains("amplitudes")) fail(p, "give exactly one of amplitude, amplitudes");
    if (c.contains("amplitude")) {
      amplitude = number(c.at("amplitude"), p + ".amplitude");
    } else {
      const VectorXd amps = vector_of(c.at("amplitudes"), p + ".amplitudes", n);
      try {
        amplitude = classify_directions({{"common", amps, true}}, cost).front().scale;
      } catch (const std::invalid_argument& e) {
        fail(p + ".amplitudes", e.what());
      }
    }
    exo.common = SinusoidalGenerator::sinusoid(mu, amplitude, phase);
  }

  if (obj.contains("residual") && !obj.at("residual").is_null()) {
    const std::string p = path + ".residual";
    const json& r = obj.at("residual");
    if (!r.is_array() || static_cast<int>(r.size()) != n) fail(p, "expected one entry (or null) per node");
    exo.residual.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const json& e = r[static_cast<std::size_t>(i)];
      if (e.is_null()) continue;
      const std::string pi = p + "[" + std::to_string(i) + "]";
      check_keys(e, pi, {"freq_rad_s", "freq_hz", "period_s", "amplitude", "phase"});
      exo.residual[static_cast<std::size_t>(i)] = SinusoidalGenerator::sinusoid(
          frequency(e, pi), number(require(e, pi, "amplitude"), pi + ".amplitude"), number_or(e, pi, "phase", 0.0));
    }
  }
  return exo;
}

Event parse_event(const json& obj, const std::string& path, const CostModel& cost) {
  check_keys(obj, path, {"t", "load_step", "drop_link", "add_link", "disturbance"});
  const int n = cost.size();
  Event ev;
  ev.t = number(require(obj, path, "t"), path + ".t");
  const int actions = static_cast<int>(obj.contains("load_step")) + static_cast<int>(obj.contains("drop_link")) +
                      static_cast<int>(obj.contains("add_link")) + static_cast<int>(obj.contains("disturbance"));
  if (actions != 1) fail(path, "give exactly one of load_step, drop_link, add_link, disturbance");
  if (obj.contains("load_step")) {
    ev.action = LoadStep{parse_demand(obj.at("load_step"), path + ".load_step", cost)};
  } else if (obj.contains("drop_link") || obj.contains("add_link")) {
    const bool drop = obj.contains("drop_link");
    const char* key = drop ? "drop_link" : "add_link";
    const auto [i, j] = node_pair(obj.at(key), path + "." + key, n);
    ev.action = LinkChange{i, j, drop};
  } else {
    const std::string p = path + ".disturbance";
    const json& d = obj.at("disturbance");
    check_keys(d, p, {"shape", "amplitude", "duration"});
    Disturbance dist;
    const json& shape = require(d, p, "shape");
    if (shape == "exp_pulse") {
      dist.shape = Disturbance::Shape::exp_pulse;
    } else if (shape == "rect_pulse") {
      dist.shape = Disturbance::Shape::rect_pulse;
    } else {
      fail(p + ".shape", "expected \"exp_pulse\" or \"rect_pulse\"");
    }
    dist.amplitude = vector_of(require(d, p, "amplitude"), p + ".amplitude", n);
    dist.duration = number(require(d, p, "duration"), p + ".duration");
    if (!(dist.duration > 0.0)) fail(p + ".duration", "must be positive");
    dist.t0 = ev.t;
    ev.action = dist;
  }
  return ev;
}

}  // namespace

ScenarioConfig parse_scenario(const json& doc) {
  check_keys(doc, "scenario",
             {"description", "network", "comm", "demand", "controller", "events", "integrator", "initial"});
  ScenarioConfig out;
  if (doc.contains("description")) {
    if (!doc.at("description").is_string()) fail("description", "expected a string");
    out.description = doc.at("description").get<std::string>();
  }
  Scenario& sc = out.scenario;

  // network
  const json& net = require(doc, "scenario", "network");
  check_keys(net, "network", {"nodes", "edges"});
  const json& nodes = require(net, "network", "nodes");
  if (!nodes.is_array() || nodes.empty()) fail("network.nodes", "expected a nonempty array");
  const int n = static_cast<int>(nodes.size());
  AreaParams p;
  for (VectorXd* v : {&p.inertia, &p.damping, &p.t_do, &p.x_d, &p.x_dp, &p.e_f, &p.q}) v->resize(n);
  VectorXd b_self(n);
  VectorXd r = VectorXd::Zero(n);
  bool any_r = false;
  for (int i = 0; i < n; ++i) {
    const std::string path = "network.nodes[" + std::to_string(i) + "]";
    const json& node = nodes[static_cast<std::size_t>(i)];
    check_keys(node, path, {"name", "M", "A", "T_do", "X_d", "X_dp", "E_f", "B_self", "q", "r"});
    out.node_names.push_back(node.contains("name") && node.at("name").is_string() ? node.at("name").get<std::string>()
                                                                                 : "area " + std::to_string(i + 1));
    p.inertia(i) = number(require(node, path, "M"), path + ".M");
    p.damping(i) = number(require(node, path, "A"), path + ".A");
    p.t_do(i) = number(require(node, path, "T_do"), path + ".T_do");
    p.x_d(i) = number(require(node, path, "X_d"), path + ".X_d");
    p.x_dp(i) = number(require(node, path, "X_dp"), path + ".X_dp");
    p.e_f(i) = number(require(node, path, "E_f"), path + ".E_f");
    b_self(i) = number(require(node, path, "B_self"), path + ".B_self");
    p.q(i) = number(require(node, path, "q"), path + ".q");
    if (node.contains("r")) {
      r(i) = number(node.at("r"), path + ".r");
      any_r = true;
    }
  }
  if (any_r) p.r = r;

  std::vector<Line> lines;
  if (net.contains("edges")) {
    const json& edges = net.at("edges");
    if (!edges.is_array()) fail("network.edges", "expected an array");
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const std::string path = "network.edges[" + std::to_string(k) + "]";
      check_keys(edges[k], path, {"from", "to", "B"});
      lines.push_back({node_index(require(edges[k], path, "from"), path + ".from", n),
                       node_index(require(edges[k], path, "to"), path + ".to", n),
                       number(require(edges[k], path, "B"), path + ".B")});
    }
  }
  try {
    sc.model = FluxDecayModel(GridGraph(n, std::move(lines), b_self), p);
  } catch (const std::invalid_argument& e) {
    fail("network", e.what());
  }
  sc.cost = CostModel::from_params(p);

  // communication
  std::vector<std::pair<int, int>> links;
  if (doc.contains("comm")) {
    const json& comm = doc.at("comm");
    check_keys(comm, "comm", {"links"});
    const json& l = require(comm, "comm", "links");
    if (!l.is_array()) fail("comm.links", "expected an array of node pairs");
    for (std::size_t k = 0; k < l.size(); ++k) links.push_back(node_pair(l[k], "comm.links[" + std::to_string(k) + "]", n));
  }
  try {
    sc.comm = CommGraph(n, links);
  } catch (const std::invalid_argument& e) {
    fail("comm", e.what());
  }

  sc.demand = parse_demand(require(doc, "scenario", "demand"), "demand", sc.cost);

  // controller
  if (doc.contains("controller")) {
    const json& c = doc.at("controller");
    check_keys(c, "controller", {"variant", "gains", "u"});
    const json& v = require(c, "controller", "variant");
    if (v == "constant") {
      sc.variant = ControllerVariant::constant;
    } else if (v == "common") {
      sc.variant = ControllerVariant::common;
    } else if (v == "wide") {
      sc.variant = ControllerVariant::wide;
    } else if (v == "open_loop") {
      sc.variant = ControllerVariant::open_loop;
    } else {
      fail("controller.variant", "expected \"constant\", \"common\", \"wide\" or \"open_loop\"");
    }
    if (c.contains("u")) {
      if (sc.variant != ControllerVariant::open_loop) fail("controller.u", "only allowed for the open_loop variant");
      sc.open_loop_input = vector_of(c.at("u"), "controller.u", n);
    }
    if (c.contains("gains")) {
      const json& g = c.at("gains");
      check_keys(g, "controller.gains", {"alpha", "beta1", "beta2", "beta3"});
      sc.gains.alpha = number_or(g, "controller.gains", "alpha", 1.0);
      sc.gains.beta1 = number_or(g, "controller.gains", "beta1", 1.0);
      sc.gains.beta2 = number_or(g, "controller.gains", "beta2", 1.0);
      if (g.contains("beta3")) sc.gains.beta3 = vector_of(g.at("beta3"), "controller.gains.beta3", n);
    }
  }

  // events
  if (doc.contains("events")) {
    const json& evs = doc.at("events");
    if (!evs.is_array()) fail("events", "expected an array");
    for (std::size_t k = 0; k < evs.size(); ++k)
      sc.events.push_back(parse_event(evs[k], "events[" + std::to_string(k) + "]", sc.cost));
  }

  // integrator
  if (doc.contains("integrator")) {
    const json& in = doc.at("integrator");
    check_keys(in, "integrator", {"dt", "t_end", "stride"});
    sc.integrator.dt = number_or(in, "integrator", "dt", sc.integrator.dt);
    sc.integrator.t_end = number_or(in, "integrator", "t_end", sc.integrator.t_end);
    if (in.contains("stride")) {
      if (!in.at("stride").is_number_integer()) fail("integrator.stride", "expected an integer");
      sc.integrator.stride = in.at("stride").get<int>();
    }
  }

  // initial state
  if (doc.contains("initial")) {
    const json& ini = doc.at("initial");
    check_keys(ini, "initial", {"policy", "delta_offset", "omega_offset", "voltage_offset", "theta1_offset"});
    const std::string policy = ini.value("policy", std::string("equilibrium"));
    if (policy != "equilibrium" && policy != "perturbed")
      fail("initial.policy", "expected \"equilibrium\" or \"perturbed\"");
    const bool has_offsets = ini.contains("delta_offset") || ini.contains("omega_offset") ||
                             ini.contains("voltage_offset") || ini.contains("theta1_offset");
    if (policy == "equilibrium" && has_offsets) fail("initial", "offsets need policy \"perturbed\"");
    if (ini.contains("delta_offset")) sc.initial.delta_offset = vector_of(ini.at("delta_offset"), "initial.delta_offset", n);
    if (ini.contains("omega_offset")) sc.initial.omega_offset = vector_of(ini.at("omega_offset"), "initial.omega_offset", n);
    if (ini.contains("voltage_offset"))
      sc.initial.voltage_offset = vector_of(ini.at("voltage_offset"), "initial.voltage_offset", n);
    if (ini.contains("theta1_offset"))
      sc.initial.theta1_offset = vector_of(ini.at("theta1_offset"), "initial.theta1_offset", n);
  }

  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_scenario(doc);
}

}  // namespace gridreg
