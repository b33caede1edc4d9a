#include "support.hpp"

#include "gridreg/config.hpp"
#include "gridreg/report.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace gridreg;
using namespace testing_support;
using nlohmann::json;

namespace {

std::string scenario_path(const char* name) { return std::string(GRIDREG_SOURCE_DIR) + "/scenarios/" + name; }

json read_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Config, ShippedScenariosMatchFixtures) {
  const ScenarioConfig one = load_scenario(scenario_path("scenario1.json"));
  const Scenario ref = scenario_one();
  EXPECT_EQ(one.node_names.size(), 4u);
  EXPECT_EQ(one.scenario.variant, ControllerVariant::constant);
  EXPECT_EQ(one.scenario.comm.laplacian(), ref.comm.laplacian());
  EXPECT_EQ(one.scenario.model.graph().incidence(), ref.model.graph().incidence());
  EXPECT_EQ(one.scenario.model.e_diagonal(), ref.model.e_diagonal());
  ASSERT_EQ(one.scenario.events.size(), 2u);
  EXPECT_EQ(one.scenario.events[1].t, 70.0);
  const auto& drop = std::get<LinkChange>(one.scenario.events[1].action);
  EXPECT_EQ(std::minmax(drop.i, drop.j), std::minmax(0, 2));
  EXPECT_TRUE(drop.drop);

  const ScenarioConfig two = load_scenario(scenario_path("scenario2.json"));
  const Scenario ref2 = scenario_two();
  EXPECT_EQ(two.scenario.variant, ControllerVariant::wide);
  for (double t : {0.0, 7.3, 29.0}) {
    EXPECT_LT((demand_at(two.scenario.demand, t, two.scenario.cost) - demand_at(ref2.demand, t, ref2.cost))
                  .lpNorm<Eigen::Infinity>(),
              1e-15);
    const auto& step = std::get<LoadStep>(two.scenario.events[0].action).demand;
    const auto& step_ref = std::get<LoadStep>(ref2.events[0].action).demand;
    EXPECT_LT((demand_at(step, t, two.scenario.cost) - demand_at(step_ref, t, ref2.cost)).lpNorm<Eigen::Infinity>(),
              1e-15);
  }
}

TEST(Config, UnknownKeysAreRejected) {
  json doc = read_json(scenario_path("scenario1.json"));
  doc["integrator"]["tolerance"] = 1e-6;
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = read_json(scenario_path("scenario1.json"));
  doc["network"]["nodes"][0]["inertia"] = 1.0;
  try {
    parse_scenario(doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("inertia"), std::string::npos);
  }
}

TEST(Config, StructuralErrors) {
  const json base = read_json(scenario_path("scenario1.json"));
  json doc = base;
  doc["network"]["edges"][0]["to"] = 9;
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = base;
  doc["controller"]["variant"] = "adaptive";
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = base;
  doc["integrator"]["dt"] = -1.0;
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = base;
  doc["events"][0]["drop_link"] = json::array({1, 2});
  EXPECT_THROW(parse_scenario(doc), ConfigError);  // two actions in one event
  doc = base;
  doc["initial"]["omega_offset"] = json::array({0.0, 0.0, 0.0, 0.0});
  EXPECT_THROW(parse_scenario(doc), ConfigError);  // offsets need the perturbed policy
  doc = base;
  doc["demand"]["constant"] = json::array({1.0, 2.0});
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  EXPECT_THROW(parse_scenario(json::parse("[1, 2]")), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(Config, FrequencyKeysAreEquivalent) {
  json doc = read_json(scenario_path("scenario2.json"));
  const double t = 11.0;
  auto residual_at = [&](const json& d) {
    const ScenarioConfig cfg = parse_scenario(d);
    return demand_at(cfg.scenario.demand, t, cfg.scenario.cost);
  };
  const VectorXd base = residual_at(doc);
  for (auto& r : doc["demand"]["residual"]) {
    r.erase("period_s");
    r["freq_hz"] = 1.0 / 30.0;
  }
  EXPECT_LT((residual_at(doc) - base).lpNorm<Eigen::Infinity>(), 1e-15);
  for (auto& r : doc["demand"]["residual"]) {
    r.erase("freq_hz");
    r["freq_rad_s"] = 2.0 * std::numbers::pi / 30.0;
  }
  EXPECT_LT((residual_at(doc) - base).lpNorm<Eigen::Infinity>(), 1e-15);
  doc["demand"]["residual"][0]["period_s"] = 30.0;
  EXPECT_THROW(parse_scenario(doc), ConfigError);  // two frequency keys
}

TEST(Config, CommonAmplitudesMustFollowCompensableDirection) {
  json doc = read_json(scenario_path("scenario1.json"));
  doc["controller"]["variant"] = "common";
  doc["events"] = json::array();
  doc["demand"]["common"] = {{"period_s", 20.0}, {"amplitudes", {0.05, 0.05, 0.05, 0.05}}, {"phase", 0.0}};
  try {
    parse_scenario(doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("proportional"), std::string::npos) << e.what();
  }
  // Q^-1 1 = (1, 4/3, 2/3, 2).
  doc["demand"]["common"]["amplitudes"] = {0.03, 0.04, 0.02, 0.06};
  const ScenarioConfig cfg = parse_scenario(doc);
  ASSERT_TRUE(cfg.scenario.demand.common.has_value());
  const double expected = 0.06 * std::sin(2.0 * std::numbers::pi / 20.0 * 5.0);
  EXPECT_NEAR(demand_at(cfg.scenario.demand, 5.0, cfg.scenario.cost)(3) - 1.0, expected, 1e-15);
  doc["demand"]["common"].erase("amplitudes");
  doc["demand"]["common"]["amplitude"] = 0.03;
  EXPECT_NO_THROW(parse_scenario(doc));
}

TEST(Config, OpenLoopAndDisturbanceEvents) {
  json doc = read_json(scenario_path("scenario1.json"));
  doc["controller"] = {{"variant", "open_loop"}, {"u", {1.0, 1.7, 0.9, 1.8}}};
  const json pulse = {{"shape", "rect_pulse"}, {"amplitude", {0.1, 0, 0, 0}}, {"duration", 2.0}};
  doc["events"] = json::array({{{"t", 1.0}, {"disturbance", pulse}}});
  const ScenarioConfig cfg = parse_scenario(doc);
  EXPECT_EQ(cfg.scenario.variant, ControllerVariant::open_loop);
  ASSERT_TRUE(cfg.scenario.open_loop_input.has_value());
  const auto& d = std::get<Disturbance>(cfg.scenario.events[0].action);
  EXPECT_EQ(d.t0, 1.0);
  EXPECT_EQ(d.shape, Disturbance::Shape::rect_pulse);
  doc["controller"]["variant"] = "constant";
  EXPECT_THROW(parse_scenario(doc), ConfigError);  // u only for open loop
}

TEST(Report, TrajectoryCsvRoundTrips) {
  Scenario sc = scenario_one();
  sc.integrator.t_end = 10.5;
  sc.events.pop_back();
  const Trajectory traj = simulate(sc);
  std::ostringstream out;
  write_trajectory_csv(out, traj, 4, 4);
  const auto rows = split_csv(out.str());
  ASSERT_EQ(rows.size(), traj.samples.size() + 1);
  const auto cols = trajectory_columns(4, 4);
  ASSERT_EQ(rows[0], cols);
  EXPECT_EQ(cols.size(), 1u + 4 + 4 + 4 + 4 + 4 + 4 + 6);
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const Sample& s = traj.samples[k];
    const auto& r = rows[k + 1];
    ASSERT_EQ(r.size(), cols.size());
    EXPECT_EQ(std::strtod(r[0].c_str(), nullptr), s.t);
    for (int i = 0; i < 4; ++i) {
      EXPECT_EQ(std::strtod(r[1 + i].c_str(), nullptr), s.x.omega(i));
      EXPECT_EQ(std::strtod(r[5 + i].c_str(), nullptr), s.x.voltage(i));
      EXPECT_EQ(std::strtod(r[17 + i].c_str(), nullptr), s.load(i));
      EXPECT_EQ(std::strtod(r[21 + i].c_str(), nullptr), s.cs.theta1(i));
    }
    EXPECT_EQ(std::strtod(r[25].c_str(), nullptr), s.cost);
    EXPECT_EQ(std::strtod(r[30].c_str(), nullptr), s.storage.z);
  }
}

TEST(Report, OutputIsByteIdenticalAcrossRuns) {
  Scenario sc = scenario_two();
  sc.integrator.t_end = 12.0;
  const ScenarioConfig cfg{"", {"a", "b", "c", "d"}, sc};
  std::string first[3], second[3];
  for (std::string* out : {first, second}) {
    const Trajectory traj = simulate(sc);
    std::ostringstream a, b;
    write_trajectory_csv(a, traj, 4, 4);
    write_monitors_csv(b, traj, sc);
    out[0] = a.str();
    out[1] = b.str();
    out[2] = summary_json(cfg, traj).dump();
  }
  for (int i = 0; i < 3; ++i) EXPECT_EQ(first[i], second[i]);
}

TEST(Report, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(std::strtod(format_number(1.0 / 3.0).c_str(), nullptr), 1.0 / 3.0);
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Report, ChecksPassForShippedScenarios) {
  for (const char* name : {"scenario1.json", "scenario2.json"}) {
    const auto rows = run_checks(load_scenario(scenario_path(name)).scenario);
    EXPECT_FALSE(rows.empty());
    for (const auto& r : rows) EXPECT_TRUE(r.pass) << name << ": " << r.name;
  }
}

TEST(Report, DisconnectingDropIsFlagged) {
  Scenario sc = scenario_one();
  sc.events.push_back({80.0, LinkChange{2, 3, true}});
  sc.events.push_back({90.0, LinkChange{0, 3, true}});
  const auto rows = run_checks(sc);
  bool flagged = false;
  for (const auto& r : rows) flagged = flagged || !r.pass;
  EXPECT_TRUE(flagged);
}
