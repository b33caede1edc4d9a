#include "support.hpp"

#include <gtest/gtest.h>

using namespace gridreg;
using namespace testing_support;

namespace {

VectorXd random_injection(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * unit(rng);
  return v;
}

}  // namespace

TEST(Regulator, FourAreaSteadyStateSatisfiesEquations) {
  const FluxDecayModel model = four_area_model();
  const CostModel c = CostModel::from_params(model.params());
  const VectorXd u = optimal_dispatch(c, load_after()).u_bar;
  const RegulatorSolution sol = solve_regulator(model, u, load_after());
  ASSERT_TRUE(sol.usable()) << sol.message;
  const Equilibrium& eq = sol.equilibrium;
  EXPECT_NEAR(eq.omega_star, 0.0, 1e-15);
  EXPECT_LT(eq.residual_norm, 1e-10);
  // Independent check through the node-angle form at omega = 0.
  const VectorXd delta = model.graph().incidence().transpose().completeOrthogonalDecomposition().solve(eq.eta_bar);
  const NodeDerivative d = node_angle_rhs(delta, VectorXd::Zero(4), eq.voltage_bar, u, load_after(), model.graph(),
                                          model.params());
  EXPECT_LT(d.omega.lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_LT(d.voltage.lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_TRUE((eq.voltage_bar.array() > 0.7).all() && (eq.voltage_bar.array() < 1.0).all());
}

TEST(Regulator, ImbalanceGivesCommonFrequency) {
  const FluxDecayModel model = four_area_model();
  const VectorXd u = vec({1.0, 1.0, 1.0, 1.0});
  const RegulatorSolution sol = solve_regulator(model, u, load_before());
  ASSERT_TRUE(sol.converged());
  EXPECT_NEAR(sol.equilibrium.omega_star, (4.0 - 5.5) / (1.60 + 1.22 + 1.38 + 1.42), 1e-15);
  EXPECT_LT(sol.equilibrium.residual_norm, 1e-10);
}

TEST(Regulator, NewtonMatchesAcyclicFormulaOnRandomTrees) {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 6;
    const FluxDecayModel model = random_model(rng, n, 0);
    ASSERT_TRUE(model.graph().is_tree());
    // Random networks run at low voltage, so keep the transfers modest.
    const VectorXd u = VectorXd::Constant(n, 1.0) + random_injection(rng, n, 0.3);
    const VectorXd load = VectorXd::Constant(n, 1.0) + random_injection(rng, n, 0.3);
    const RegulatorSolution sol = solve_regulator(model, u, load);
    ASSERT_TRUE(sol.usable()) << sol.message;
    const AcyclicAngles ac = acyclic_eta(model.graph(), sol.equilibrium.voltage_bar, u, load, model.params().damping);
    ASSERT_TRUE(ac.feasible);
    EXPECT_LT((ac.eta_bar - sol.equilibrium.eta_bar).lpNorm<Eigen::Infinity>(), 1e-8);
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(Regulator, AcyclicFormulaRejectsCycles) {
  const FluxDecayModel model = four_area_model();
  EXPECT_THROW(acyclic_eta(model.graph(), VectorXd::Ones(4), VectorXd::Ones(4), VectorXd::Ones(4),
                           model.params().damping),
               std::invalid_argument);
}

TEST(Regulator, AcyclicFormulaReportsInfeasibleTransfer) {
  const GridGraph g(2, {{0, 1, 2.0}}, vec({-10.0, -10.0}));
  const AcyclicAngles ac = acyclic_eta(g, VectorXd::Ones(2), vec({10.0, 0.0}), vec({0.0, 10.0}), VectorXd::Ones(2));
  EXPECT_FALSE(ac.feasible);
  EXPECT_GT(ac.sine_inf_norm, 1.0);
}

TEST(Regulator, DecoupledNetworkSolvedDirectly) {
  AreaParams p = four_area_params();
  const FluxDecayModel model(GridGraph(4, {}, vec({-49.61, -61.66, -52.17, -40.18})), p);
  const RegulatorSolution sol = solve_regulator(model, load_before(), load_before());
  ASSERT_TRUE(sol.converged());
  EXPECT_EQ(sol.equilibrium.eta_bar.size(), 0);
  EXPECT_TRUE(sol.secure);
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(sol.equilibrium.voltage_bar(i), model.excitation()(i) / model.e_diagonal()(i), 1e-15);
  // Without lines the areas cannot exchange power.
  const RegulatorSolution bad = solve_regulator(model, vec({2.0, 0.0, 1.5, 1.0}), vec({0.0, 2.0, 1.5, 1.0}));
  EXPECT_FALSE(bad.converged());
}

TEST(Regulator, DisconnectedNetworkWithLinesThrows) {
  const FluxDecayModel model(GridGraph(4, {{0, 1, 10.0}, {2, 3, 10.0}}, vec({-30, -30, -30, -30})),
                             four_area_params());
  EXPECT_THROW(solve_regulator(model, VectorXd::Ones(4), VectorXd::Ones(4)), std::invalid_argument);
}

TEST(Regulator, InfeasibleTransferDoesNotConverge) {
  const GridGraph g(2, {{0, 1, 2.0}}, vec({-10.0, -10.0}));
  AreaParams p;
  p.inertia = p.damping = p.t_do = p.q = VectorXd::Ones(2);
  p.e_f = VectorXd::Constant(2, 4.0);
  p.x_d = VectorXd::Constant(2, 1.5);
  p.x_dp = VectorXd::Constant(2, 0.3);
  const FluxDecayModel model(g, p);
  const RegulatorSolution sol = solve_regulator(model, vec({20.0, 0.0}), vec({0.0, 20.0}));
  EXPECT_FALSE(sol.usable());
  EXPECT_FALSE(sol.message.empty());
}

TEST(Regulator, GuessValidation) {
  const FluxDecayModel model = four_area_model();
  InitialGuess bad;
  bad.voltage = vec({1.0, -1.0, 1.0, 1.0});
  EXPECT_THROW(solve_regulator(model, load_before(), load_before(), bad), std::invalid_argument);
  EXPECT_THROW(solve_regulator(model, VectorXd::Ones(3), load_before()), std::invalid_argument);
}

TEST(Security, OpenInterval) {
  EXPECT_TRUE(check_security(vec({0.0, 1.5, -1.5})));
  EXPECT_FALSE(check_security(vec({std::numbers::pi / 2.0})));
  EXPECT_FALSE(check_security(vec({-2.0})));
  EXPECT_TRUE(check_security(VectorXd()));
}

TEST(SchurTest, AgreesWithHessianOnRandomEquilibria) {
  std::mt19937_64 rng(99);
  int agree = 0, total = 0, tries = 0;
  while (total < 100 && tries++ < 5000) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const FluxDecayModel model = random_model(rng, n, static_cast<int>(rng() % 2));
    const double scale = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
    const VectorXd u = random_injection(rng, n, scale);
    const RegulatorSolution sol = solve_regulator(model, u, VectorXd::Zero(n));
    if (!sol.usable()) continue;
    const auto& eq = sol.equilibrium;
    const auto rep = check_assumption3(eq.eta_bar, eq.voltage_bar, model);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(hessian_w2(eq.eta_bar, eq.voltage_bar, model));
    const bool hessian_pd = eig.eigenvalues().minCoeff() > 0.0;
    agree += (rep.pass == hessian_pd);
    ++total;
  }
  EXPECT_EQ(total, 100);
  EXPECT_EQ(agree, total);
}

TEST(SchurTest, AgreesWithHessianOnRandomSecurePoints) {
  // The Schur test is algebraic, so it must match the Hessian at any secure point.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-1.55, 1.55), volt(0.2, 1.2);
  int agree = 0, fails = 0;
  const int total = 400;
  for (int k = 0; k < total; ++k) {
    const FluxDecayModel model = random_model(rng, 2 + k % 4, k % 2);
    VectorXd delta(model.num_nodes()), v(model.num_nodes());
    for (int i = 0; i < model.num_nodes(); ++i) {
      delta(i) = 0.6 * ang(rng);
      v(i) = volt(rng);
    }
    VectorXd eta = model.graph().incidence().transpose() * delta;
    eta = eta.cwiseMax(-1.55).cwiseMin(1.55);
    const auto rep = check_assumption3(eta, v, model);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(hessian_w2(eta, v, model));
    agree += (rep.pass == (eig.eigenvalues().minCoeff() > 0.0));
    fails += !rep.pass;
  }
  EXPECT_EQ(agree, total);
  EXPECT_GT(fails, 0);
  EXPECT_LT(fails, total);
}

TEST(SchurTest, FailsCloseToTheStabilityLimit) {
  const GridGraph g(2, {{0, 1, 10.0}}, vec({-11.0, -11.0}));
  AreaParams p;
  p.inertia = p.damping = p.t_do = p.q = VectorXd::Ones(2);
  p.e_f = VectorXd::Constant(2, 4.0);
  p.x_d = VectorXd::Constant(2, 1.5);
  p.x_dp = VectorXd::Constant(2, 0.3);
  const FluxDecayModel model(g, p);
  const VectorXd v = VectorXd::Ones(2);
  EXPECT_TRUE(check_assumption3(vec({0.1}), v, model).pass);
  const auto near_limit = check_assumption3(vec({1.55}), v, model);
  EXPECT_FALSE(near_limit.pass);
  EXPECT_LT(near_limit.min_eig, 0.0);
  EXPECT_THROW(check_assumption3(vec({1.6}), v, model), std::invalid_argument);
}

TEST(DispatchFeasibility, FourAreaLoadsPass) {
  const FluxDecayModel model = four_area_model();
  const CostModel c = CostModel::from_params(model.params());
  EXPECT_TRUE(check_assumption4(model, c, load_before()).pass);
  EXPECT_TRUE(check_assumption4(model, c, load_after()).pass);
}

TEST(DispatchFeasibility, DemandAlongCompensableDirectionNeedsNoFlow) {
  const FluxDecayModel model = four_area_model();
  const CostModel c = CostModel::from_params(model.params());
  const auto rep = check_assumption4(model, c, 0.7 * c.q_inverse());
  ASSERT_TRUE(rep.pass);
  EXPECT_LT(rep.solution.equilibrium.eta_bar.lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(DispatchFeasibility, HugeSkewOnTreeFails) {
  const GridGraph g(3, {{0, 1, 5.0}, {1, 2, 5.0}}, vec({-10.0, -15.0, -10.0}));
  AreaParams p;
  p.inertia = p.damping = p.t_do = VectorXd::Ones(3);
  p.q = vec({1.0, 1.0, 0.05});  // node 3 is cheap, so it should supply node 1
  p.e_f = VectorXd::Constant(3, 4.0);
  p.x_d = VectorXd::Constant(3, 1.5);
  p.x_dp = VectorXd::Constant(3, 0.3);
  const FluxDecayModel model(g, p);
  const CostModel c = CostModel::from_params(p);
  EXPECT_FALSE(check_assumption4(model, c, vec({30.0, 0.0, 0.0})).pass);
}
