#include "voltctl/powerflow.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "voltctl/feeders.hpp"
#include "voltctl/rng.hpp"

namespace voltctl {
namespace {

RadialNetwork unit_chain(int n) {
  std::vector<Line> lines;
  for (int i = 1; i <= n; ++i) lines.push_back({i - 1, i, 1.0, 1.0});
  return RadialNetwork(n, 1.0, lines);
}

InjectionProfile random_load(int n, double scale, std::uint64_t seed) {
  Rng rng(seed, 77);
  InjectionProfile inj{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    inj.p(i) = -scale * rng.uniform(0.5, 1.5);
    inj.q(i) = scale * rng.uniform(-1.0, 0.5);
  }
  return inj;
}

TEST(LinVoltageTest, AffineMap) {
  const RadialNetwork net = random_radial_network(6, 2);
  LinearPlant plant{build_sensitivities(net), Eigen::VectorXd::LinSpaced(6, 0.9, 1.0)};
  EXPECT_EQ(lin_voltage(plant, Eigen::VectorXd::Zero(6)), plant.v_par);
  const Eigen::VectorXd q1 = Eigen::VectorXd::LinSpaced(6, -0.1, 0.2);
  const Eigen::VectorXd q2 = Eigen::VectorXd::LinSpaced(6, 0.3, -0.05);
  const Eigen::VectorXd diff = lin_voltage(plant, q1 + q2) - lin_voltage(plant, q2);
  EXPECT_LT((diff - plant.mats.X * q1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(lin_voltage(plant, Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST(LinVoltageTest, SingleBus) {
  const RadialNetwork net(1, 1.0, {{0, 1, 0.0, 0.5}});
  LinearPlant plant{build_sensitivities(net), Eigen::VectorXd::Constant(1, 0.90)};
  EXPECT_NEAR(lin_voltage(plant, Eigen::VectorXd::Constant(1, 0.0025))(0), 0.9025, 1e-15);
}

TEST(MakeVparTest, NoLoadLoadAndLinearity) {
  const RadialNetwork net = unit_chain(4);
  const auto mats = build_sensitivities(net);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  EXPECT_EQ(make_vpar(net, mats, zero, zero), Eigen::VectorXd::Ones(4));
  const Eigen::VectorXd p = -0.01 * Eigen::VectorXd::LinSpaced(4, 1, 4);
  const Eigen::VectorXd v = make_vpar(net, mats, p, zero);
  EXPECT_LT(v.maxCoeff(), 1.0);
  const Eigen::VectorXd twice = make_vpar(net, mats, 2 * p, zero) - Eigen::VectorXd::Ones(4);
  EXPECT_LT((twice - 2 * (v - Eigen::VectorXd::Ones(4))).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(make_vpar(net, mats, Eigen::VectorXd::Zero(3), zero), std::invalid_argument);
}

TEST(NonlinearSolveTest, NoLoadFixedPoint) {
  const RadialNetwork net = random_radial_network(7, 4);
  const InjectionProfile inj{Eigen::VectorXd::Zero(7), Eigen::VectorXd::Zero(7)};
  const FlowSolution sol = nonlinear_solve(net, inj);
  EXPECT_EQ(sol.v, Eigen::VectorXd::Constant(7, net.v0()));
  EXPECT_EQ(sol.ell.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.p_flow.cwiseAbs().maxCoeff(), 0.0);
}

TEST(NonlinearSolveTest, ResidualsBelowToleranceOnRandomNetworks) {
  for (int seed = 0; seed < 20; ++seed) {
    const int n = 3 + seed;
    const RadialNetwork net = random_radial_network(n, 100 + seed, {0.01, 0.1, 0.5, 2.0, 1.0});
    const InjectionProfile inj = random_load(n, 0.02, seed);
    const FlowSolution sol = nonlinear_solve(net, inj);
    EXPECT_LT(flow_residual(net, inj, sol), 1e-10) << "seed " << seed;
    EXPECT_GE(sol.ell.minCoeff(), 0.0);
    EXPECT_GT(sol.v.minCoeff(), 0.0);
    // Sending-end current relation, checked directly.
    for (std::size_t k = 0; k < net.lines().size(); ++k) {
      const Line& l = net.lines()[k];
      const double v_from = l.from == 0 ? net.v0() : sol.v(l.from - 1);
      EXPECT_NEAR(sol.ell(k) * v_from, sol.p_flow(k) * sol.p_flow(k) + sol.q_flow(k) * sol.q_flow(k),
                  1e-10);
    }
  }
}

TEST(NonlinearSolveTest, LosslessSweepReproducesLinearModel) {
  for (int seed = 0; seed < 10; ++seed) {
    const int n = 5 + 2 * seed;
    const RadialNetwork net = random_radial_network(n, 300 + seed, {0.01, 0.1, 0.5, 2.0, 1.0});
    const auto mats = build_sensitivities(net);
    const InjectionProfile inj = random_load(n, 0.05, seed);
    SweepOptions lossless;
    lossless.lossless = true;
    const FlowSolution sol = nonlinear_solve(net, inj, lossless);
    const Eigen::VectorXd lin = make_vpar(net, mats, inj.p, inj.q);
    EXPECT_LT((sol.v - lin).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NonlinearSolveTest, LinearizationErrorIsQuadratic) {
  const RadialNetwork net = random_radial_network(10, 9, {0.01, 0.1, 0.5, 2.0, 1.0});
  const auto mats = build_sensitivities(net);
  const InjectionProfile base = random_load(10, 0.1, 3);
  std::vector<double> log_s, log_e;
  for (double s : {0.25, 0.125, 0.0625, 0.03125}) {
    const InjectionProfile inj{s * base.p, s * base.q};
    const Eigen::VectorXd nl = nonlinear_solve(net, inj).v;
    const Eigen::VectorXd lin = make_vpar(net, mats, inj.p, inj.q);
    log_s.push_back(std::log(s));
    log_e.push_back(std::log((nl - lin).cwiseAbs().maxCoeff()));
  }
  for (std::size_t k = 1; k < log_s.size(); ++k) {
    const double slope = (log_e[k] - log_e[k - 1]) / (log_s[k] - log_s[k - 1]);
    EXPECT_NEAR(slope, 2.0, 0.2);
  }
}

TEST(NonlinearSolveTest, UnitChainAtTwentyPercentLoading) {
  // Uniform load at 0.9 power factor scaled so the linearized drop at the
  // chain end is 20% of v0.
  const RadialNetwork net = unit_chain(4);
  const double p = 0.2 / (2.0 * 10.0 * 1.5);
  const InjectionProfile inj{Eigen::VectorXd::Constant(4, -p), Eigen::VectorXd::Constant(4, -0.5 * p)};
  const Eigen::VectorXd nl = nonlinear_solve(net, inj).v;
  const Eigen::VectorXd lin = make_vpar(net, build_sensitivities(net), inj.p, inj.q);
  EXPECT_LT((nl - lin).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(NonlinearSolveTest, DeterministicAndCollapseDiagnosed) {
  const RadialNetwork net = random_radial_network(8, 21, {0.01, 0.1, 0.5, 2.0, 1.0});
  const InjectionProfile inj = random_load(8, 0.05, 1);
  const FlowSolution a = nonlinear_solve(net, inj);
  const FlowSolution b = nonlinear_solve(net, inj);
  EXPECT_EQ(a.v, b.v);
  EXPECT_EQ(a.ell, b.ell);
  const InjectionProfile heavy{100.0 * inj.p, 100.0 * inj.q};
  EXPECT_THROW(nonlinear_solve(net, heavy), PowerFlowError);
  SweepOptions few;
  few.max_iter = 1;
  try {
    nonlinear_solve(net, inj, few);
    FAIL() << "one iteration should not converge";
  } catch (const PowerFlowError& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_GT(e.residual(), 1e-10);
  }
}

}  // namespace
}  // namespace voltctl
