#include "voltctl/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support/instances.hpp"
#include "voltctl/profiles.hpp"

namespace voltctl {
namespace {

TEST(RngTest, PhiloxKnownAnswers) {
  // Reference vectors shipped with Random123 (kat_vectors, philox4x32 10 rounds).
  const auto zero = philox_block(0, 0, 0);
  EXPECT_EQ(zero, (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  const auto ones = philox_block(~0ULL, ~0ULL, ~0ULL);
  EXPECT_EQ(ones, (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(RngTest, StreamsAreReproducibleAndDistinct) {
  Rng a(42, kStreamNoise), b(42, kStreamNoise), c(42, kStreamCommDelay);
  int same = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::uint64_t x = a.next();
    EXPECT_EQ(x, b.next());
    same += x == c.next();
  }
  EXPECT_EQ(same, 0);
}

TEST(RngTest, VariatesHaveExpectedMoments) {
  Rng rng(7, 9);
  double mean_u = 0.0, mean_n = 0.0, var_n = 0.0;
  std::map<int, int> counts;
  const int N = 200000;
  for (int k = 0; k < N; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean_u += u / N;
    const double z = rng.normal();
    mean_n += z / N;
    var_n += z * z / N;
    ++counts[rng.uniform_int(0, 10)];
  }
  EXPECT_NEAR(mean_u, 0.5, 0.005);
  EXPECT_NEAR(mean_n, 0.0, 0.01);
  EXPECT_NEAR(var_n, 1.0, 0.02);
  EXPECT_EQ(counts.size(), 11u);
  for (const auto& [value, count] : counts) EXPECT_NEAR(count, N / 11.0, 0.05 * N / 11.0) << value;
}

struct LinearSetup {
  testing::FeasibleInstance inst = testing::make_feasible_instance(8, 31);
  ControlProblem problem{inst.net, inst.costs, inst.limits, inst.d};
  ControllerParams params;

  LinearSetup() {
    const CostModel cost(inst.costs, inst.d, inst.mats.X);
    params = suggest_params(inst.mats.X, inst.mats.Y, cost.l(), 1.0, inst.d);
  }

  Scenario scenario(long horizon) const {
    Scenario s;
    s.plant = PlantKind::linearized;
    s.horizon = horizon;
    s.v_par = inst.v_par;
    s.seed = 5;
    return s;
  }
};

bool same_trace(const SimulationTrace& a, const SimulationTrace& b) {
  if (a.ticks.size() != b.ticks.size()) return false;
  for (std::size_t k = 0; k < a.ticks.size(); ++k) {
    const TickRecord& x = a.ticks[k];
    const TickRecord& y = b.ticks[k];
    if (x.v != y.v || x.q != y.q || x.q_hat != y.q_hat || x.xi != y.xi || x.lam_up != y.lam_up ||
        x.lam_low != y.lam_low || x.v_meas != y.v_meas) {
      return false;
    }
  }
  return true;
}

TEST(RunTest, ZeroHorizonGivesEmptyTrace) {
  const LinearSetup s;
  const SimulationTrace trace = run(s.scenario(0), s.problem, s.params);
  EXPECT_TRUE(trace.ticks.empty());
  EXPECT_FALSE(trace.aborted);
}

TEST(RunTest, IdenticalSeedsGiveIdenticalTraces) {
  const LinearSetup s;
  Scenario sc = s.scenario(300);
  sc.noise_sigma = 0.01;
  sc.meas_delay = 2;
  sc.comm_delay_max = 4;
  sc.model_error_pct = 0.1;
  EXPECT_TRUE(same_trace(run(sc, s.problem, s.params), run(sc, s.problem, s.params)));
  Scenario other = sc;
  other.seed = 6;
  EXPECT_FALSE(same_trace(run(sc, s.problem, s.params), run(other, s.problem, s.params)));
}

TEST(RunTest, RejectsMismatchedLossWeightAndBadScenario) {
  const LinearSetup s;
  ControllerParams p = s.params;
  p.d = 0.0;
  EXPECT_THROW(run(s.scenario(10), s.problem, p), std::invalid_argument);
  Scenario bad = s.scenario(10);
  bad.horizon = -1;
  EXPECT_THROW(run(bad, s.problem, s.params), std::invalid_argument);
  bad = s.scenario(10);
  bad.controllable = {0};
  EXPECT_THROW(run(bad, s.problem, s.params), std::exception);
}

TEST(RunTest, CommDelayLagsWithinBound) {
  const LinearSetup s;
  Scenario sc = s.scenario(200);
  sc.comm_delay_max = 10;
  sc.record_messages = true;
  const SimulationTrace trace = run(sc, s.problem, s.params);
  std::map<long, int> lags;
  for (const TickRecord& rec : trace.ticks) {
    for (const DeliveredMessage& m : rec.messages) {
      const long lag = rec.tick - m.issued;
      ASSERT_GE(m.issued, 0);
      ASSERT_GE(lag, 0);
      ASSERT_LE(lag, 10);
      if (m.sender == m.receiver) EXPECT_EQ(lag, 0);
      if (rec.tick >= 10) ++lags[lag];
    }
  }
  EXPECT_EQ(lags.size(), 11u);
}

TEST(RunTest, NoDelayDeliversFreshMessages) {
  const LinearSetup s;
  Scenario sc = s.scenario(50);
  sc.record_messages = true;
  const SimulationTrace trace = run(sc, s.problem, s.params);
  for (const TickRecord& rec : trace.ticks) {
    ASSERT_FALSE(rec.messages.empty());
    for (const DeliveredMessage& m : rec.messages) EXPECT_EQ(m.issued, rec.tick);
  }
}

TEST(RunTest, BaselineKeepsZeroInjection) {
  const LinearSetup s;
  Scenario sc = s.scenario(20);
  sc.control_enabled = false;
  const SimulationTrace trace = run(sc, s.problem, s.params);
  ASSERT_EQ(trace.ticks.size(), 20u);
  for (const TickRecord& rec : trace.ticks) {
    EXPECT_EQ(rec.q.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT((rec.v - s.inst.v_par).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(RunTest, CapacityHeldAndQhatBoundedUnderNoise) {
  const LinearSetup s;
  Scenario sc = s.scenario(5000);
  sc.noise_sigma = 0.03;
  sc.meas_delay = 5;
  const TraceSummary sum = summarize(run(sc, s.problem, s.params), s.inst.limits);
  EXPECT_EQ(sum.capacity_violations, 0);
  EXPECT_LT(sum.max_qhat_ratio, 10.0);
}

TEST(RunTest, ViolationMetricMatchesDefinition) {
  const LinearSetup s;
  Scenario sc = s.scenario(30);
  const SimulationTrace trace = run(sc, s.problem, s.params);
  for (const TickRecord& rec : trace.ticks) {
    for (Eigen::Index i = 0; i < rec.v.size(); ++i) {
      const double expected =
          std::max({s.inst.limits.v_low(i) - rec.v(i), rec.v(i) - s.inst.limits.v_high(i), 0.0});
      EXPECT_EQ(rec.violation(i), expected);
    }
  }
}

TEST(SummarizeTest, HandBuiltTrace) {
  SimulationTrace trace;
  trace.controllable = {1};
  const CapacityLimits limits = CapacityLimits::uniform(1, 0.2, 0.9, 1.1);
  const double viol[] = {0.1, 0.0, 0.05, 0.0, 0.0};
  const double q[] = {0.0, 0.1, 0.3, 0.1, 0.1};
  for (long t = 0; t < 5; ++t) {
    TickRecord rec;
    rec.tick = t;
    rec.q = Eigen::VectorXd::Constant(1, q[t]);
    rec.q_hat = Eigen::VectorXd::Constant(1, 2 * q[t]);
    rec.violation = Eigen::VectorXd::Constant(1, viol[t]);
    rec.cost = t;
    trace.ticks.push_back(rec);
  }
  const TraceSummary s = summarize(trace, limits);
  EXPECT_EQ(s.ticks, 5);
  EXPECT_DOUBLE_EQ(s.max_violation, 0.1);
  EXPECT_DOUBLE_EQ(s.mean_violation, 0.03);
  EXPECT_EQ(s.convergence_tick, 3);
  EXPECT_EQ(s.capacity_violations, 1);
  EXPECT_DOUBLE_EQ(s.max_qhat_ratio, 3.0);
  EXPECT_EQ(s.final_cost, 4.0);
}

TEST(ModelErrorTest, BranchModeRatiosSparsityDefiniteness) {
  for (int seed = 0; seed < 10; ++seed) {
    const auto mats = build_sensitivities(random_radial_network(12, 40 + seed));
    Rng rng(seed, kStreamModelError);
    const Eigen::SparseMatrix<double> P = perturb_model(mats.Y, 0.2, rng);
    const Eigen::MatrixXd Yd = mats.Y, Pd = P;
    EXPECT_EQ(P.nonZeros(), mats.Y.nonZeros());
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 12; ++j) {
        if (Yd(i, j) == 0.0) {
          EXPECT_EQ(Pd(i, j), 0.0);
          continue;
        }
        const double ratio = Pd(i, j) / Yd(i, j);
        EXPECT_GE(ratio, 0.8 - 1e-12);
        EXPECT_LE(ratio, 1.2 + 1e-12);
      }
    }
    EXPECT_LT((Pd - Pd.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Pd).eigenvalues()(0), 0.0);
  }
}

TEST(ModelErrorTest, EntryModeRatiosAndZeroPercent) {
  const auto mats = build_sensitivities(random_radial_network(10, 3));
  Rng rng(1, kStreamModelError);
  const Eigen::MatrixXd Yd = mats.Y;
  const Eigen::MatrixXd Pd = perturb_model(mats.Y, 0.2, rng, ModelErrorMode::entry);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (Yd(i, j) == 0.0) {
        EXPECT_EQ(Pd(i, j), 0.0);
      } else {
        EXPECT_GE(Pd(i, j) / Yd(i, j), 0.8);
        EXPECT_LE(Pd(i, j) / Yd(i, j), 1.2);
      }
    }
  }
  Rng again(1, kStreamModelError);
  const Eigen::MatrixXd same = perturb_model(mats.Y, 0.0, again);
  EXPECT_EQ(same, Yd);
  Rng r3(1, 1);
  EXPECT_THROW(perturb_model(-mats.Y, 0.2, r3), std::invalid_argument);
}

TEST(ProfilesTest, DailyShapeAndExtremes) {
  const RadialNetwork net = sce_like_feeder();
  const auto mats = build_sensitivities(net);
  const SynthProfiles prof = synth_profiles(ProfileKind::daily, net, 11);
  ASSERT_EQ(prof.series.size(), kDailyTicks);
  ASSERT_EQ(static_cast<long>(prof.pv_shape.size()), kDailyTicks);
  for (long t = 0; t < kDailyTicks; ++t) {
    const double h = hour_of_tick(t);
    if (h <= 8.0 || h >= 19.0) EXPECT_EQ(prof.pv_shape[t], 0.0) << h;
    if (h > 9.0 && h < 18.0) EXPECT_GT(prof.pv_shape[t], 0.0) << h;
    EXPECT_GT(prof.load_shape[t], 0.0);
  }
  double vmin = 1e9, vmax = -1e9;
  for (long t = 0; t < kDailyTicks; t += 20) {
    const Eigen::VectorXd v = uncontrolled_voltage(net, mats, prof.series.at(t), PlantKind::nonlinear);
    vmin = std::min(vmin, v.minCoeff());
    vmax = std::max(vmax, v.maxCoeff());
  }
  EXPECT_LT(vmin, testing::kVLow);
  EXPECT_GT(vmax, testing::kVHigh);
  EXPECT_NEAR(hour_of_tick(7200), 12.0, 1e-12);
}

TEST(ProfilesTest, StaticHeavyBelowBand) {
  const RadialNetwork net = sce_like_feeder();
  const auto mats = build_sensitivities(net);
  const SynthProfiles prof = synth_profiles(ProfileKind::static_heavy, net, 11);
  ASSERT_EQ(prof.series.size(), 1);
  const Eigen::VectorXd v = uncontrolled_voltage(net, mats, prof.series.at(0), PlantKind::nonlinear);
  EXPECT_NEAR(v.minCoeff(), testing::kVLow - 0.01, 1e-6);
  // Repeats past the end.
  EXPECT_EQ(prof.series.at(500).p, prof.series.at(0).p);
}

TEST(ProfilesTest, UnreachableTargetThrows) {
  const RadialNetwork net = sce_like_feeder();
  ProfileOptions opts;
  opts.max_scale = 1e-6;
  EXPECT_THROW(synth_profiles(ProfileKind::static_heavy, net, 1, opts), ProfileError);
}

}  // namespace
}  // namespace voltctl
