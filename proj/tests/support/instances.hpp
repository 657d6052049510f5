#pragma once

// Random problem instances shared by the unit tests and the acceptance suite.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "voltctl/controller.hpp"
#include "voltctl/feeders.hpp"
#include "voltctl/harness.hpp"
#include "voltctl/rng.hpp"
#include "voltctl/saddle.hpp"

namespace voltctl::testing {

inline constexpr double kVLow = 0.95 * 0.95;
inline constexpr double kVHigh = 1.05 * 1.05;

/// Linearized instance with a known strictly feasible point q0: v_par is
/// chosen so that X q0 + v_par lands strictly inside the band, with most
/// targets just above v_low so the lower voltage limits tend to bind. Linear
/// cost terms up to 0.6 push some buses against their capacity.
struct FeasibleInstance {
  RadialNetwork net;
  std::vector<QuadraticCost> costs;
  CapacityLimits limits;
  double d = 1.0;
  Eigen::VectorXd q0;
  Eigen::VectorXd v_par;
  SensitivityMatrices mats;

  VoltageProblem voltage_problem() const {
    return {CostModel(costs, d, mats.X), mats.X, v_par, limits};
  }
};

inline FeasibleInstance make_feasible_instance(int n, std::uint64_t seed, double d = 1.0) {
  RandomTreeOptions tree;
  tree.x_min = 0.01;
  tree.x_max = 0.05;
  RadialNetwork net = random_radial_network(n, seed, tree);
  Rng rng(seed, 100);
  std::vector<QuadraticCost> costs(n);
  for (auto& c : costs) c = {rng.uniform(0.5, 2.0), rng.uniform(-0.6, 0.6)};
  CapacityLimits limits = CapacityLimits::uniform(n, 0.2, kVLow, kVHigh);
  SensitivityMatrices mats = build_sensitivities(net);
  Eigen::VectorXd q0(n);
  Eigen::VectorXd target(n);
  for (int i = 0; i < n; ++i) {
    q0(i) = rng.uniform(-0.05, 0.15);
    target(i) = rng.uniform() < 0.8 ? rng.uniform(kVLow + 5e-4, kVLow + 0.01)
                                    : rng.uniform(kVLow + 0.01, kVHigh - 0.01);
  }
  Eigen::VectorXd v_par = target - mats.X * q0;
  return {std::move(net), std::move(costs), std::move(limits), d, q0, v_par, std::move(mats)};
}

/// The 20 instances of the convergence suite: n cycles through 5, 10, 20.
inline std::vector<FeasibleInstance> convergence_suite() {
  std::vector<FeasibleInstance> out;
  const int sizes[] = {5, 10, 20};
  for (int k = 0; k < 20; ++k) out.push_back(make_feasible_instance(sizes[k % 3], 7000 + k));
  return out;
}

/// Random controller state on a feasible instance, with the voltages it
/// produces and random step sizes.
struct Snapshot {
  FeasibleInstance inst;
  std::vector<Agent> agents;
  DenseState state;
  Eigen::VectorXd v;
  ControllerParams params;
};

inline Snapshot random_snapshot(int n, std::uint64_t seed) {
  Snapshot s{make_feasible_instance(n, seed), {}, {}, {}, {}};
  std::vector<BusId> buses(n);
  for (int i = 0; i < n; ++i) buses[i] = i + 1;
  s.agents = make_agents(buses, s.inst.mats.Y, s.inst.costs, s.inst.limits);
  Rng rng(seed, 55);
  for (Agent& a : s.agents) {
    AgentState st;
    st.q_hat = rng.uniform(-0.4, 0.4);
    st.xi = rng.uniform(-1.0, 1.0);
    st.lam_up = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 2.0);
    st.lam_low = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 2.0);
    st.q = std::clamp(st.q_hat, a.setup().q_low, a.setup().q_high);
    a.commit(st);
  }
  s.state = collect_state(s.agents);
  s.v = s.inst.mats.X * s.state.q + s.inst.v_par;
  s.params = {rng.uniform(1e-4, 1e-2), rng.uniform(0.1, 1.0), rng.uniform(0.1, 10.0),
              rng.uniform(0.5, 2.0), s.inst.d};
  return s;
}

inline double max_diff(const DenseState& a, const DenseState& b) {
  return std::max({(a.q_hat - b.q_hat).cwiseAbs().maxCoeff(), (a.xi - b.xi).cwiseAbs().maxCoeff(),
                   (a.lam_up - b.lam_up).cwiseAbs().maxCoeff(),
                   (a.lam_low - b.lam_low).cwiseAbs().maxCoeff(), (a.q - b.q).cwiseAbs().maxCoeff()});
}

}  // namespace voltctl::testing
