#include "voltctl/harness.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "voltctl/saddle.hpp"

namespace voltctl {

const char* to_string(PlantKind kind) {
  return kind == PlantKind::linearized ? "linearized" : "nonlinear";
}

const InjectionProfile& ProfileSeries::at(long tick) const {
  if (rows.empty()) throw std::logic_error("profile series is empty");
  return rows[static_cast<std::size_t>(std::clamp(tick, 0L, size() - 1))];
}

ProfileSeries ProfileSeries::constant(InjectionProfile row) {
  ProfileSeries s;
  s.rows.push_back(std::move(row));
  return s;
}

void Scenario::validate(int n) const {
  if (horizon < 0) throw std::invalid_argument("scenario.horizon must be >= 0");
  if (!(tick_seconds > 0.0)) throw std::invalid_argument("scenario.tick_seconds must be > 0");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("scenario.noise_sigma must be >= 0");
  if (meas_delay < 0) throw std::invalid_argument("scenario.meas_delay must be >= 0");
  if (comm_delay_max < 0) throw std::invalid_argument("scenario.comm_delay_max must be >= 0");
  if (!(model_error_pct >= 0.0 && model_error_pct < 1.0)) {
    throw std::invalid_argument("scenario.model_error_pct must lie in [0, 1)");
  }
  if (v_par) {
    if (plant != PlantKind::linearized) {
      throw std::invalid_argument("scenario.v_par applies only to the linearized plant");
    }
    if (v_par->size() != n) throw std::invalid_argument("scenario.v_par has the wrong length");
  } else {
    if (profiles.rows.empty()) throw std::invalid_argument("scenario needs profiles or v_par");
    for (const auto& row : profiles.rows) {
      if (row.p.size() != n || row.q.size() != n) {
        throw std::invalid_argument("scenario profile row has the wrong number of buses");
      }
    }
  }
  for (BusId b : controllable) {
    if (b < 1 || b > n) {
      throw std::invalid_argument("scenario.controllable bus " + std::to_string(b) +
                                  " is outside 1.." + std::to_string(n));
    }
  }
}

ControlProblem::ControlProblem(const RadialNetwork& network, std::vector<QuadraticCost> cost_terms,
                               CapacityLimits bus_limits, double loss_weight)
    : net(&network),
      mats(build_sensitivities(network)),
      costs(std::move(cost_terms)),
      limits(std::move(bus_limits)),
      d(loss_weight) {
  const int n = network.size();
  if (static_cast<int>(costs.size()) != n || limits.size() != n) {
    throw std::invalid_argument("costs and limits must cover every bus 1..n");
  }
  limits.validate();
}

Eigen::VectorXd scenario_vpar(const Scenario& scenario, const ControlProblem& problem, long tick) {
  if (scenario.v_par) return *scenario.v_par;
  const InjectionProfile& row = scenario.profiles.at(tick);
  return make_vpar(*problem.net, problem.mats, row.p, row.q);
}

VoltageProblem controllable_problem(const ControlProblem& problem, const std::vector<BusId>& buses,
                                    const Eigen::VectorXd& v_par) {
  const ControllableSet cset = reduce_controllable(*problem.net, problem.mats, buses);
  const auto m = static_cast<int>(cset.buses.size());
  std::vector<int> positions(m);
  std::vector<QuadraticCost> costs(m);
  Eigen::VectorXd v_par_c(m);
  for (int k = 0; k < m; ++k) {
    positions[k] = cset.buses[k] - 1;
    costs[k] = problem.costs[positions[k]];
    v_par_c(k) = v_par(positions[k]);
  }
  return {CostModel(costs, problem.d, cset.X_C), cset.X_C, v_par_c, problem.limits.subset(positions)};
}

const char* to_string(ModelErrorMode mode) {
  return mode == ModelErrorMode::branch ? "branch" : "entry";
}

Eigen::SparseMatrix<double> perturb_model(const Eigen::SparseMatrix<double>& Y, double pct, Rng& rng,
                                          ModelErrorMode mode) {
  if (!(pct >= 0.0 && pct < 1.0)) throw std::invalid_argument("model error must lie in [0, 1)");
  Eigen::SparseMatrix<double> out = Y;
  out.makeCompressed();
  if (pct == 0.0) return out;
  if (mode == ModelErrorMode::entry) {
    for (int k = 0; k < out.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(out, k); it; ++it) {
        it.valueRef() *= rng.uniform(1.0 - pct, 1.0 + pct);
      }
    }
    return out;
  }

  const Eigen::Index n = Y.rows();
  const double scale = Y.coeffs().cwiseAbs().maxCoeff();
  Eigen::VectorXd ground = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < Y.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(Y, k); it; ++it) {
      ground(it.row()) += it.value();
      if (it.row() != it.col() && it.value() > 1e-12 * scale) {
        throw std::invalid_argument("branch model error needs nonpositive off-diagonal entries");
      }
    }
  }
  if (ground.minCoeff() < -1e-9 * scale) {
    throw std::invalid_argument("branch model error needs nonnegative row sums");
  }
  // Columns are visited in order, so each unordered pair is drawn once at its
  // upper-triangle entry and mirrored.
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < out.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(out, k); it; ++it) {
      if (it.row() < it.col()) {
        factor(it.row(), it.col()) = factor(it.col(), it.row()) = rng.uniform(1.0 - pct, 1.0 + pct);
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    diag(i) = std::max(ground(i), 0.0) * rng.uniform(1.0 - pct, 1.0 + pct);
  }
  for (int k = 0; k < out.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(out, k); it; ++it) {
      if (it.row() == it.col()) continue;
      it.valueRef() *= factor(it.row(), it.col());
      diag(it.row()) -= it.value();
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) out.coeffRef(i, i) = diag(i);
  return out;
}

void DelayedRouter::push(std::vector<AgentMessage> messages) {
  history.push_back(std::move(messages));
  while (static_cast<long>(history.size()) > max_delay + 1) {
    history.pop_front();
    ++first;
  }
}

std::vector<std::vector<AgentMessage>> DelayedRouter::deliver(const std::vector<Agent>& agents,
                                                              const std::vector<int>& position,
                                                              long tick, Rng& rng) const {
  std::vector<std::vector<AgentMessage>> inboxes(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& row = agents[i].setup().y_row;
    inboxes[i].reserve(row.size());
    for (const auto& [sender, weight] : row) {
      long lag = 0;
      if (sender != agents[i].bus() && max_delay > 0) lag = rng.uniform_int(0, max_delay);
      const long newest = first + static_cast<long>(history.size()) - 1;
      const long issued = std::clamp(tick - lag, first, newest);
      inboxes[i].push_back(history[static_cast<std::size_t>(issued - first)][position[sender]]);
    }
  }
  return inboxes;
}

namespace {

Eigen::VectorXd violation_of(const Eigen::VectorXd& v, const CapacityLimits& limits) {
  return (limits.v_low - v).cwiseMax(v - limits.v_high).cwiseMax(0.0);
}

}  // namespace

SimulationTrace run(const Scenario& scenario, const ControlProblem& problem,
                    const ControllerParams& params, const TickObserver& observer) {
  const RadialNetwork& net = *problem.net;
  const int n = net.size();
  scenario.validate(n);
  if (scenario.control_enabled) {
    params.validate();
    if (params.d != problem.d) {
      throw std::invalid_argument("controller d differs from the loss weight in the cost");
    }
  }

  std::vector<BusId> buses = scenario.controllable;
  if (buses.empty()) {
    buses.resize(n);
    for (int i = 0; i < n; ++i) buses[i] = i + 1;
  }
  const ControllableSet cset = reduce_controllable(net, problem.mats, buses);
  buses = cset.buses;
  const auto m = static_cast<int>(buses.size());
  std::vector<int> positions(m);
  std::vector<QuadraticCost> costs_c(m);
  for (int k = 0; k < m; ++k) {
    positions[k] = buses[k] - 1;
    costs_c[k] = problem.costs[positions[k]];
  }
  const CapacityLimits limits_c = problem.limits.subset(positions);
  const CostModel cost(costs_c, problem.d, cset.X_C);
  Eigen::MatrixXd X_cols(n, m);  // columns of X for the controllable buses
  for (int k = 0; k < m; ++k) X_cols.col(k) = problem.mats.X.col(positions[k]);

  Rng noise_rng(scenario.seed, kStreamNoise);
  Rng delay_rng(scenario.seed, kStreamCommDelay);
  Rng model_rng(scenario.seed, kStreamModelError);

  const Eigen::SparseMatrix<double> Y_agents =
      perturb_model(cset.Y_C, scenario.model_error_pct, model_rng, scenario.model_error_mode);
  std::vector<Agent> agents = make_agents(buses, Y_agents, costs_c, limits_c);
  std::vector<int> position(n + 1, -1);
  for (int k = 0; k < m; ++k) position[buses[k]] = k;

  DelayedRouter router{scenario.comm_delay_max, 0, {}};
  if (scenario.control_enabled) {
    std::vector<AgentMessage> first;
    for (const Agent& a : agents) first.push_back(a.message(params, 0));
    router.push(std::move(first));
  }

  SimulationTrace trace;
  trace.controllable = buses;
  if (scenario.keep_last == 0) trace.ticks.reserve(static_cast<std::size_t>(scenario.horizon));
  std::deque<Eigen::VectorXd> v_hist;  // the last meas_delay + 1 voltages

  for (long t = 0; t < scenario.horizon; ++t) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
    const DenseState state = scenario.control_enabled ? collect_state(agents)
                                                      : DenseState{zero, zero, zero, zero, zero};

    Eigen::VectorXd v;
    if (scenario.plant == PlantKind::linearized) {
      v = X_cols * state.q + scenario_vpar(scenario, problem, t);
    } else {
      InjectionProfile inj = scenario.profiles.at(t);
      for (int k = 0; k < m; ++k) inj.q(positions[k]) += state.q(k);
      try {
        v = nonlinear_solve(net, inj).v;
      } catch (const PowerFlowError& e) {
        trace.aborted = true;
        trace.abort_reason = "tick " + std::to_string(t) + ": " + e.what();
        return trace;
      }
    }
    v_hist.push_back(v);
    if (static_cast<long>(v_hist.size()) > scenario.meas_delay + 1) v_hist.pop_front();

    const Eigen::VectorXd& seen = v_hist.front();
    Eigen::VectorXd v_meas(m);
    for (int k = 0; k < m; ++k) {
      double value = seen(positions[k]);
      if (scenario.noise_sigma > 0.0) {
        value += 2.0 * std::sqrt(std::max(value, 0.0)) * scenario.noise_sigma * noise_rng.normal();
      }
      v_meas(k) = value;
    }

    TickRecord rec;
    rec.tick = t;
    rec.v = v;
    rec.v_meas = v_meas;
    rec.q = state.q;
    rec.q_hat = state.q_hat;
    rec.xi = state.xi;
    rec.lam_up = state.lam_up;
    rec.lam_low = state.lam_low;
    rec.cost = cost.value(state.q);
    rec.violation = violation_of(v, problem.limits);

    if (scenario.control_enabled) {
      const auto inboxes = router.deliver(agents, position, t, delay_rng);
      if (scenario.record_messages) {
        for (int k = 0; k < m; ++k) {
          for (const AgentMessage& msg : inboxes[k]) {
            rec.messages.push_back({buses[k], msg.sender, msg.value, msg.tick});
          }
        }
      }
      router.push(synchronous_round(agents, v_meas, inboxes, params, t));
    }
    ++trace.ticks_run;
    if (observer) observer(rec);
    trace.ticks.push_back(std::move(rec));
    if (scenario.keep_last > 0 && static_cast<long>(trace.ticks.size()) >= 2 * scenario.keep_last) {
      trace.ticks.erase(trace.ticks.begin(), trace.ticks.end() - scenario.keep_last);
    }
  }
  if (scenario.keep_last > 0 && static_cast<long>(trace.ticks.size()) > scenario.keep_last) {
    trace.ticks.erase(trace.ticks.begin(), trace.ticks.end() - scenario.keep_last);
  }
  return trace;
}

namespace {

CapacityLimits limits_of(const std::vector<BusId>& controllable, const CapacityLimits& limits) {
  std::vector<int> positions;
  for (BusId b : controllable) positions.push_back(b - 1);
  return limits.subset(positions);
}

}  // namespace

SummaryBuilder::SummaryBuilder(const std::vector<BusId>& controllable, const CapacityLimits& limits, double tol)
    : limits_c_(limits_of(controllable, limits)),
      cap_(limits_c_.q_low.cwiseAbs().cwiseMax(limits_c_.q_high.cwiseAbs())),
      tol_(tol) {}

void SummaryBuilder::add(const TickRecord& rec) {
  ++s_.ticks;
  const double worst = rec.violation.size() ? rec.violation.maxCoeff() : 0.0;
  s_.max_violation = std::max(s_.max_violation, worst);
  total_ += rec.violation.sum();
  if (worst > tol_) last_bad_ = rec.tick;
  for (Eigen::Index k = 0; k < rec.q.size(); ++k) {
    if (rec.q(k) < limits_c_.q_low(k) || rec.q(k) > limits_c_.q_high(k)) ++s_.capacity_violations;
    s_.max_qhat_ratio = std::max(s_.max_qhat_ratio, std::abs(rec.q_hat(k)) / cap_(k));
  }
  last_cost_ = rec.cost;
  last_q_ = rec.q;
}

TraceSummary SummaryBuilder::finish() const {
  TraceSummary s = s_;
  if (s.ticks == 0) return s;
  s.mean_violation = total_ / static_cast<double>(s.ticks);
  s.final_cost = last_cost_;
  s.q_final = last_q_;
  if (last_bad_ + 1 < s.ticks) s.convergence_tick = last_bad_ + 1;
  return s;
}

TraceSummary summarize(const SimulationTrace& trace, const CapacityLimits& limits, double tol) {
  SummaryBuilder b(trace.controllable, limits, tol);
  for (const TickRecord& rec : trace.ticks) b.add(rec);
  return b.finish();
}

ControllerParams suggest_params(const Eigen::MatrixXd& X_C, const Eigen::SparseMatrix<double>& Y_C,
                                double l, double c, double d) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_y(Eigen::MatrixXd(Y_C),
                                                            Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_x(X_C, Eigen::EigenvaluesOnly);
  ControllerParams p;
  p.c = c;
  p.d = d;
  p.alpha = 0.5 / (eig_y.eigenvalues().maxCoeff() * (l + c));
  p.beta = 0.5 * c;
  p.gamma = 1.0 / eig_x.eigenvalues().maxCoeff();
  return p;
}

}  // namespace voltctl
