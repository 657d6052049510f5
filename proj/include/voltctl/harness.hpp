#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "voltctl/controller.hpp"
#include "voltctl/grid.hpp"
#include "voltctl/powerflow.hpp"
#include "voltctl/rng.hpp"

namespace voltctl {

enum class PlantKind { linearized, nonlinear };

const char* to_string(PlantKind kind);

/// Per-tick injections for buses 1..n. Ticks past the last row repeat it, so a
/// single row is a static profile.
struct ProfileSeries {
  std::vector<InjectionProfile> rows;

  long size() const { return static_cast<long>(rows.size()); }
  const InjectionProfile& at(long tick) const;
  static ProfileSeries constant(InjectionProfile row);
};

/// How agents' copies of Y are corrupted.
///  branch: Y is a grounded Laplacian (nonpositive off-diagonals, nonnegative
///    row sums); every branch weight -Y_ij (one draw per unordered pair) and
///    every ground weight (row sum) gets its own U[1 - pct, 1 + pct] factor and
///    the diagonal is rebuilt from them. Every entry's ratio stays within
///    [1 - pct, 1 + pct] and the copy stays symmetric positive definite.
///  entry: every stored entry independently, which in general destroys
///    symmetry and definiteness.
enum class ModelErrorMode { branch, entry };

const char* to_string(ModelErrorMode mode);

struct Scenario {
  PlantKind plant = PlantKind::linearized;
  long horizon = 0;
  double tick_seconds = 6.0;
  ProfileSeries profiles;
  /// Linearized plant only: use this v_par for every tick instead of profiles.
  std::optional<Eigen::VectorXd> v_par;
  double noise_sigma = 0.0;  // p.u. of voltage magnitude
  int meas_delay = 0;        // ticks
  int comm_delay_max = 0;    // ticks
  double model_error_pct = 0.0;
  ModelErrorMode model_error_mode = ModelErrorMode::branch;
  std::uint64_t seed = 0;
  /// Buses carrying a controller; empty means every bus 1..n.
  std::vector<BusId> controllable;
  /// false runs the uncontrolled baseline q = 0.
  bool control_enabled = true;
  bool record_messages = false;
  /// 0 stores every tick in the trace; otherwise only the last keep_last.
  long keep_last = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate(int n) const;
};

struct DeliveredMessage {
  BusId receiver = 0;
  BusId sender = 0;
  double value = 0.0;
  long issued = 0;
};

/// Voltage-indexed vectors cover buses 1..n; controller vectors cover the
/// controllable buses in sorted order.
struct TickRecord {
  long tick = 0;
  Eigen::VectorXd v;
  Eigen::VectorXd v_meas;  // controllable buses, as seen by the agents
  Eigen::VectorXd q;
  Eigen::VectorXd q_hat;
  Eigen::VectorXd xi;
  Eigen::VectorXd lam_up;
  Eigen::VectorXd lam_low;
  double cost = 0.0;
  Eigen::VectorXd violation;  // max(v_low - v, v - v_high, 0) per bus
  std::vector<DeliveredMessage> messages;
};

struct SimulationTrace {
  std::vector<BusId> controllable;
  std::vector<TickRecord> ticks;
  long ticks_run = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Everything the closed loop needs apart from the scenario. Costs and limits
/// are indexed by bus - 1 over all buses; the controllable subset is taken from
/// them.
struct ControlProblem {
  const RadialNetwork* net = nullptr;
  SensitivityMatrices mats;
  std::vector<QuadraticCost> costs;
  CapacityLimits limits;
  double d = 0.0;

  ControlProblem(const RadialNetwork& network, std::vector<QuadraticCost> cost_terms,
                 CapacityLimits bus_limits, double loss_weight);
};

using TickObserver = std::function<void(const TickRecord&)>;

/// Closed-loop simulation. Deterministic given scenario.seed. A power-flow
/// failure ends the run early with aborted = true and the ticks so far.
/// `observer` sees every tick, including those keep_last drops.
SimulationTrace run(const Scenario& scenario, const ControlProblem& problem,
                    const ControllerParams& params, const TickObserver& observer = {});

/// v_par series the linearized plant sees at `tick`.
Eigen::VectorXd scenario_vpar(const Scenario& scenario, const ControlProblem& problem, long tick);

/// Linearized voltage problem seen by the controllable buses: cost, capacity
/// and band restricted to `buses`, X_C, and the matching rows of v_par.
struct VoltageProblem;
VoltageProblem controllable_problem(const ControlProblem& problem, const std::vector<BusId>& buses,
                                    const Eigen::VectorXd& v_par);

/// Sparsity is preserved in both modes. Throws std::invalid_argument if branch
/// mode gets a matrix that is not a grounded Laplacian.
Eigen::SparseMatrix<double> perturb_model(const Eigen::SparseMatrix<double>& Y, double pct, Rng& rng,
                                          ModelErrorMode mode = ModelErrorMode::branch);

/// Delivered value for edge i <- j at `tick`: the message j issued at
/// tick - lag, or its tick-0 message when that is earlier than the first tick.
/// history[s] holds every agent's message issued at tick first + s; push()
/// keeps only the max_delay + 1 newest ticks.
struct DelayedRouter {
  int max_delay = 0;
  long first = 0;
  std::deque<std::vector<AgentMessage>> history;

  void push(std::vector<AgentMessage> messages);
  std::vector<std::vector<AgentMessage>> deliver(const std::vector<Agent>& agents,
                                                 const std::vector<int>& position, long tick,
                                                 Rng& rng) const;
};

struct TraceSummary {
  long ticks = 0;
  double final_cost = 0.0;
  double max_violation = 0.0;
  /// Mean over ticks of the summed per-bus violation.
  double mean_violation = 0.0;
  /// First tick after which every voltage stays within band + tol; -1 if never.
  long convergence_tick = -1;
  long capacity_violations = 0;
  double max_qhat_ratio = 0.0;  // max |q_hat_i| / max(|q_low_i|, |q_high_i|)
  Eigen::VectorXd q_final;
};

/// Streaming form of summarize(), for runs that do not keep their ticks.
class SummaryBuilder {
 public:
  SummaryBuilder(const std::vector<BusId>& controllable, const CapacityLimits& limits, double tol = 1e-6);
  void add(const TickRecord& rec);
  TraceSummary finish() const;

 private:
  CapacityLimits limits_c_;
  Eigen::VectorXd cap_;
  double tol_;
  TraceSummary s_;
  double total_ = 0.0;
  long last_bad_ = -1;
  double last_cost_ = 0.0;
  Eigen::VectorXd last_q_;
};

TraceSummary summarize(const SimulationTrace& trace, const CapacityLimits& limits,
                       double tol = 1e-6);

/// Step sizes that work in practice on per-unit feeders: alpha from the stiffest
/// mode of the scaled gradient, beta = c / 2, gamma matched to the voltage loop.
ControllerParams suggest_params(const Eigen::MatrixXd& X_C, const Eigen::SparseMatrix<double>& Y_C,
                                double l, double c, double d);

}  // namespace voltctl
