#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <span>
#include <stdexcept>
#include <vector>

#include "voltctl/grid.hpp"

namespace voltctl {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ST_{b1}^{b2}(y) = max(min(y - b1, 0), y - b2): zero on [b1, b2], unit slope outside.
/// Throws std::invalid_argument unless b1 < b2.
double soft_threshold(double y, double b1, double b2);

struct ControllerParams {
  double alpha = 0.0;  // primal step
  double beta = 0.0;   // capacity-multiplier step
  double gamma = 0.0;  // voltage-multiplier step
  double c = 1.0;      // penalty scale
  double d = 0.0;      // weight of the (d/2) q^T X q loss term

  void validate() const;
};

/// f_i(q) = a q^2 + b q.
struct QuadraticCost {
  double a = 0.0;
  double b = 0.0;

  double value(double q) const { return a * q * q + b * q; }
  double derivative(double q) const { return 2.0 * a * q + b; }
};

/// Total cost f(q) = sum_i f_i(q_i) + (d/2) q^T X q together with its strong
/// convexity and smoothness constants (extreme Hessian eigenvalues).
class CostModel {
 public:
  /// Throws std::invalid_argument if any a_i < 0 or the total cost is not
  /// strongly convex (all a_i = 0 with d = 0).
  CostModel(std::vector<QuadraticCost> terms, double d, const Eigen::MatrixXd& X);

  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<QuadraticCost>& terms() const { return terms_; }
  double d() const { return d_; }
  double mu() const { return mu_; }
  double l() const { return l_; }
  const Eigen::MatrixXd& hessian() const { return hessian_; }
  /// Linear coefficients b_i.
  Eigen::VectorXd linear() const;

  double value(const Eigen::VectorXd& q) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const;
  /// sum_i f_i'(q_i) e_i, i.e. the gradient without the loss term.
  Eigen::VectorXd separable_gradient(const Eigen::VectorXd& q) const;

 private:
  std::vector<QuadraticCost> terms_;
  double d_;
  Eigen::MatrixXd X_;
  Eigen::MatrixXd hessian_;
  double mu_ = 0.0;
  double l_ = 0.0;
};

struct CapacityLimits {
  Eigen::VectorXd q_low;
  Eigen::VectorXd q_high;
  Eigen::VectorXd v_low;   // squared voltage, p.u.^2
  Eigen::VectorXd v_high;

  static CapacityLimits uniform(int n, double q_abs, double v_low, double v_high);
  int size() const { return static_cast<int>(q_low.size()); }
  /// Rows `positions` of every vector.
  CapacityLimits subset(std::span<const int> positions) const;
  void validate() const;
};

struct AgentState {
  double q_hat = 0.0;
  double xi = 0.0;
  double lam_up = 0.0;
  double lam_low = 0.0;
  double q = 0.0;
};

struct AgentMessage {
  BusId sender = 0;
  double value = 0.0;
  long tick = 0;
};

/// Static per-agent data. `y_row` lists (neighbour bus, [Y]_ij) and includes
/// the agent itself.
struct AgentSetup {
  BusId bus = 0;
  QuadraticCost cost;
  double q_low = 0.0;
  double q_high = 0.0;
  double v_low = 0.0;
  double v_high = 0.0;
  std::vector<std::pair<BusId, double>> y_row;
};

/// One bus-level controller. Holds only local state; everything about other
/// buses arrives through the inbox.
class Agent {
 public:
  /// Starts from q_hat = xi = lambda = 0, with q_hat moved to the nearest
  /// capacity bound when 0 lies outside [q_low, q_high].
  explicit Agent(AgentSetup setup);

  BusId bus() const { return setup_.bus; }
  const AgentSetup& setup() const { return setup_; }
  const AgentState& state() const { return state_; }
  /// Senders this agent expects each round (itself included).
  std::vector<BusId> neighbours() const;

  /// f_i'(q_hat) + ST_{c q_low}^{c q_high}(xi + c q_hat) at the current state.
  double broadcast_value(const ControllerParams& params) const;
  AgentMessage message(const ControllerParams& params, long tick) const;

  /// One update from the time-t snapshot. Throws ProtocolError for a missing,
  /// duplicated or unexpected sender.
  AgentState next_state(double v_meas, std::span<const AgentMessage> inbox,
                        const ControllerParams& params) const;
  void commit(const AgentState& state) { state_ = state; }

 private:
  AgentSetup setup_;
  AgentState state_;
};

/// Builds one agent per entry of `buses`; Y, costs and limits are indexed by
/// position in `buses`. Row i of Y (its nonzeros) defines agent i's neighbours.
std::vector<Agent> make_agents(const std::vector<BusId>& buses,
                               const Eigen::SparseMatrix<double>& Y,
                               const std::vector<QuadraticCost>& costs,
                               const CapacityLimits& limits);

/// Synchronous round: every agent reads the same snapshot, then all commit.
/// v_meas and inboxes are indexed by agent position. Returns the outbox
/// (one message per agent, stamped tick + 1).
std::vector<AgentMessage> synchronous_round(std::vector<Agent>& agents,
                                            const Eigen::VectorXd& v_meas,
                                            const std::vector<std::vector<AgentMessage>>& inboxes,
                                            const ControllerParams& params, long tick);

/// Every agent's current message, addressed to each of its neighbours.
std::vector<std::vector<AgentMessage>> route_fresh(const std::vector<Agent>& agents,
                                                   const ControllerParams& params, long tick);

/// Full-state view of the controller, used by the centralized reference path.
struct DenseState {
  Eigen::VectorXd q_hat;
  Eigen::VectorXd xi;
  Eigen::VectorXd lam_up;
  Eigen::VectorXd lam_low;
  Eigen::VectorXd q;
};

DenseState collect_state(const std::vector<Agent>& agents);

/// Gradient of the augmented Lagrangian with respect to q_hat:
/// grad f(q_hat) + X (lam_up - lam_low) + ST(xi + c q_hat).
Eigen::VectorXd primal_gradient(const DenseState& state, const ControllerParams& params,
                                const Eigen::MatrixXd& X, const CostModel& cost,
                                const CapacityLimits& limits);

/// The same round computed centrally: q_hat moves along -alpha * scaling *
/// primal_gradient (scaling = X^{-1} reproduces the distributed update), the
/// multipliers take the projected ascent steps, and q is clamped.
DenseState dense_equivalence_step(const DenseState& state, const Eigen::VectorXd& v,
                                  const ControllerParams& params, const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& scaling, const CostModel& cost,
                                  const CapacityLimits& limits);

}  // namespace voltctl
