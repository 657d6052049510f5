#include "voltctl/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace voltctl {

double soft_threshold(double y, double b1, double b2) {
  if (!(b1 < b2)) throw std::invalid_argument("soft_threshold needs b1 < b2");
  return std::max(std::min(y - b1, 0.0), y - b2);
}

void ControllerParams::validate() const {
  if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0)) {
    throw std::invalid_argument("step sizes alpha, beta, gamma must be positive");
  }
  if (!(c > 0.0)) throw std::invalid_argument("penalty scale c must be positive");
  if (!(d >= 0.0)) throw std::invalid_argument("loss weight d must be nonnegative");
}

CostModel::CostModel(std::vector<QuadraticCost> terms, double d, const Eigen::MatrixXd& X)
    : terms_(std::move(terms)), d_(d), X_(X) {
  const int n = size();
  if (X.rows() != n || X.cols() != n) {
    throw std::invalid_argument("cost terms and X have different dimensions");
  }
  if (!(d >= 0.0)) throw std::invalid_argument("loss weight d must be nonnegative");
  hessian_ = d * X;
  for (int i = 0; i < n; ++i) {
    if (!(terms_[i].a >= 0.0)) {
      throw std::invalid_argument("cost term " + std::to_string(i) + " has a < 0 (not convex)");
    }
    hessian_(i, i) += 2.0 * terms_[i].a;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_, Eigen::EigenvaluesOnly);
  mu_ = eig.eigenvalues().minCoeff();
  l_ = eig.eigenvalues().maxCoeff();
  if (!(mu_ > 0.0)) {
    throw std::invalid_argument(
        "total cost is not strongly convex: give every bus a > 0 or use a loss weight d > 0");
  }
}

Eigen::VectorXd CostModel::linear() const {
  Eigen::VectorXd b(size());
  for (int i = 0; i < size(); ++i) b(i) = terms_[i].b;
  return b;
}

double CostModel::value(const Eigen::VectorXd& q) const {
  double total = 0.0;
  for (int i = 0; i < size(); ++i) total += terms_[i].value(q(i));
  if (d_ != 0.0) total += 0.5 * d_ * q.dot(X_ * q);
  return total;
}

Eigen::VectorXd CostModel::separable_gradient(const Eigen::VectorXd& q) const {
  Eigen::VectorXd g(size());
  for (int i = 0; i < size(); ++i) g(i) = terms_[i].derivative(q(i));
  return g;
}

Eigen::VectorXd CostModel::gradient(const Eigen::VectorXd& q) const {
  Eigen::VectorXd g = separable_gradient(q);
  if (d_ != 0.0) g += d_ * (X_ * q);
  return g;
}

CapacityLimits CapacityLimits::uniform(int n, double q_abs, double v_low, double v_high) {
  CapacityLimits limits;
  limits.q_low = Eigen::VectorXd::Constant(n, -q_abs);
  limits.q_high = Eigen::VectorXd::Constant(n, q_abs);
  limits.v_low = Eigen::VectorXd::Constant(n, v_low);
  limits.v_high = Eigen::VectorXd::Constant(n, v_high);
  return limits;
}

CapacityLimits CapacityLimits::subset(std::span<const int> positions) const {
  CapacityLimits out;
  const auto m = static_cast<Eigen::Index>(positions.size());
  out.q_low.resize(m);
  out.q_high.resize(m);
  out.v_low.resize(m);
  out.v_high.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const int i = positions[k];
    out.q_low(k) = q_low(i);
    out.q_high(k) = q_high(i);
    out.v_low(k) = v_low(i);
    out.v_high(k) = v_high(i);
  }
  return out;
}

void CapacityLimits::validate() const {
  const auto n = q_low.size();
  if (q_high.size() != n || v_low.size() != n || v_high.size() != n) {
    throw std::invalid_argument("capacity/voltage limit vectors differ in length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(q_low(i) < q_high(i))) {
      throw std::invalid_argument("bus position " + std::to_string(i) + ": q_low >= q_high");
    }
    if (!(v_low(i) < v_high(i))) {
      throw std::invalid_argument("bus position " + std::to_string(i) + ": v_low >= v_high");
    }
  }
}

Agent::Agent(AgentSetup setup) : setup_(std::move(setup)) {
  if (!(setup_.q_low < setup_.q_high)) throw std::invalid_argument("agent needs q_low < q_high");
  state_.q_hat = std::clamp(0.0, setup_.q_low, setup_.q_high);
  state_.q = state_.q_hat;
}

std::vector<BusId> Agent::neighbours() const {
  std::vector<BusId> out;
  out.reserve(setup_.y_row.size());
  for (const auto& [bus, weight] : setup_.y_row) out.push_back(bus);
  return out;
}

double Agent::broadcast_value(const ControllerParams& params) const {
  const double c = params.c;
  return setup_.cost.derivative(state_.q_hat) +
         soft_threshold(state_.xi + c * state_.q_hat, c * setup_.q_low, c * setup_.q_high);
}

AgentMessage Agent::message(const ControllerParams& params, long tick) const {
  return {setup_.bus, broadcast_value(params), tick};
}

AgentState Agent::next_state(double v_meas, std::span<const AgentMessage> inbox,
                             const ControllerParams& params) const {
  const auto& row = setup_.y_row;
  if (inbox.size() != row.size()) {
    std::ostringstream os;
    os << "agent at bus " << setup_.bus << " expected " << row.size() << " messages, got "
       << inbox.size();
    throw ProtocolError(os.str());
  }
  // Y-weighted sum over the neighbourhood; each neighbour must appear once.
  double weighted = 0.0;
  std::vector<bool> seen(row.size(), false);
  for (const AgentMessage& msg : inbox) {
    const auto it = std::find_if(row.begin(), row.end(),
                                 [&](const auto& entry) { return entry.first == msg.sender; });
    if (it == row.end()) {
      throw ProtocolError("agent at bus " + std::to_string(setup_.bus) +
                          " received a message from non-neighbour bus " +
                          std::to_string(msg.sender));
    }
    const auto k = static_cast<std::size_t>(it - row.begin());
    if (seen[k]) {
      throw ProtocolError("agent at bus " + std::to_string(setup_.bus) +
                          " received two messages from bus " + std::to_string(msg.sender));
    }
    seen[k] = true;
    weighted += it->second * msg.value;
  }

  const double c = params.c;
  const AgentState& s = state_;
  AgentState next;
  next.q_hat = s.q_hat - params.alpha * (s.lam_up - s.lam_low + params.d * s.q_hat + weighted);
  const double st = soft_threshold(s.xi + c * s.q_hat, c * setup_.q_low, c * setup_.q_high);
  next.xi = s.xi + params.beta * (st - s.xi) / c;
  next.lam_up = std::max(0.0, s.lam_up + params.gamma * (v_meas - setup_.v_high));
  next.lam_low = std::max(0.0, s.lam_low + params.gamma * (setup_.v_low - v_meas));
  next.q = std::clamp(next.q_hat, setup_.q_low, setup_.q_high);
  return next;
}

std::vector<Agent> make_agents(const std::vector<BusId>& buses,
                               const Eigen::SparseMatrix<double>& Y,
                               const std::vector<QuadraticCost>& costs,
                               const CapacityLimits& limits) {
  const auto m = static_cast<int>(buses.size());
  if (Y.rows() != m || Y.cols() != m || static_cast<int>(costs.size()) != m ||
      limits.size() != m) {
    throw std::invalid_argument("make_agents: Y, costs and limits must match the bus list");
  }
  limits.validate();
  // Row access on a column-major matrix: Y^T column i is row i of Y.
  const Eigen::SparseMatrix<double> Yt = Y.transpose();
  std::vector<Agent> agents;
  agents.reserve(m);
  for (int i = 0; i < m; ++i) {
    AgentSetup setup;
    setup.bus = buses[i];
    setup.cost = costs[i];
    setup.q_low = limits.q_low(i);
    setup.q_high = limits.q_high(i);
    setup.v_low = limits.v_low(i);
    setup.v_high = limits.v_high(i);
    bool has_self = false;
    for (Eigen::SparseMatrix<double>::InnerIterator it(Yt, i); it; ++it) {
      setup.y_row.emplace_back(buses[it.row()], it.value());
      has_self = has_self || it.row() == i;
    }
    if (!has_self) setup.y_row.emplace_back(buses[i], 0.0);
    agents.emplace_back(std::move(setup));
  }
  return agents;
}

std::vector<AgentMessage> synchronous_round(std::vector<Agent>& agents,
                                            const Eigen::VectorXd& v_meas,
                                            const std::vector<std::vector<AgentMessage>>& inboxes,
                                            const ControllerParams& params, long tick) {
  const auto m = agents.size();
  if (static_cast<std::size_t>(v_meas.size()) != m || inboxes.size() != m) {
    throw std::invalid_argument("synchronous_round: measurements/inboxes do not match agents");
  }
  std::vector<AgentState> next(m);
  for (std::size_t i = 0; i < m; ++i) {
    next[i] = agents[i].next_state(v_meas(static_cast<Eigen::Index>(i)), inboxes[i], params);
  }
  std::vector<AgentMessage> outbox;
  outbox.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    agents[i].commit(next[i]);
    outbox.push_back(agents[i].message(params, tick + 1));
  }
  return outbox;
}

std::vector<std::vector<AgentMessage>> route_fresh(const std::vector<Agent>& agents,
                                                   const ControllerParams& params, long tick) {
  std::vector<AgentMessage> current;
  current.reserve(agents.size());
  std::vector<int> position;
  for (const Agent& agent : agents) {
    current.push_back(agent.message(params, tick));
    if (agent.bus() >= static_cast<int>(position.size())) position.resize(agent.bus() + 1, -1);
    position[agent.bus()] = static_cast<int>(current.size()) - 1;
  }
  std::vector<std::vector<AgentMessage>> inboxes(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (BusId sender : agents[i].neighbours()) inboxes[i].push_back(current[position[sender]]);
  }
  return inboxes;
}

DenseState collect_state(const std::vector<Agent>& agents) {
  const auto m = static_cast<Eigen::Index>(agents.size());
  DenseState s{Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m),
               Eigen::VectorXd(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const AgentState& a = agents[i].state();
    s.q_hat(i) = a.q_hat;
    s.xi(i) = a.xi;
    s.lam_up(i) = a.lam_up;
    s.lam_low(i) = a.lam_low;
    s.q(i) = a.q;
  }
  return s;
}

Eigen::VectorXd primal_gradient(const DenseState& state, const ControllerParams& params,
                                const Eigen::MatrixXd& X, const CostModel& cost,
                                const CapacityLimits& limits) {
  const double c = params.c;
  Eigen::VectorXd grad = cost.gradient(state.q_hat) + X * (state.lam_up - state.lam_low);
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    grad(i) += soft_threshold(state.xi(i) + c * state.q_hat(i), c * limits.q_low(i),
                              c * limits.q_high(i));
  }
  return grad;
}

DenseState dense_equivalence_step(const DenseState& state, const Eigen::VectorXd& v,
                                  const ControllerParams& params, const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& scaling, const CostModel& cost,
                                  const CapacityLimits& limits) {
  const double c = params.c;
  const auto n = state.q_hat.size();
  DenseState next;
  next.q_hat = state.q_hat - params.alpha * (scaling * primal_gradient(state, params, X, cost, limits));
  next.xi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double st = soft_threshold(state.xi(i) + c * state.q_hat(i), c * limits.q_low(i),
                                     c * limits.q_high(i));
    next.xi(i) = state.xi(i) + params.beta * (st - state.xi(i)) / c;
  }
  next.lam_up = (state.lam_up + params.gamma * (v - limits.v_high)).cwiseMax(0.0);
  next.lam_low = (state.lam_low + params.gamma * (limits.v_low - v)).cwiseMax(0.0);
  next.q = next.q_hat.cwiseMax(limits.q_low).cwiseMin(limits.q_high);
  return next;
}

}  // namespace voltctl
