#pragma once

#include <Eigen/Dense>

#include <string>

#include "voltctl/controller.hpp"
#include "voltctl/qp.hpp"

namespace voltctl {

/// Value and partial derivatives of the box-constraint penalty K_i(xi, q_hat).
struct PenaltyValue {
  double value = 0.0;
  double d_qhat = 0.0;
  double d_xi = 0.0;
};

PenaltyValue K_penalty(double xi, double qhat, double c, double q_low, double q_high);

/// Voltage regulation problem on the linearized model:
/// min f(q) s.t. v_low <= X q + v_par <= v_high, q_low <= q <= q_high.
struct VoltageProblem {
  CostModel cost;
  Eigen::MatrixXd X;
  Eigen::VectorXd v_par;
  CapacityLimits limits;

  int size() const { return static_cast<int>(v_par.size()); }
  Eigen::VectorXd voltage(const Eigen::VectorXd& q) const { return X * q + v_par; }
  void validate() const;
};

/// Multipliers are stacked [lower; upper] to match Xtilde = [-X; X].
struct AugLagrangian {
  VoltageProblem problem;
  double c = 1.0;

  Eigen::MatrixXd Xtilde() const;
  /// [-v_low + v_par; v_high - v_par].
  Eigen::VectorXd vb() const;
};

struct LagrangianEval {
  double value = 0.0;
  Eigen::VectorXd grad_qhat;
  Eigen::VectorXd grad_xi;
  Eigen::VectorXd grad_lam;  // [d/d lam_low; d/d lam_up]
};

/// L = f(q_hat) + lam^T (Xtilde q_hat - vb) + sum_i K_i(xi_i, q_hat_i).
LagrangianEval lagrangian_eval(const AugLagrangian& L, const Eigen::VectorXd& qhat,
                               const Eigen::VectorXd& xi, const Eigen::VectorXd& lam);

/// Nonnegative KKT multipliers of the voltage problem.
struct Multipliers {
  Eigen::VectorXd lam_low;
  Eigen::VectorXd lam_up;
  Eigen::VectorXd xi_low;
  Eigen::VectorXd xi_up;
};

/// xi_up = max(xi, 0), xi_low = -min(xi, 0).
Multipliers split_multipliers(const Eigen::VectorXd& xi, const Eigen::VectorXd& lam_low,
                              const Eigen::VectorXd& lam_up);

struct KKTReport {
  double stationarity = 0.0;
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double compl_slack = 0.0;
  double total = 0.0;
};

/// Max-norm residuals of stationarity, primal and dual feasibility and
/// complementary slackness. Independent of how q was obtained.
KKTReport kkt_residual(const Eigen::VectorXd& q, const Multipliers& mult,
                       const VoltageProblem& problem);

enum class OracleStatus { optimal, infeasible, not_converged };

struct OracleResult {
  OracleStatus status = OracleStatus::not_converged;
  Eigen::VectorXd q;
  Multipliers mult;
  double objective = 0.0;
  KKTReport kkt;
  int iterations = 0;
  /// Phase-1 margin; >= 0 certifies that no strictly voltage-feasible point exists.
  double phase1_value = 0.0;
  std::string diagnostic;
};

/// Centralized ground truth via the interior-point method on the 4n explicit
/// inequalities. Shares no code path with the controller's penalty updates.
OracleResult reference_solve(const VoltageProblem& problem, const InteriorPointOptions& options = {});

/// S(lam) = max_xi min_q L(q, xi, lam) = min over the capacity box of
/// f(q) + lam^T (Xtilde q - vb). Returns the value and the box minimizer.
std::pair<double, Eigen::VectorXd> dual_function(const VoltageProblem& problem,
                                                 const Eigen::VectorXd& lam_low,
                                                 const Eigen::VectorXd& lam_up);

const char* to_string(OracleStatus status);

}  // namespace voltctl
