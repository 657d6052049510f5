#include "voltctl/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace voltctl {

PenaltyValue K_penalty(double xi, double qhat, double c, double q_low, double q_high) {
  if (!(c > 0.0)) throw std::invalid_argument("penalty scale c must be positive");
  PenaltyValue out;
  const double shifted = qhat + xi / c;
  if (shifted < q_low) {
    const double gap = qhat - q_low;
    out.value = xi * gap + 0.5 * c * gap * gap;
  } else if (shifted > q_high) {
    const double gap = qhat - q_high;
    out.value = xi * gap + 0.5 * c * gap * gap;
  } else {
    out.value = -xi * xi / (2.0 * c);
  }
  const double st = soft_threshold(xi + c * qhat, c * q_low, c * q_high);
  out.d_qhat = st;
  out.d_xi = (st - xi) / c;
  return out;
}

void VoltageProblem::validate() const {
  const int n = size();
  if (X.rows() != n || X.cols() != n || cost.size() != n || limits.size() != n) {
    throw std::invalid_argument("voltage problem has inconsistent dimensions");
  }
  limits.validate();
}

Eigen::MatrixXd AugLagrangian::Xtilde() const {
  const int n = problem.size();
  Eigen::MatrixXd Xt(2 * n, n);
  Xt << -problem.X, problem.X;
  return Xt;
}

Eigen::VectorXd AugLagrangian::vb() const {
  const int n = problem.size();
  Eigen::VectorXd out(2 * n);
  out << -problem.limits.v_low + problem.v_par, problem.limits.v_high - problem.v_par;
  return out;
}

LagrangianEval lagrangian_eval(const AugLagrangian& L, const Eigen::VectorXd& qhat,
                               const Eigen::VectorXd& xi, const Eigen::VectorXd& lam) {
  const int n = L.problem.size();
  if (qhat.size() != n || xi.size() != n || lam.size() != 2 * n) {
    throw std::invalid_argument("lagrangian_eval: expected dimensions n, n, 2n");
  }
  const Eigen::MatrixXd Xt = L.Xtilde();
  const Eigen::VectorXd constraint = Xt * qhat - L.vb();
  LagrangianEval out;
  out.value = L.problem.cost.value(qhat) + lam.dot(constraint);
  out.grad_qhat = L.problem.cost.gradient(qhat) + Xt.transpose() * lam;
  out.grad_xi.resize(n);
  const auto& lim = L.problem.limits;
  for (int i = 0; i < n; ++i) {
    const PenaltyValue k = K_penalty(xi(i), qhat(i), L.c, lim.q_low(i), lim.q_high(i));
    out.value += k.value;
    out.grad_qhat(i) += k.d_qhat;
    out.grad_xi(i) = k.d_xi;
  }
  out.grad_lam = constraint;
  return out;
}

Multipliers split_multipliers(const Eigen::VectorXd& xi, const Eigen::VectorXd& lam_low,
                              const Eigen::VectorXd& lam_up) {
  return {lam_low, lam_up, (-xi).cwiseMax(0.0), xi.cwiseMax(0.0)};
}

KKTReport kkt_residual(const Eigen::VectorXd& q, const Multipliers& mult,
                       const VoltageProblem& problem) {
  const int n = problem.size();
  if (q.size() != n || mult.lam_low.size() != n || mult.lam_up.size() != n ||
      mult.xi_low.size() != n || mult.xi_up.size() != n) {
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  }
  const auto& lim = problem.limits;
  const Eigen::VectorXd v = problem.voltage(q);
  KKTReport r;
  r.stationarity = (problem.cost.gradient(q) + problem.X * (mult.lam_up - mult.lam_low) +
                    mult.xi_up - mult.xi_low)
                       .cwiseAbs()
                       .maxCoeff();
  r.primal_feas = std::max({0.0, (lim.v_low - v).maxCoeff(), (v - lim.v_high).maxCoeff(),
                            (lim.q_low - q).maxCoeff(), (q - lim.q_high).maxCoeff()});
  r.dual_feas = std::max({0.0, -mult.lam_low.minCoeff(), -mult.lam_up.minCoeff(),
                          -mult.xi_low.minCoeff(), -mult.xi_up.minCoeff()});
  r.compl_slack = std::max({mult.lam_low.cwiseProduct(v - lim.v_low).cwiseAbs().maxCoeff(),
                            mult.lam_up.cwiseProduct(lim.v_high - v).cwiseAbs().maxCoeff(),
                            mult.xi_up.cwiseProduct(lim.q_high - q).cwiseAbs().maxCoeff(),
                            mult.xi_low.cwiseProduct(q - lim.q_low).cwiseAbs().maxCoeff()});
  r.total = std::max({r.stationarity, r.primal_feas, r.dual_feas, r.compl_slack});
  return r;
}

OracleResult reference_solve(const VoltageProblem& problem, const InteriorPointOptions& options) {
  problem.validate();
  const int n = problem.size();
  const auto& lim = problem.limits;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  InequalityQP qp;
  qp.H = problem.cost.hessian();
  qp.g = problem.cost.linear();
  qp.A.resize(4 * n, n);
  qp.A << -problem.X, problem.X, -I, I;
  qp.b.resize(4 * n);
  qp.b << problem.v_par - lim.v_low, lim.v_high - problem.v_par, -lim.q_low, lim.q_high;

  const QPResult qpr = solve_inequality_qp(qp, options);
  OracleResult out;
  out.iterations = qpr.iterations;
  out.phase1_value = qpr.phase1_value;
  if (qpr.status == QPStatus::infeasible) {
    out.status = OracleStatus::infeasible;
    std::ostringstream os;
    os << "infeasible: no reactive injection within capacity keeps every voltage strictly "
          "inside its band (phase-1 margin "
       << qpr.phase1_value << " >= 0)";
    out.diagnostic = os.str();
    return out;
  }
  out.q = qpr.x;
  out.mult.lam_low = qpr.z.segment(0, n);
  out.mult.lam_up = qpr.z.segment(n, n);
  out.mult.xi_low = qpr.z.segment(2 * n, n);
  out.mult.xi_up = qpr.z.segment(3 * n, n);
  out.objective = problem.cost.value(out.q);
  out.kkt = kkt_residual(out.q, out.mult, problem);
  out.status = qpr.status == QPStatus::optimal ? OracleStatus::optimal : OracleStatus::not_converged;
  if (out.status == OracleStatus::not_converged) {
    out.diagnostic = "interior point reached the iteration limit";
  }
  return out;
}

std::pair<double, Eigen::VectorXd> dual_function(const VoltageProblem& problem,
                                                 const Eigen::VectorXd& lam_low,
                                                 const Eigen::VectorXd& lam_up) {
  const int n = problem.size();
  const auto& lim = problem.limits;
  InequalityQP qp;
  qp.H = problem.cost.hessian();
  qp.g = problem.cost.linear() + problem.X * (lam_up - lam_low);
  qp.A.resize(2 * n, n);
  qp.A << -Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n);
  qp.b.resize(2 * n);
  qp.b << -lim.q_low, lim.q_high;
  const QPResult qpr = solve_inequality_qp(qp, {}, Eigen::VectorXd(0.5 * (lim.q_low + lim.q_high)));
  const Eigen::VectorXd v = problem.voltage(qpr.x);
  const double value = problem.cost.value(qpr.x) + lam_low.dot(lim.v_low - v) +
                       lam_up.dot(v - lim.v_high);
  return {value, qpr.x};
}

const char* to_string(OracleStatus status) {
  switch (status) {
    case OracleStatus::optimal:
      return "optimal";
    case OracleStatus::infeasible:
      return "infeasible";
    case OracleStatus::not_converged:
      return "not_converged";
  }
  return "unknown";
}

}  // namespace voltctl
