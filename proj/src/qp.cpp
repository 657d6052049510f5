#include "voltctl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace voltctl {

namespace {

struct PathResult {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  int iterations = 0;
  bool converged = false;
};

// Largest step in (0, 1] keeping v + t * dv >= (1 - fraction) * v componentwise.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double fraction) {
  double t = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) t = std::min(t, -fraction * v(i) / dv(i));
  }
  return t;
}

// Primal-dual path following from a strictly feasible x0. Primal feasibility
// is kept exactly (slacks are recomputed from x), so only stationarity and
// complementarity need to be driven to zero.
PathResult follow_central_path(const InequalityQP& qp, const Eigen::VectorXd& x0,
                               const InteriorPointOptions& opt) {
  const auto m = qp.A.rows();
  PathResult out;
  out.x = x0;
  Eigen::VectorXd s = qp.b - qp.A * out.x;
  if (s.minCoeff() <= 0.0) throw std::logic_error("central path needs a strictly feasible start");
  out.z = Eigen::VectorXd::Ones(m);
  const double g_scale = 1.0 + qp.g.cwiseAbs().maxCoeff();

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    out.iterations = iter;
    const Eigen::VectorXd grad = qp.H * out.x + qp.g;
    const Eigen::VectorXd r_d = grad + qp.A.transpose() * out.z;
    const double mu = s.dot(out.z) / static_cast<double>(m);
    if (r_d.cwiseAbs().maxCoeff() <= opt.tol * g_scale && mu <= opt.tol) {
      out.converged = true;
      return out;
    }
    const Eigen::VectorXd D = out.z.cwiseQuotient(s);
    const Eigen::MatrixXd M = qp.H + qp.A.transpose() * D.asDiagonal() * qp.A;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);

    auto direction = [&](double target, Eigen::VectorXd& dx, Eigen::VectorXd& dz) {
      const Eigen::VectorXd inv_s = s.cwiseInverse();
      dx = ldlt.solve(-grad - target * (qp.A.transpose() * inv_s));
      const Eigen::VectorXd ds = -qp.A * dx;
      dz = (Eigen::VectorXd::Constant(m, target) - s.cwiseProduct(out.z) - out.z.cwiseProduct(ds))
               .cwiseQuotient(s);
      return ds;
    };

    // Predictor (pure Newton) picks the centering weight for the real step.
    Eigen::VectorXd dx;
    Eigen::VectorXd dz;
    Eigen::VectorXd ds = direction(0.0, dx, dz);
    const double t_aff = std::min(max_step(s, ds, 1.0), max_step(out.z, dz, 1.0));
    const double mu_aff =
        (s + t_aff * ds).dot(out.z + t_aff * dz) / static_cast<double>(m);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, opt.centering * 10.0);
    ds = direction(std::max(sigma, 1e-3 * opt.centering) * mu, dx, dz);

    const double t = std::min(max_step(s, ds, opt.boundary_fraction),
                              max_step(out.z, dz, opt.boundary_fraction));
    out.x += t * dx;
    out.z += t * dz;
    s = qp.b - qp.A * out.x;
    if (s.minCoeff() <= 0.0) {
      // Rounding pushed a slack to the boundary; back off along the step.
      out.x -= 0.5 * t * dx;
      s = qp.b - qp.A * out.x;
    }
  }
  out.iterations = opt.max_iter;
  return out;
}

}  // namespace

QPResult solve_inequality_qp(const InequalityQP& qp, const InteriorPointOptions& options,
                             const std::optional<Eigen::VectorXd>& start) {
  const auto n = qp.H.rows();
  const auto m = qp.A.rows();
  if (qp.H.cols() != n || qp.g.size() != n || qp.A.cols() != n || qp.b.size() != m) {
    throw std::invalid_argument("inequality QP has inconsistent dimensions");
  }
  QPResult result;
  Eigen::VectorXd x0;

  if (start && (qp.b - qp.A * *start).minCoeff() > 0.0) {
    x0 = *start;
    result.phase1_value = (qp.A * x0 - qp.b).maxCoeff();
  } else {
    // Phase 1: min t s.t. A x - t <= b, t >= -t_cap. The cap keeps the
    // auxiliary problem bounded for any polyhedron.
    const double scale = 1.0 + qp.b.cwiseAbs().maxCoeff();
    const double t_cap = scale;
    InequalityQP aux;
    aux.H = 1e-10 * Eigen::MatrixXd::Identity(n + 1, n + 1);
    aux.g = Eigen::VectorXd::Zero(n + 1);
    aux.g(n) = 1.0;
    aux.A.resize(m + 1, n + 1);
    aux.A << qp.A, -Eigen::VectorXd::Ones(m), Eigen::RowVectorXd::Zero(n), -1.0;
    aux.b.resize(m + 1);
    aux.b << qp.b, t_cap;
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n + 1);
    y0(n) = std::max((-qp.b).maxCoeff(), -t_cap) + 1.0;
    InteriorPointOptions aux_opt = options;
    aux_opt.tol = 1e-11;
    const PathResult phase1 = follow_central_path(aux, y0, aux_opt);
    result.iterations += phase1.iterations;
    result.phase1_value = phase1.x(n);
    if (!(result.phase1_value < -1e-9 * scale)) {
      result.status = QPStatus::infeasible;
      result.x = phase1.x.head(n);
      return result;
    }
    x0 = phase1.x.head(n);
  }

  const PathResult phase2 = follow_central_path(qp, x0, options);
  result.iterations += phase2.iterations;
  result.x = phase2.x;
  result.z = phase2.z;
  result.status = phase2.converged ? QPStatus::optimal : QPStatus::max_iterations;
  return result;
}

}  // namespace voltctl
