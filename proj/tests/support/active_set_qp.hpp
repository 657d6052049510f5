#pragma once

// Primal active-set method for min 1/2 x'Hx + g'x s.t. Ax <= b, H positive
// definite. Used only as a second opinion on the interior-point oracle, so it
// deliberately shares nothing with it: different algorithm, dense KKT solves,
// started from a caller-supplied feasible point.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace voltctl::testing {

struct ActiveSetResult {
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // multipliers, z >= 0, H x + g + A' z = 0
  int iterations = 0;
};

inline ActiveSetResult active_set_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                     const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                     Eigen::VectorXd x, double tol = 1e-12) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = A.rows();
  if ((A * x - b).maxCoeff() > 1e-9) throw std::invalid_argument("start point is infeasible");

  std::vector<Eigen::Index> work;
  const int max_iter = static_cast<int>(10 * (n + m) + 100);
  for (int it = 0; it < max_iter; ++it) {
    const auto k = static_cast<Eigen::Index>(work.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + k);
    K.topLeftCorner(n, n) = H;
    for (Eigen::Index j = 0; j < k; ++j) {
      K.block(0, n + j, n, 1) = A.row(work[j]).transpose();
      K.block(n + j, 0, 1, n) = A.row(work[j]);
    }
    rhs.head(n) = -(H * x + g);
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);

    if (p.lpNorm<Eigen::Infinity>() <= tol * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      const Eigen::VectorXd lam = sol.tail(k);
      Eigen::Index worst = -1;
      double most_negative = -tol;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (lam(j) < most_negative) {
          most_negative = lam(j);
          worst = j;
        }
      }
      if (worst < 0) {
        ActiveSetResult out{x, Eigen::VectorXd::Zero(m), it};
        for (Eigen::Index j = 0; j < k; ++j) out.z(work[j]) = std::max(lam(j), 0.0);
        return out;
      }
      work.erase(work.begin() + worst);
      continue;
    }

    double step = 1.0;
    std::optional<Eigen::Index> blocking;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = A.row(i).dot(p);
      if (ap <= 1e-15) continue;
      const double limit = (b(i) - A.row(i).dot(x)) / ap;
      if (limit < step) {
        step = std::max(limit, 0.0);
        blocking = i;
      }
    }
    x += step * p;
    if (blocking) work.push_back(*blocking);
  }
  throw std::runtime_error("active-set QP did not terminate");
}

}  // namespace voltctl::testing
