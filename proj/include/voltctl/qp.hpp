#pragma once

#include <Eigen/Dense>

#include <optional>

namespace voltctl {

/// min 0.5 x^T H x + g^T x  subject to  A x <= b, with H positive definite.
struct InequalityQP {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct InteriorPointOptions {
  double tol = 1e-12;        // stationarity and mean complementarity
  int max_iter = 200;
  double centering = 0.1;    // sigma in the perturbed complementarity target
  double boundary_fraction = 0.995;
};

enum class QPStatus { optimal, infeasible, max_iterations };

struct QPResult {
  QPStatus status = QPStatus::max_iterations;
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // inequality multipliers, z >= 0
  int iterations = 0;
  /// Phase-1 optimum of min s s.t. A x - s <= b. Negative means a strictly
  /// feasible point exists; nonnegative certifies that none does.
  double phase1_value = 0.0;
};

/// Two-phase primal-dual log-barrier method with Newton steps on the
/// perturbed KKT system. Phase 1 finds a strictly feasible start (or
/// certifies infeasibility); phase 2 follows the central path from it.
/// `start`, when strictly feasible, skips phase 1.
QPResult solve_inequality_qp(const InequalityQP& qp, const InteriorPointOptions& options = {},
                             const std::optional<Eigen::VectorXd>& start = std::nullopt);

}  // namespace voltctl
