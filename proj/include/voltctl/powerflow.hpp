#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "voltctl/grid.hpp"

namespace voltctl {

class PowerFlowError : public std::runtime_error {
 public:
  PowerFlowError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// Bus injections for buses 1..n (position bus - 1). Loads are negative.
struct InjectionProfile {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

/// Branch-flow solution. Per-line vectors are indexed like net.lines().
struct FlowSolution {
  Eigen::VectorXd v;  // squared voltage magnitude, buses 1..n
  Eigen::VectorXd p_flow;
  Eigen::VectorXd q_flow;
  Eigen::VectorXd ell;  // squared current magnitude
  int iterations = 0;
  double residual = 0.0;  // max-norm branch-flow residual at return
};

struct SweepOptions {
  double tol = 1e-10;
  int max_iter = 500;
  /// Drop the loss terms (ell = 0 throughout): reproduces the linearized model.
  bool lossless = false;
};

/// Linearized plant v(q) = X q + v_par. v_par is hidden from the controller.
struct LinearPlant {
  SensitivityMatrices mats;
  Eigen::VectorXd v_par;
};

Eigen::VectorXd lin_voltage(const LinearPlant& plant, const Eigen::VectorXd& q_ctrl);

/// v_par = R p + X q_exo + v0 * 1.
Eigen::VectorXd make_vpar(const RadialNetwork& net, const SensitivityMatrices& mats,
                          const Eigen::VectorXd& p, const Eigen::VectorXd& q_exo);

/// Backward/forward sweep on the branch-flow equations from a flat start.
/// Throws PowerFlowError on non-convergence or a nonpositive voltage.
FlowSolution nonlinear_solve(const RadialNetwork& net, const InjectionProfile& inj,
                             const SweepOptions& options = {});

/// Max-norm residual of the four branch-flow equation blocks at `sol`.
double flow_residual(const RadialNetwork& net, const InjectionProfile& inj,
                     const FlowSolution& sol);

}  // namespace voltctl
