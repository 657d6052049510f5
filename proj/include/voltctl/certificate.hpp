#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "voltctl/controller.hpp"

namespace voltctl {

class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Constants of the contraction argument for the primal/capacity-multiplier
/// dynamics, and the step-size bounds they imply. All spectral quantities use
/// the symmetric positive definite Y, so singular values are eigenvalues.
struct Certificate {
  // Problem constants.
  double mu = 0.0;
  double l = 0.0;
  double c = 0.0;
  double step_ratio = 0.0;  // beta / alpha
  double sigma_min_Y = 0.0;
  double sigma_max_Y = 0.0;
  double kappa_Y = 0.0;
  double xtilde_norm = 0.0;  // spectral norm of [-X; X] = sqrt(2) ||X||

  // Derived constants.
  double mu_prime = 0.0;
  double l_prime = 0.0;
  double a = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  double kappa_P0 = 0.0;
  double kappa_P = 0.0;
  double min_eig_P0 = 0.0;
  double min_eig_P = 0.0;
  double alpha_max = 0.0;
  double C2 = 0.0;

  /// rho(alpha) = exp(-tau alpha / 2) + alpha^2 nu^2 kappa(P0) / 2.
  double rho(double alpha) const;
  /// 1 - rho(alpha) evaluated without cancellation; positive exactly when rho < 1
  /// even when rho rounds to 1 in double precision.
  double one_minus_rho(double alpha) const;
  /// Largest admissible gamma once alpha is fixed.
  double gamma_max(double alpha) const;
  /// alpha = alpha_fraction * alpha_max, beta = ratio * alpha,
  /// gamma = gamma_fraction * gamma_max(alpha).
  ControllerParams certified_params(double d, double alpha_fraction = 0.5,
                                    double gamma_fraction = 0.5) const;
};

/// Throws CertificateError if P0 or P fails to be positive definite, which
/// cannot happen for valid inputs.
Certificate step_size_certificate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double mu,
                                  double l, double c, double step_ratio);

}  // namespace voltctl
