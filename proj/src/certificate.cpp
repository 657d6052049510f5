#include "voltctl/certificate.hpp"

#include <algorithm>
#include <cmath>

namespace voltctl {

double Certificate::rho(double alpha) const {
  return std::exp(-tau * alpha / 2.0) + alpha * alpha * nu * nu * kappa_P0 / 2.0;
}

double Certificate::one_minus_rho(double alpha) const {
  return -std::expm1(-tau * alpha / 2.0) - alpha * alpha * nu * nu * kappa_P0 / 2.0;
}

double Certificate::gamma_max(double alpha) const {
  const double gap = one_minus_rho(alpha);
  if (!(gap > 0.0)) return 0.0;
  const double xt2 = xtilde_norm * xtilde_norm;
  return std::min(mu / (2.0 * xt2), xt2 * gap * gap / (2.0 * mu * C2 * C2));
}

ControllerParams Certificate::certified_params(double d, double alpha_fraction,
                                               double gamma_fraction) const {
  ControllerParams params;
  params.alpha = alpha_fraction * alpha_max;
  params.beta = step_ratio * params.alpha;
  params.gamma = gamma_fraction * gamma_max(params.alpha);
  params.c = c;
  params.d = d;
  return params;
}

namespace {

// Condition number and smallest eigenvalue of a symmetric matrix.
std::pair<double, double> spd_condition(const Eigen::MatrixXd& M, const char* what) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) {
    throw CertificateError(std::string(what) + " is not positive definite (min eigenvalue " +
                           std::to_string(lo) + ")");
  }
  return {hi / lo, lo};
}

}  // namespace

Certificate step_size_certificate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double mu,
                                  double l, double c, double step_ratio) {
  if (!(mu > 0.0 && l >= mu)) throw std::invalid_argument("certificate needs 0 < mu <= l");
  if (!(c > 0.0 && step_ratio > 0.0)) {
    throw std::invalid_argument("certificate needs c > 0 and beta/alpha > 0");
  }
  const auto n = Y.rows();
  Certificate cert;
  cert.mu = mu;
  cert.l = l;
  cert.c = c;
  cert.step_ratio = step_ratio;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_Y(Y);
  cert.sigma_min_Y = eig_Y.eigenvalues().minCoeff();
  cert.sigma_max_Y = eig_Y.eigenvalues().maxCoeff();
  if (!(cert.sigma_min_Y > 0.0)) throw CertificateError("Y is not positive definite");
  cert.kappa_Y = cert.sigma_max_Y / cert.sigma_min_Y;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_X(X, Eigen::EigenvaluesOnly);
  cert.xtilde_norm = std::sqrt(2.0) * eig_X.eigenvalues().cwiseAbs().maxCoeff();

  const double eta = step_ratio;
  const double smax = cert.sigma_max_Y;
  cert.mu_prime = mu * cert.sigma_min_Y;
  cert.l_prime = l * smax;
  const double lp = cert.l_prime;
  const double mup = cert.mu_prime;
  const double m1 = std::max(c * smax / mup, lp / mup);
  const double m2 = std::max(eta / (lp * c), lp / mup);
  cert.a = 20.0 * lp * m1 * m1 * m2 * m2 * cert.kappa_Y;
  cert.tau = eta / 2.0 * cert.sigma_min_Y / cert.a;
  cert.nu = std::max(std::sqrt(2.0 * (lp + smax * c) * (lp + smax * c) + 2.0 * eta * eta * smax),
                     std::sqrt(2.0 * smax + 8.0 * eta * eta / (c * c)));

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Y_half = eig_Y.operatorSqrt();
  Eigen::MatrixXd P0(2 * n, 2 * n);
  P0 << eta * cert.a * I, eta * Y_half, eta * Y_half, cert.a * I;
  Eigen::MatrixXd P(2 * n, 2 * n);
  // Y^{-1} = X.
  P << eta * cert.a * X, eta * I, eta * I, cert.a * I;
  std::tie(cert.kappa_P0, cert.min_eig_P0) = spd_condition(P0, "P0");
  std::tie(cert.kappa_P, cert.min_eig_P) = spd_condition(P, "P");

  cert.alpha_max = std::min(1.0 / cert.tau, cert.tau / (2.0 * cert.nu * cert.nu * cert.kappa_P0));
  const double xt2 = cert.xtilde_norm * cert.xtilde_norm;
  cert.C2 = xt2 * std::sqrt(cert.kappa_P) * std::sqrt((1.0 + 4.0 * l * l) / (mu * mu));
  return cert;
}

}  // namespace voltctl
