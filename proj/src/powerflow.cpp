#include "voltctl/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace voltctl {

namespace {

void check_dim(const Eigen::VectorXd& vec, int n, const char* what) {
  if (vec.size() != n) {
    std::ostringstream os;
    os << what << " has length " << vec.size() << ", expected " << n;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Eigen::VectorXd lin_voltage(const LinearPlant& plant, const Eigen::VectorXd& q_ctrl) {
  const auto n = static_cast<int>(plant.v_par.size());
  check_dim(q_ctrl, n, "control injection");
  if (plant.mats.X.rows() != n) throw std::invalid_argument("plant X does not match v_par");
  return plant.mats.X * q_ctrl + plant.v_par;
}

Eigen::VectorXd make_vpar(const RadialNetwork& net, const SensitivityMatrices& mats,
                          const Eigen::VectorXd& p, const Eigen::VectorXd& q_exo) {
  check_dim(p, net.size(), "active injection p");
  check_dim(q_exo, net.size(), "exogenous reactive injection");
  return mats.R * p + mats.X * q_exo +
         Eigen::VectorXd::Constant(net.size(), net.v0());
}

double flow_residual(const RadialNetwork& net, const InjectionProfile& inj,
                     const FlowSolution& sol) {
  double worst = 0.0;
  const auto& lines = net.lines();
  auto v_at = [&](BusId bus) { return bus == 0 ? net.v0() : sol.v(bus - 1); };
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const Line& line = lines[k];
    const BusId j = line.to;
    double p_out = 0.0;
    double q_out = 0.0;
    for (BusId child : net.children(j)) {
      p_out += sol.p_flow(net.parent_line(child));
      q_out += sol.q_flow(net.parent_line(child));
    }
    const double ra = -inj.p(j - 1) - (sol.p_flow(k) - line.r * sol.ell(k) - p_out);
    const double rb = -inj.q(j - 1) - (sol.q_flow(k) - line.x * sol.ell(k) - q_out);
    const double rc = v_at(j) - (v_at(line.from) -
                                 2.0 * (line.r * sol.p_flow(k) + line.x * sol.q_flow(k)) +
                                 (line.r * line.r + line.x * line.x) * sol.ell(k));
    // Multiplied through by v_i so the residual stays finite near collapse.
    const double rd = sol.ell(k) * v_at(line.from) -
                      (sol.p_flow(k) * sol.p_flow(k) + sol.q_flow(k) * sol.q_flow(k));
    worst = std::max({worst, std::abs(ra), std::abs(rb), std::abs(rc), std::abs(rd)});
  }
  return worst;
}

FlowSolution nonlinear_solve(const RadialNetwork& net, const InjectionProfile& inj,
                             const SweepOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("sweep tolerance must be positive");
  const int n = net.size();
  check_dim(inj.p, n, "active injection p");
  check_dim(inj.q, n, "reactive injection q");

  FlowSolution sol;
  sol.v = Eigen::VectorXd::Constant(n, net.v0());
  sol.p_flow = Eigen::VectorXd::Zero(n);
  sol.q_flow = Eigen::VectorXd::Zero(n);
  sol.ell = Eigen::VectorXd::Zero(n);

  const auto& lines = net.lines();
  const auto& order = net.order();
  auto v_at = [&](BusId bus) { return bus == 0 ? net.v0() : sol.v(bus - 1); };

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    // Backward: aggregate flows leaf-to-root with the current losses.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const BusId j = *it;
      const int k = net.parent_line(j);
      double p_out = 0.0;
      double q_out = 0.0;
      for (BusId child : net.children(j)) {
        p_out += sol.p_flow(net.parent_line(child));
        q_out += sol.q_flow(net.parent_line(child));
      }
      sol.p_flow(k) = -inj.p(j - 1) + lines[k].r * sol.ell(k) + p_out;
      sol.q_flow(k) = -inj.q(j - 1) + lines[k].x * sol.ell(k) + q_out;
    }
    // Forward: voltage drop root-to-leaf.
    for (BusId j : order) {
      const int k = net.parent_line(j);
      const Line& line = lines[k];
      sol.v(j - 1) = v_at(line.from) - 2.0 * (line.r * sol.p_flow(k) + line.x * sol.q_flow(k)) +
                     (line.r * line.r + line.x * line.x) * sol.ell(k);
      if (!(sol.v(j - 1) > 0.0)) {
        std::ostringstream os;
        os << "voltage collapse: nonpositive squared voltage " << sol.v(j - 1) << " at bus " << j
           << " in sweep iteration " << iter;
        throw PowerFlowError(os.str(), iter, std::numeric_limits<double>::infinity());
      }
    }
    if (!options.lossless) {
      for (std::size_t k = 0; k < lines.size(); ++k) {
        sol.ell(k) = (sol.p_flow(k) * sol.p_flow(k) + sol.q_flow(k) * sol.q_flow(k)) /
                     v_at(lines[k].from);
      }
    }
    sol.iterations = iter;
    sol.residual = options.lossless ? 0.0 : flow_residual(net, inj, sol);
    if (sol.residual < options.tol) return sol;
  }
  std::ostringstream os;
  os << "backward/forward sweep did not converge in " << options.max_iter
     << " iterations (residual " << sol.residual << ")";
  throw PowerFlowError(os.str(), options.max_iter, sol.residual);
}

}  // namespace voltctl
