#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "voltctl/certificate.hpp"
#include "voltctl/config.hpp"
#include "voltctl/harness.hpp"
#include "voltctl/saddle.hpp"

namespace voltctl {

enum ExitCode : int { kExitOk = 0, kExitRunFailure = 1, kExitUsage = 2 };

/// A config turned into the objects the simulator works on. Not movable:
/// `problem` points at `net`.
struct PreparedRun {
  explicit PreparedRun(RunConfig cfg);
  PreparedRun(const PreparedRun&) = delete;
  PreparedRun& operator=(const PreparedRun&) = delete;

  RunConfig config;  // with controller.d and profile.seed filled in
  RadialNetwork net;
  ControlProblem problem;
  std::vector<BusId> buses;  // controllable, sorted
  Scenario scenario;
  ControllerParams params;

  /// Linearized problem the controller converges to when v_par does not
  /// change over the run; otherwise the one at the final tick.
  VoltageProblem final_problem() const;
  bool static_vpar() const;
};

/// Throws ConfigError for bad inputs.
std::unique_ptr<PreparedRun> prepare_run(const RunConfig& config);

/// Certificate for the run's controllable set with beta/alpha taken from the
/// run's step sizes.
Certificate run_certificate(const PreparedRun& run);

struct OracleComparison {
  OracleResult oracle;
  double q_error = 0.0;     // max-norm distance of the final q to q*
  double cost_gap = 0.0;    // |f(q_T) - f*| / max(|f*|, 1e-12)
  double qhat_gap = 0.0;    // max |q_T - q_hat_T|
  double lambda_step = 0.0; // ||lambda_T - lambda_{T-1}||
  KKTReport kkt;            // final q with the controller's multipliers
};

struct RunOutcome {
  SimulationTrace trace;
  TraceSummary summary;
  std::optional<TraceSummary> baseline;
  std::optional<OracleComparison> comparison;
  bool converged = false;
  int exit_code = kExitOk;
};

/// Runs the closed loop and, unless `out_dir` is empty, writes trace.csv,
/// summary.json and the optional baseline_trace.csv / messages.csv there.
RunOutcome cmd_run(const PreparedRun& run, const std::string& out_dir, std::ostream& log);

/// Writes oracle.json. Exit code 1 unless the problem is solved.
int cmd_oracle(const PreparedRun& run, const std::string& out_dir, std::ostream& log);

/// Writes certificate.json with rho at 0, at alpha_max / 2 and at the run's
/// alpha, and advisory flags for step sizes above the bounds.
int cmd_certify(const PreparedRun& run, const std::string& out_dir, std::ostream& log);

/// Network lint: topology, reactances, conditioning, sparsity of Y.
int cmd_validate(const std::string& network, std::ostream& log);

struct SweepRow {
  std::string id;
  bool ok = false;
  bool converged = false;
  std::optional<double> final_gap;
  double max_violation = 0.0;
  double mean_violation = 0.0;
  double runtime_seconds = 0.0;
  std::string error;
};

/// Expands glob patterns (each must match at least one file), runs every
/// config with its outputs under out_dir/<id>, and writes out_dir/sweep.csv.
/// Throws ConfigError when nothing matches.
std::vector<SweepRow> cmd_sweep(const std::vector<std::string>& patterns, const std::string& out_dir,
                                const std::vector<std::string>& overrides, int jobs, std::ostream& log);

}  // namespace voltctl
