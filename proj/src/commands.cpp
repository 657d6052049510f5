#include "voltctl/commands.hpp"

#include <glob.h>
#include <yaml-cpp/yaml.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "voltctl/feeders.hpp"
#include "voltctl/profiles.hpp"

namespace voltctl {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

json yaml_to_json(const YAML::Node& node) {
  if (node.IsMap()) {
    json out = json::object();
    for (const auto& kv : node) out[kv.first.as<std::string>()] = yaml_to_json(kv.second);
    return out;
  }
  if (node.IsSequence()) {
    json out = json::array();
    for (const auto& item : node) out.push_back(yaml_to_json(item));
    return out;
  }
  if (!node.IsScalar()) return nullptr;
  if (node.Tag() == "!") return node.Scalar();  // quoted in the source
  const std::string& s = node.Scalar();
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(s, &used);
    if (used == s.size()) return i;
  } catch (const std::exception&) {
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::exception&) {
  }
  return s;
}

json config_block(const RunConfig& cfg) {
  const std::string yaml = emit_config(cfg);
  return {{"schema_version", kSchemaVersion}, {"config", yaml_to_json(YAML::Load(yaml))}, {"config_yaml", yaml}};
}

std::string json_one_line(const RunConfig& cfg) { return yaml_to_json(YAML::Load(emit_config(cfg))).dump(); }

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << doc << "\n";
}

std::ofstream open_csv(const fs::path& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# schema_version: " << kSchemaVersion << "\n# config: " << json_one_line(cfg) << "\n";
  out << std::setprecision(17);
  return out;
}

/// Writes trace rows as ticks arrive: every stride-th tick plus the last one.
class TraceWriter {
 public:
  TraceWriter(const fs::path& path, const RunConfig& cfg, int n, const std::vector<BusId>& controllable)
      : out_(open_csv(path, cfg)), stride_(cfg.output.trace_stride) {
    out_ << "tick,cost,max_violation,total_violation";
    for (int i = 1; i <= n; ++i) out_ << ",v_" << i;
    for (const char* name : {"q", "q_hat", "xi", "lam_up", "lam_low"}) {
      for (BusId b : controllable) out_ << "," << name << "_" << b;
    }
    out_ << "\n";
  }

  void add(const TickRecord& r) {
    if (r.tick % stride_ == 0) {
      write(r);
      pending_.reset();
    } else {
      pending_ = r;
    }
  }

  void finish() {
    if (pending_) write(*pending_);
    pending_.reset();
  }

 private:
  void write(const TickRecord& r) {
    out_ << r.tick << "," << r.cost << "," << (r.violation.size() ? r.violation.maxCoeff() : 0.0) << ","
         << r.violation.sum();
    for (const Eigen::VectorXd* vec : {&r.v, &r.q, &r.q_hat, &r.xi, &r.lam_up, &r.lam_low}) {
      for (Eigen::Index i = 0; i < vec->size(); ++i) out_ << "," << (*vec)(i);
    }
    out_ << "\n";
  }

  std::ofstream out_;
  long stride_;
  std::optional<TickRecord> pending_;
};

void write_messages(std::ofstream& out, const TickRecord& r) {
  for (const DeliveredMessage& m : r.messages) {
    out << r.tick << "," << m.receiver << "," << m.sender << "," << m.value << "," << m.issued << "\n";
  }
}

/// Runs one closed loop keeping only the last two ticks; the trace file, if
/// any, is written as the run goes.
std::pair<SimulationTrace, TraceSummary> streamed_run(const PreparedRun& run, const Scenario& scenario,
                                                      const std::optional<fs::path>& trace_path,
                                                      const std::optional<fs::path>& messages_path) {
  Scenario sc = scenario;
  sc.keep_last = 2;
  SummaryBuilder summary(run.buses, run.problem.limits);
  std::optional<TraceWriter> writer;
  if (trace_path) writer.emplace(*trace_path, run.config, run.net.size(), run.buses);
  std::optional<std::ofstream> messages;
  if (messages_path) {
    messages.emplace(open_csv(*messages_path, run.config));
    *messages << "tick,receiver,sender,value,issued\n";
  }
  SimulationTrace trace = voltctl::run(sc, run.problem, run.params, [&](const TickRecord& rec) {
    summary.add(rec);
    if (writer) writer->add(rec);
    if (messages) write_messages(*messages, rec);
  });
  if (writer) writer->finish();
  return {std::move(trace), summary.finish()};
}

json summary_json(const TraceSummary& s, const std::vector<BusId>& buses) {
  json q = json::object();
  for (std::size_t k = 0; k < buses.size() && static_cast<Eigen::Index>(k) < s.q_final.size(); ++k) {
    q[std::to_string(buses[k])] = s.q_final(static_cast<Eigen::Index>(k));
  }
  return {{"ticks", s.ticks},
          {"final_cost", s.final_cost},
          {"max_violation", s.max_violation},
          {"mean_violation", s.mean_violation},
          {"convergence_tick", s.convergence_tick},
          {"capacity_violations", s.capacity_violations},
          {"max_qhat_ratio", s.max_qhat_ratio},
          {"q_final", q}};
}

json kkt_json(const KKTReport& k) {
  return {{"stationarity", k.stationarity},
          {"primal_feasibility", k.primal_feas},
          {"dual_feasibility", k.dual_feas},
          {"complementary_slackness", k.compl_slack},
          {"total", k.total}};
}

json params_json(const ControllerParams& p) {
  return {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}, {"c", p.c}, {"d", p.d}};
}

json bus_map(const std::vector<BusId>& buses, const Eigen::VectorXd& v) {
  json out = json::object();
  for (std::size_t k = 0; k < buses.size(); ++k) out[std::to_string(buses[k])] = v(static_cast<Eigen::Index>(k));
  return out;
}

json certificate_json(const Certificate& c, const ControllerParams& p) {
  const double gmax = c.gamma_max(p.alpha);
  json flags = json::array();
  if (p.alpha > c.alpha_max) flags.push_back("advisory: exceeds theoretical bound (alpha > alpha_max)");
  if (p.gamma > gmax) flags.push_back("advisory: exceeds theoretical bound (gamma > gamma_max(alpha))");
  return {{"mu", c.mu},
          {"l", c.l},
          {"c", c.c},
          {"step_ratio", c.step_ratio},
          {"sigma_min_Y", c.sigma_min_Y},
          {"sigma_max_Y", c.sigma_max_Y},
          {"kappa_Y", c.kappa_Y},
          {"xtilde_norm", c.xtilde_norm},
          {"mu_prime", c.mu_prime},
          {"l_prime", c.l_prime},
          {"a", c.a},
          {"tau", c.tau},
          {"nu", c.nu},
          {"kappa_P0", c.kappa_P0},
          {"kappa_P", c.kappa_P},
          {"min_eig_P0", c.min_eig_P0},
          {"min_eig_P", c.min_eig_P},
          {"C2", c.C2},
          {"alpha_max", c.alpha_max},
          {"rho_at_zero", c.rho(0.0)},
          {"rho_at_half_alpha_max", c.rho(c.alpha_max / 2)},
          {"one_minus_rho_at_half_alpha_max", c.one_minus_rho(c.alpha_max / 2)},
          {"alpha", p.alpha},
          {"rho_at_alpha", c.rho(p.alpha)},
          {"gamma", p.gamma},
          {"gamma_max_at_alpha", gmax},
          {"within_bounds", flags.empty()},
          {"flags", flags}};
}

ProfileSeries zero_profile(int n) {
  return ProfileSeries::constant({Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)});
}

std::vector<QuadraticCost> make_costs(const RunConfig& cfg, const RadialNetwork& net) {
  const int n = net.size();
  if (cfg.costs.preset == "feeder") return sce_like_settings(n).costs;
  auto pick = [&](const std::vector<double>& xs, const char* key, int i) {
    if (xs.size() == 1) return xs[0];
    if (static_cast<int>(xs.size()) != n) {
      throw ConfigError(cfg.network, 0,
                        std::string("costs.") + key + " has " + std::to_string(xs.size()) +
                            " entries for a network with " + std::to_string(n) + " buses");
    }
    return xs[static_cast<std::size_t>(i)];
  };
  std::vector<QuadraticCost> costs(n);
  for (int i = 0; i < n; ++i) costs[i] = {pick(cfg.costs.a, "a", i), pick(cfg.costs.b, "b", i)};
  return costs;
}

std::vector<BusId> controllable_of(const RunConfig& cfg, int n) {
  std::vector<BusId> buses = cfg.scenario.controllable;
  for (BusId b : buses) {
    if (b < 1 || b > n) {
      throw ConfigError(cfg.name.empty() ? "<config>" : cfg.name, 0,
                        "scenario.controllable bus " + std::to_string(b) + " is outside 1.." + std::to_string(n));
    }
  }
  if (buses.empty()) {
    buses.resize(n);
    for (int i = 0; i < n; ++i) buses[i] = i + 1;
  }
  std::sort(buses.begin(), buses.end());
  buses.erase(std::unique(buses.begin(), buses.end()), buses.end());
  return buses;
}

double resolved_d(const RunConfig& cfg, int n) {
  if (cfg.controller.d) return *cfg.controller.d;
  return static_cast<int>(controllable_of(cfg, n).size()) == n ? 1.0 : 0.0;
}

RadialNetwork network_of(const RunConfig& cfg) { return load_network(resolve_path(cfg, cfg.network)); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

PreparedRun::PreparedRun(RunConfig cfg)
    : config(std::move(cfg)),
      net(network_of(config)),
      problem(net, make_costs(config, net), CapacityLimits::uniform(net.size(), config.limits.q_abs,
                                                                    config.limits.v_low, config.limits.v_high),
              resolved_d(config, net.size())),
      buses(controllable_of(config, net.size())) {
  const int n = net.size();
  config.controller.d = problem.d;
  if (config.scenario.profile.seed == 0) config.scenario.profile.seed = config.seed;

  const ScenarioConfig& sc = config.scenario;
  scenario.plant = sc.plant;
  scenario.horizon = sc.horizon;
  scenario.tick_seconds = sc.tick_seconds;
  scenario.noise_sigma = sc.noise_sigma;
  scenario.meas_delay = sc.meas_delay;
  scenario.comm_delay_max = sc.comm_delay_max;
  scenario.model_error_pct = sc.model_error_pct;
  scenario.model_error_mode = sc.model_error_mode;
  scenario.seed = config.seed;
  scenario.controllable = buses;
  scenario.record_messages = config.output.messages;

  const std::string origin = config.name.empty() ? "<config>" : config.name;
  if (!sc.v_par.empty()) {
    if (static_cast<int>(sc.v_par.size()) != n) {
      throw ConfigError(origin, 0, "scenario.v_par has " + std::to_string(sc.v_par.size()) +
                                       " entries for a network with " + std::to_string(n) + " buses");
    }
    scenario.v_par = Eigen::Map<const Eigen::VectorXd>(sc.v_par.data(), n);
  }
  const std::string& kind = sc.profile.kind;
  if (kind == "none") {
    scenario.profiles = zero_profile(n);
  } else if (kind == "csv") {
    scenario.profiles = load_profile_csv(resolve_path(config, sc.profile.path), n);
  } else {
    ProfileOptions opts;
    opts.v_low = config.limits.v_low;
    opts.v_high = config.limits.v_high;
    opts.depth = sc.profile.depth;
    opts.plant = sc.plant;
    try {
      scenario.profiles = synth_profiles(kind == "daily" ? ProfileKind::daily : ProfileKind::static_heavy, net,
                                         sc.profile.seed, opts)
                              .series;
    } catch (const ProfileError& e) {
      throw ConfigError(origin, 0, std::string("scenario.profile: ") + e.what());
    }
  }
  try {
    scenario.validate(n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin, 0, e.what());
  }

  const ControllerConfig& cc = config.controller;
  if (cc.step_rule == StepRule::manual) {
    params = {cc.alpha, cc.beta, cc.gamma, cc.c, problem.d};
  } else {
    const ControllableSet cset = reduce_controllable(net, problem.mats, buses);
    std::vector<QuadraticCost> costs_c;
    for (BusId b : cset.buses) costs_c.push_back(problem.costs[b - 1]);
    CostModel cost = [&] {
      try {
        return CostModel(costs_c, problem.d, cset.X_C);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(origin, 0, std::string("costs: ") + e.what());
      }
    }();
    if (cc.step_rule == StepRule::suggested) {
      params = suggest_params(cset.X_C, cset.Y_C, cost.l(), cc.c, problem.d);
    } else {
      const Certificate cert =
          step_size_certificate(cset.X_C, Eigen::MatrixXd(cset.Y_C), cost.mu(), cost.l(), cc.c, 0.5);
      params = cert.certified_params(problem.d);
    }
  }
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin, 0, std::string("controller: ") + e.what());
  }
}

bool PreparedRun::static_vpar() const {
  return scenario.plant == PlantKind::linearized && (scenario.v_par || scenario.profiles.size() == 1);
}

VoltageProblem PreparedRun::final_problem() const {
  const long last = std::max(0L, scenario.horizon - 1);
  return controllable_problem(problem, buses, scenario_vpar(scenario, problem, last));
}

std::unique_ptr<PreparedRun> prepare_run(const RunConfig& config) {
  try {
    return std::make_unique<PreparedRun>(config);
  } catch (const TopologyError& e) {
    throw ConfigError(config.network, 0, e.what());
  }
}

Certificate run_certificate(const PreparedRun& run) {
  const ControllableSet cset = reduce_controllable(run.net, run.problem.mats, run.buses);
  std::vector<QuadraticCost> costs_c;
  for (BusId b : cset.buses) costs_c.push_back(run.problem.costs[b - 1]);
  const CostModel cost(costs_c, run.problem.d, cset.X_C);
  return step_size_certificate(cset.X_C, Eigen::MatrixXd(cset.Y_C), cost.mu(), cost.l(), run.params.c,
                               run.params.beta / run.params.alpha);
}

RunOutcome cmd_run(const PreparedRun& run, const std::string& out_dir, std::ostream& log) {
  RunOutcome outcome;
  std::optional<fs::path> dir;
  if (!out_dir.empty()) {
    dir = fs::path(out_dir);
    fs::create_directories(*dir);
  }
  auto file = [&](const char* name, bool wanted) {
    return dir && wanted ? std::optional<fs::path>(*dir / name) : std::nullopt;
  };
  std::tie(outcome.trace, outcome.summary) =
      streamed_run(run, run.scenario, file("trace.csv", true), file("messages.csv", run.config.output.messages));
  const SimulationTrace& trace = outcome.trace;

  if (run.config.scenario.baseline) {
    Scenario off = run.scenario;
    off.control_enabled = false;
    off.record_messages = false;
    outcome.baseline = streamed_run(run, off, file("baseline_trace.csv", true), std::nullopt).second;
  }

  if (run.static_vpar() && !trace.ticks.empty()) {
    OracleComparison cmp;
    const VoltageProblem vp = run.final_problem();
    cmp.oracle = reference_solve(vp);
    if (cmp.oracle.status == OracleStatus::optimal) {
      const TickRecord& last = trace.ticks.back();
      cmp.q_error = (last.q - cmp.oracle.q).cwiseAbs().maxCoeff();
      cmp.cost_gap = std::abs(vp.cost.value(last.q) - cmp.oracle.objective) /
                     std::max(std::abs(cmp.oracle.objective), 1e-12);
      cmp.qhat_gap = (last.q - last.q_hat).cwiseAbs().maxCoeff();
      if (trace.ticks.size() >= 2) {
        const TickRecord& prev = trace.ticks[trace.ticks.size() - 2];
        const double dl = (last.lam_up - prev.lam_up).squaredNorm() + (last.lam_low - prev.lam_low).squaredNorm();
        cmp.lambda_step = std::sqrt(dl);
      }
      cmp.kkt = kkt_residual(last.q, split_multipliers(last.xi, last.lam_low, last.lam_up), vp);
    }
    outcome.comparison = cmp;
  }

  const bool settled = !trace.aborted && outcome.summary.convergence_tick >= 0;
  outcome.converged = settled;
  if (outcome.comparison) {
    const OracleComparison& cmp = *outcome.comparison;
    outcome.converged = settled && cmp.oracle.status == OracleStatus::optimal && cmp.q_error < 1e-3 &&
                        cmp.cost_gap < 1e-4;
  }
  outcome.exit_code = trace.aborted ? kExitRunFailure : kExitOk;

  if (dir) {
    const int n = run.net.size();
    json doc = config_block(run.config);
    doc["network"] = {{"buses", n}, {"lines", static_cast<int>(run.net.lines().size())}, {"v0", run.net.v0()}};
    doc["controllable"] = run.buses;
    doc["controller_params"] = params_json(run.params);
    doc["summary"] = summary_json(outcome.summary, trace.controllable);
    doc["converged"] = outcome.converged;
    doc["aborted"] = trace.aborted;
    if (trace.aborted) doc["abort_reason"] = trace.abort_reason;
    if (outcome.baseline) doc["baseline"] = summary_json(*outcome.baseline, trace.controllable);
    if (outcome.comparison) {
      const OracleComparison& cmp = *outcome.comparison;
      json o = {{"status", to_string(cmp.oracle.status)}};
      if (cmp.oracle.status == OracleStatus::optimal) {
        o["q_star"] = bus_map(run.buses, cmp.oracle.q);
        o["objective"] = cmp.oracle.objective;
        o["q_error"] = cmp.q_error;
        o["relative_cost_gap"] = cmp.cost_gap;
        o["qhat_gap"] = cmp.qhat_gap;
        o["lambda_step"] = cmp.lambda_step;
        o["kkt_final"] = kkt_json(cmp.kkt);
      }
      doc["oracle"] = o;
    }
    try {
      doc["certificate"] = certificate_json(run_certificate(run), run.params);
    } catch (const std::exception& e) {
      doc["certificate"] = {{"error", e.what()}};
    }
    write_json(*dir / "summary.json", doc);
  }

  const TraceSummary& s = outcome.summary;
  log << std::setprecision(6) << "ticks " << s.ticks << "  final cost " << s.final_cost << "  max violation "
      << s.max_violation << "  mean violation " << s.mean_violation << "  convergence tick "
      << s.convergence_tick << "  capacity violations " << s.capacity_violations << "\n";
  if (s.q_final.size() == 1) log << "q_final " << std::setprecision(10) << s.q_final(0) << "\n";
  if (outcome.baseline) log << "baseline mean violation " << outcome.baseline->mean_violation << "\n";
  if (outcome.comparison && outcome.comparison->oracle.status == OracleStatus::optimal) {
    log << "oracle q error " << outcome.comparison->q_error << "  relative cost gap "
        << outcome.comparison->cost_gap << "\n";
  }
  if (trace.aborted) log << "run aborted: " << trace.abort_reason << "\n";
  return outcome;
}

int cmd_oracle(const PreparedRun& run, const std::string& out_dir, std::ostream& log) {
  const VoltageProblem vp = run.final_problem();
  const OracleResult r = reference_solve(vp);
  json doc = config_block(run.config);
  doc["status"] = to_string(r.status);
  doc["diagnostic"] = r.diagnostic;
  doc["phase1_value"] = r.phase1_value;
  doc["iterations"] = r.iterations;
  doc["static_vpar"] = run.static_vpar();
  if (r.status == OracleStatus::optimal) {
    doc["q_star"] = bus_map(run.buses, r.q);
    doc["objective"] = r.objective;
    doc["multipliers"] = {{"lam_low", bus_map(run.buses, r.mult.lam_low)},
                          {"lam_up", bus_map(run.buses, r.mult.lam_up)},
                          {"xi_low", bus_map(run.buses, r.mult.xi_low)},
                          {"xi_up", bus_map(run.buses, r.mult.xi_up)}};
    doc["kkt"] = kkt_json(r.kkt);
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json(fs::path(out_dir) / "oracle.json", doc);
  }
  log << "status " << to_string(r.status);
  if (r.status == OracleStatus::optimal) {
    log << std::setprecision(10) << "  objective " << r.objective << "  kkt " << r.kkt.total << "\n";
    if (r.q.size() <= 8) {
      for (std::size_t k = 0; k < run.buses.size(); ++k) log << "q*[" << run.buses[k] << "] = " << r.q(k) << "\n";
    }
    return kExitOk;
  }
  log << "  " << r.diagnostic << "\n";
  return kExitRunFailure;
}

int cmd_certify(const PreparedRun& run, const std::string& out_dir, std::ostream& log) {
  const Certificate cert = run_certificate(run);
  json doc = config_block(run.config);
  doc["controller_params"] = params_json(run.params);
  doc["certificate"] = certificate_json(cert, run.params);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json(fs::path(out_dir) / "certificate.json", doc);
  }
  log << std::setprecision(6) << "alpha_max " << cert.alpha_max << "  rho(0) " << cert.rho(0.0)
      << "  rho(alpha_max/2) " << std::setprecision(17) << cert.rho(cert.alpha_max / 2) << std::setprecision(6)
      << " (1 - rho = " << cert.one_minus_rho(cert.alpha_max / 2) << ")\n"
      << "alpha " << run.params.alpha << "  gamma " << run.params.gamma << "  gamma_max(alpha) "
      << cert.gamma_max(run.params.alpha) << "\n";
  for (const auto& flag : doc["certificate"]["flags"]) log << flag.get<std::string>() << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& network, std::ostream& log) {
  const RadialNetwork net = load_network(network);
  const int n = net.size();
  double x_min = std::numeric_limits<double>::infinity(), x_max = 0.0;
  int depth = 0, leaves = 0;
  for (const Line& l : net.lines()) {
    x_min = std::min(x_min, l.x);
    x_max = std::max(x_max, l.x);
  }
  for (BusId b = 1; b <= n; ++b) {
    depth = std::max(depth, net.depth(b));
    leaves += net.children(b).empty();
  }
  log << "buses " << n << "  lines " << net.lines().size() << "  depth " << depth << "  leaves " << leaves
      << "\nreactance range [" << x_min << ", " << x_max << "]\n";
  try {
    const SensitivityMatrices mats = build_sensitivities(net);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mats.X, Eigen::EigenvaluesOnly);
    const double kappa = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
    log << "cond(X) " << kappa << "  nnz(Y) " << mats.Y.nonZeros() << " (" << n + 2 * (n - static_cast<int>(net.children(0).size()))
        << " expected from adjacency)\n";
  } catch (const ConditioningError& e) {
    log << "FAIL: " << e.what() << "\n";
    return kExitRunFailure;
  }
  log << "ok\n";
  return kExitOk;
}

std::vector<SweepRow> cmd_sweep(const std::vector<std::string>& patterns, const std::string& out_dir,
                                const std::vector<std::string>& overrides, int jobs, std::ostream& log) {
  std::vector<std::string> files;
  for (const std::string& pattern : patterns) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc != 0) throw ConfigError(pattern, 0, "pattern matches no config file");
  }
  if (files.empty()) throw ConfigError("sweep", 0, "no config files given");

  std::vector<std::string> ids(files.size());
  std::map<std::string, int> seen;
  for (std::size_t k = 0; k < files.size(); ++k) {
    std::string id = fs::path(files[k]).stem().string();
    if (seen[id]++ > 0) id += "_" + std::to_string(seen[id] - 1);
    ids[k] = id;
  }

  std::vector<SweepRow> rows(files.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < files.size(); k = next++) {
      SweepRow& row = rows[k];
      row.id = ids[k];
      const auto start = std::chrono::steady_clock::now();
      std::ostringstream run_log;
      try {
        const RunConfig cfg = load_config(files[k], overrides);
        const auto prepared = prepare_run(cfg);
        const RunOutcome out = cmd_run(*prepared, (fs::path(out_dir) / row.id).string(), run_log);
        row.ok = out.exit_code == kExitOk;
        row.converged = out.converged;
        if (out.comparison && out.comparison->oracle.status == OracleStatus::optimal) {
          row.final_gap = out.comparison->cost_gap;
        }
        row.max_violation = out.summary.max_violation;
        row.mean_violation = out.summary.mean_violation;
        if (!row.ok) row.error = out.trace.abort_reason;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.runtime_seconds = seconds_since(start);
      const std::lock_guard<std::mutex> lock(log_mutex);
      log << "[" << row.id << "] " << (row.ok ? "ok" : "FAILED: " + row.error) << "\n";
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(files.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "sweep.csv");
  csv << "# schema_version: " << kSchemaVersion << "\n" << std::setprecision(10);
  csv << "id,ok,converged,final_gap,max_violation,mean_violation,runtime_seconds,error\n";
  log << std::left << std::setw(24) << "id" << std::setw(6) << "ok" << std::setw(11) << "converged"
      << std::setw(14) << "final_gap" << std::setw(14) << "max_viol" << std::setw(10) << "runtime" << "\n";
  for (const SweepRow& r : rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), '"', '\'');
    csv << r.id << "," << r.ok << "," << r.converged << ",";
    if (r.final_gap) csv << *r.final_gap;
    csv << "," << r.max_violation << "," << r.mean_violation << "," << r.runtime_seconds << ",\"" << error
        << "\"\n";
    std::ostringstream gap;
    if (r.final_gap) gap << std::setprecision(3) << *r.final_gap;
    else gap << "-";
    log << std::setw(24) << r.id << std::setw(6) << (r.ok ? "yes" : "no") << std::setw(11)
        << (r.converged ? "yes" : "no") << std::setw(14) << gap.str() << std::setw(14) << std::setprecision(3)
        << r.max_violation << std::setprecision(3) << r.runtime_seconds << "s\n";
  }
  return rows;
}

}  // namespace voltctl
