#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltctl/grid.hpp"
#include "voltctl/harness.hpp"

namespace voltctl {

inline constexpr int kSchemaVersion = 1;

/// Bad config, network or profile input. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& origin, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

enum class StepRule { suggested, certified, manual };
const char* to_string(StepRule rule);

struct ControllerConfig {
  StepRule step_rule = StepRule::suggested;
  double alpha = 0.0;  // manual only
  double beta = 0.0;
  double gamma = 0.0;
  double c = 1.0;
  /// Defaults to 1 when every bus is controllable and 0 on a subset.
  std::optional<double> d;

  bool operator==(const ControllerConfig&) const = default;
};

/// Per-bus f_i(q) = a_i q^2 + b_i q. A single entry applies to every bus.
/// preset "feeder" takes the costs of the synthetic 56-bus feeder instead.
struct CostConfig {
  std::string preset;
  std::vector<double> a{1.0};
  std::vector<double> b{0.0};

  bool operator==(const CostConfig&) const = default;
};

struct LimitsConfig {
  double q_abs = 0.2;
  double v_low = 0.95 * 0.95;
  double v_high = 1.05 * 1.05;

  bool operator==(const LimitsConfig&) const = default;
};

/// kind: none, static_heavy, daily or csv. `path` is for csv; `seed` 0 means
/// the run seed.
struct ProfileConfig {
  std::string kind = "none";
  std::string path;
  std::uint64_t seed = 0;
  double depth = 0.01;

  bool operator==(const ProfileConfig&) const = default;
};

struct ScenarioConfig {
  PlantKind plant = PlantKind::linearized;
  long horizon = 1000;
  double tick_seconds = 6.0;
  /// Linearized plant only; overrides the profile when present.
  std::vector<double> v_par;
  ProfileConfig profile;
  double noise_sigma = 0.0;
  int meas_delay = 0;
  int comm_delay_max = 0;
  double model_error_pct = 0.0;
  ModelErrorMode model_error_mode = ModelErrorMode::branch;
  std::vector<BusId> controllable;
  /// Also run the uncontrolled q = 0 loop on the same scenario.
  bool baseline = false;

  bool operator==(const ScenarioConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  long trace_stride = 1;
  bool messages = false;

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  /// File path (relative to the config file) or builtin:sce56 / builtin:six_bus.
  std::string network;
  std::uint64_t seed = 0;
  ControllerConfig controller;
  CostConfig costs;
  LimitsConfig limits;
  ScenarioConfig scenario;
  OutputConfig output;
  /// Directory relative paths resolve against. Not serialized.
  std::string base_dir = ".";

  bool operator==(const RunConfig& other) const;
};

/// Parses YAML text. `overrides` are "dotted.key=value" pairs applied before
/// validation; values are YAML scalars or flow sequences.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                       const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
std::string emit_config(const RunConfig& config);

std::string resolve_path(const RunConfig& config, const std::string& path);

/// Network file:
///   schema_version: 1
///   v0: 1.0
///   lines: [{from: 0, to: 1, r: 0.01, x: 0.02}, ...]
RadialNetwork parse_network(const std::string& text, const std::string& origin = "<network>");
RadialNetwork load_network(const std::string& path_or_builtin);
std::string emit_network(const RadialNetwork& net);

/// Wide CSV, one row per tick, header p_1..p_n,q_1..q_n.
ProfileSeries parse_profile_csv(const std::string& text, int n, const std::string& origin = "<profile>");
ProfileSeries load_profile_csv(const std::string& path, int n);

}  // namespace voltctl
