#include "voltctl/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "voltctl/feeders.hpp"

namespace voltctl {

namespace {

std::string where(const std::string& origin, int line) {
  return line > 0 ? origin + ":" + std::to_string(line) : origin;
}

int line_of(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open " + what + " file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Shortest text that parses back to the same double.
std::string number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
    throw ConfigError(origin_, line_of(node), message);
  }

  void require_map(const YAML::Node& node, const std::string& key) const {
    if (!node.IsMap()) fail(node, key + ": expected a mapping");
  }

  void allow_keys(const YAML::Node& map, const std::string& section,
                  std::initializer_list<const char*> keys) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) {
        fail(kv.first, "unknown key '" + (section.empty() ? k : section + "." + k) + "'");
      }
    }
  }

  template <class T>
  T as(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) fail(node, key + ": expected a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(node, key + ": cannot read '" + node.Scalar() + "' as " + type_name<T>());
    }
  }

  template <class T>
  void get(const YAML::Node& map, const char* key, T& out, const std::string& section) const {
    const YAML::Node node = map[key];
    if (node) out = as<T>(node, section + "." + key);
  }

  template <class T>
  std::vector<T> list(const YAML::Node& node, const std::string& key) const {
    std::vector<T> out;
    if (node.IsScalar()) {
      out.push_back(as<T>(node, key));
      return out;
    }
    if (!node.IsSequence()) fail(node, key + ": expected a number or a list");
    for (const auto& item : node) out.push_back(as<T>(item, key));
    return out;
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, double>) return "a number";
    else if constexpr (std::is_same_v<T, bool>) return "true/false";
    else if constexpr (std::is_same_v<T, std::string>) return "text";
    else return "an integer";
  }

  std::string origin_;
};

template <class E>
E parse_enum(const Reader& r, const YAML::Node& node, const std::string& key,
             std::initializer_list<std::pair<const char*, E>> options) {
  const std::string text = r.as<std::string>(node, key);
  std::string names;
  for (const auto& [name, value] : options) {
    if (text == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  r.fail(node, key + ": '" + text + "' is not one of " + names);
}

void apply_override(YAML::Node& root, const std::string& spec, const std::string& origin) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(origin, 0, "override '" + spec + "' is not key=value");
  }
  std::vector<std::string> parts;
  std::stringstream keys(spec.substr(0, eq));
  for (std::string part; std::getline(keys, part, '.');) parts.push_back(part);
  YAML::Node value;
  try {
    value = YAML::Load(spec.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin, 0, "override '" + spec + "': " + e.msg);
  }
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = cur[parts[i]];
    if (!next || next.IsNull()) {
      cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = cur[parts[i]];
    } else if (!next.IsMap()) {
      throw ConfigError(origin, 0, "override '" + spec + "': '" + parts[i] + "' is not a section");
    }
    cur.reset(next);
  }
  cur[parts.back()] = value;
}

RunConfig read_config(const YAML::Node& root, const Reader& r) {
  RunConfig cfg;
  if (!root.IsMap()) r.fail(root, "config must be a mapping");
  r.allow_keys(root, "", {"schema_version", "name", "network", "seed", "controller", "costs",
                          "limits", "scenario", "output"});

  const YAML::Node version = root["schema_version"];
  if (!version) r.fail(root, "missing schema_version");
  cfg.schema_version = r.as<int>(version, "schema_version");
  if (cfg.schema_version != kSchemaVersion) {
    r.fail(version, "schema_version " + std::to_string(cfg.schema_version) + " is not supported (expected " +
                        std::to_string(kSchemaVersion) + ")");
  }
  r.get(root, "name", cfg.name, "");
  const YAML::Node network = root["network"];
  if (!network) r.fail(root, "missing network");
  cfg.network = r.as<std::string>(network, "network");
  r.get(root, "seed", cfg.seed, "");

  if (const YAML::Node c = root["controller"]) {
    r.require_map(c, "controller");
    r.allow_keys(c, "controller", {"step_rule", "alpha", "beta", "gamma", "c", "d"});
    if (c["step_rule"]) {
      cfg.controller.step_rule = parse_enum<StepRule>(
          r, c["step_rule"], "controller.step_rule",
          {{"suggested", StepRule::suggested}, {"certified", StepRule::certified}, {"manual", StepRule::manual}});
    }
    r.get(c, "alpha", cfg.controller.alpha, "controller");
    r.get(c, "beta", cfg.controller.beta, "controller");
    r.get(c, "gamma", cfg.controller.gamma, "controller");
    r.get(c, "c", cfg.controller.c, "controller");
    if (c["d"]) cfg.controller.d = r.as<double>(c["d"], "controller.d");
    if (!(cfg.controller.c > 0.0)) r.fail(c, "controller.c must be positive");
    if (cfg.controller.d && !(*cfg.controller.d >= 0.0)) r.fail(c["d"], "controller.d must be nonnegative");
    if (cfg.controller.step_rule == StepRule::manual &&
        !(cfg.controller.alpha > 0.0 && cfg.controller.beta > 0.0 && cfg.controller.gamma > 0.0)) {
      r.fail(c, "step_rule manual needs positive alpha, beta and gamma");
    }
  }

  if (const YAML::Node c = root["costs"]) {
    r.require_map(c, "costs");
    r.allow_keys(c, "costs", {"preset", "a", "b"});
    r.get(c, "preset", cfg.costs.preset, "costs");
    if (!cfg.costs.preset.empty() && cfg.costs.preset != "feeder") {
      r.fail(c["preset"], "costs.preset: '" + cfg.costs.preset + "' is not one of feeder");
    }
    if (c["a"]) cfg.costs.a = r.list<double>(c["a"], "costs.a");
    if (c["b"]) cfg.costs.b = r.list<double>(c["b"], "costs.b");
    for (double a : cfg.costs.a) {
      if (!(a >= 0.0)) r.fail(c["a"], "costs.a must be nonnegative");
    }
  }

  if (const YAML::Node l = root["limits"]) {
    r.require_map(l, "limits");
    r.allow_keys(l, "limits", {"q_abs", "v_low", "v_high"});
    r.get(l, "q_abs", cfg.limits.q_abs, "limits");
    r.get(l, "v_low", cfg.limits.v_low, "limits");
    r.get(l, "v_high", cfg.limits.v_high, "limits");
    if (!(cfg.limits.q_abs > 0.0)) r.fail(l, "limits.q_abs must be positive");
    if (!(cfg.limits.v_low < cfg.limits.v_high)) r.fail(l, "limits.v_low must be below limits.v_high");
  }

  if (const YAML::Node s = root["scenario"]) {
    ScenarioConfig& sc = cfg.scenario;
    r.require_map(s, "scenario");
    r.allow_keys(s, "scenario", {"plant", "horizon", "tick_seconds", "v_par", "profile", "noise_sigma",
                                 "meas_delay", "comm_delay_max", "model_error_pct", "model_error_mode",
                                 "controllable", "baseline"});
    if (s["plant"]) {
      sc.plant = parse_enum<PlantKind>(r, s["plant"], "scenario.plant",
                                       {{"linearized", PlantKind::linearized}, {"nonlinear", PlantKind::nonlinear}});
    }
    r.get(s, "horizon", sc.horizon, "scenario");
    r.get(s, "tick_seconds", sc.tick_seconds, "scenario");
    if (s["v_par"]) sc.v_par = r.list<double>(s["v_par"], "scenario.v_par");
    r.get(s, "noise_sigma", sc.noise_sigma, "scenario");
    r.get(s, "meas_delay", sc.meas_delay, "scenario");
    r.get(s, "comm_delay_max", sc.comm_delay_max, "scenario");
    r.get(s, "model_error_pct", sc.model_error_pct, "scenario");
    if (s["model_error_mode"]) {
      sc.model_error_mode = parse_enum<ModelErrorMode>(
          r, s["model_error_mode"], "scenario.model_error_mode",
          {{"branch", ModelErrorMode::branch}, {"entry", ModelErrorMode::entry}});
    }
    if (s["controllable"]) sc.controllable = r.list<BusId>(s["controllable"], "scenario.controllable");
    r.get(s, "baseline", sc.baseline, "scenario");

    if (const YAML::Node p = s["profile"]) {
      r.require_map(p, "scenario.profile");
      r.allow_keys(p, "scenario.profile", {"kind", "path", "seed", "depth"});
      r.get(p, "kind", sc.profile.kind, "scenario.profile");
      r.get(p, "path", sc.profile.path, "scenario.profile");
      r.get(p, "seed", sc.profile.seed, "scenario.profile");
      r.get(p, "depth", sc.profile.depth, "scenario.profile");
      const std::set<std::string> kinds = {"none", "static_heavy", "daily", "csv"};
      if (!kinds.count(sc.profile.kind)) {
        r.fail(p, "scenario.profile.kind: '" + sc.profile.kind + "' is not one of none, static_heavy, daily, csv");
      }
      if (sc.profile.kind == "csv" && sc.profile.path.empty()) r.fail(p, "scenario.profile.path is required for csv");
    }

    if (sc.horizon < 0) r.fail(s["horizon"], "scenario.horizon must be nonnegative");
    if (!(sc.tick_seconds > 0.0)) r.fail(s, "scenario.tick_seconds must be positive");
    if (sc.noise_sigma < 0.0) r.fail(s["noise_sigma"], "scenario.noise_sigma must be nonnegative");
    if (sc.meas_delay < 0) r.fail(s["meas_delay"], "scenario.meas_delay must be nonnegative");
    if (sc.comm_delay_max < 0) r.fail(s["comm_delay_max"], "scenario.comm_delay_max must be nonnegative");
    if (!(sc.model_error_pct >= 0.0 && sc.model_error_pct < 1.0)) {
      r.fail(s["model_error_pct"], "scenario.model_error_pct must lie in [0, 1)");
    }
    if (!sc.v_par.empty() && sc.plant == PlantKind::nonlinear) {
      r.fail(s["v_par"], "scenario.v_par only applies to the linearized plant");
    }
  }

  if (const YAML::Node o = root["output"]) {
    r.require_map(o, "output");
    r.allow_keys(o, "output", {"dir", "trace_stride", "messages"});
    r.get(o, "dir", cfg.output.dir, "output");
    r.get(o, "trace_stride", cfg.output.trace_stride, "output");
    r.get(o, "messages", cfg.output.messages, "output");
    if (cfg.output.trace_stride < 1) r.fail(o, "output.trace_stride must be at least 1");
  }
  return cfg;
}

YAML::Node load_yaml(const std::string& text, const std::string& origin) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin, e.mark.is_null() ? 0 : e.mark.line + 1, e.msg);
  }
}

RadialNetwork builtin_network(const std::string& name) {
  if (name == "builtin:sce56") return sce_like_feeder();
  if (name == "builtin:six_bus") return six_bus_illustration();
  throw ConfigError(name, 0, "unknown builtin network (expected builtin:sce56 or builtin:six_bus)");
}

}  // namespace

ConfigError::ConfigError(const std::string& origin, int line, const std::string& message)
    : std::runtime_error(where(origin, line) + ": " + message), line_(line) {}

const char* to_string(StepRule rule) {
  switch (rule) {
    case StepRule::suggested: return "suggested";
    case StepRule::certified: return "certified";
    case StepRule::manual: return "manual";
  }
  return "?";
}

bool RunConfig::operator==(const RunConfig& o) const {
  return schema_version == o.schema_version && name == o.name && network == o.network && seed == o.seed &&
         controller == o.controller && costs == o.costs && limits == o.limits && scenario == o.scenario &&
         output == o.output;
}

RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::vector<std::string>& overrides) {
  YAML::Node root = load_yaml(text, origin);
  if (!root.IsMap()) throw ConfigError(origin, line_of(root), "config must be a mapping");
  for (const std::string& o : overrides) apply_override(root, o, origin);
  try {
    return read_config(root, Reader(origin));
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin, e.mark.is_null() ? 0 : e.mark.line + 1, e.msg);
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = parse_config(read_file(path, "config"), path, overrides);
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  cfg.base_dir = parent.empty() ? "." : parent.string();
  return cfg;
}

std::string resolve_path(const RunConfig& config, const std::string& path) {
  if (path.rfind("builtin:", 0) == 0) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(config.base_dir) / p).lexically_normal().string();
}

std::string emit_config(const RunConfig& cfg) {
  YAML::Emitter out;
  auto num = [](double x) { return number(x); };
  auto nums = [&](const std::vector<double>& xs) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : xs) out << num(x);
    out << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << cfg.schema_version;
  out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << cfg.name;
  out << YAML::Key << "network" << YAML::Value << YAML::DoubleQuoted << cfg.network;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;

  out << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "step_rule" << YAML::Value << to_string(cfg.controller.step_rule);
  out << YAML::Key << "alpha" << YAML::Value << num(cfg.controller.alpha);
  out << YAML::Key << "beta" << YAML::Value << num(cfg.controller.beta);
  out << YAML::Key << "gamma" << YAML::Value << num(cfg.controller.gamma);
  out << YAML::Key << "c" << YAML::Value << num(cfg.controller.c);
  if (cfg.controller.d) out << YAML::Key << "d" << YAML::Value << num(*cfg.controller.d);
  out << YAML::EndMap;

  out << YAML::Key << "costs" << YAML::Value << YAML::BeginMap;
  if (!cfg.costs.preset.empty()) out << YAML::Key << "preset" << YAML::Value << cfg.costs.preset;
  out << YAML::Key << "a" << YAML::Value;
  nums(cfg.costs.a);
  out << YAML::Key << "b" << YAML::Value;
  nums(cfg.costs.b);
  out << YAML::EndMap;

  out << YAML::Key << "limits" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "q_abs" << YAML::Value << num(cfg.limits.q_abs);
  out << YAML::Key << "v_low" << YAML::Value << num(cfg.limits.v_low);
  out << YAML::Key << "v_high" << YAML::Value << num(cfg.limits.v_high);
  out << YAML::EndMap;

  const ScenarioConfig& s = cfg.scenario;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "plant" << YAML::Value << to_string(s.plant);
  out << YAML::Key << "horizon" << YAML::Value << s.horizon;
  out << YAML::Key << "tick_seconds" << YAML::Value << num(s.tick_seconds);
  if (!s.v_par.empty()) {
    out << YAML::Key << "v_par" << YAML::Value;
    nums(s.v_par);
  }
  out << YAML::Key << "profile" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << s.profile.kind;
  if (!s.profile.path.empty()) out << YAML::Key << "path" << YAML::Value << YAML::DoubleQuoted << s.profile.path;
  out << YAML::Key << "seed" << YAML::Value << s.profile.seed;
  out << YAML::Key << "depth" << YAML::Value << num(s.profile.depth);
  out << YAML::EndMap;
  out << YAML::Key << "noise_sigma" << YAML::Value << num(s.noise_sigma);
  out << YAML::Key << "meas_delay" << YAML::Value << s.meas_delay;
  out << YAML::Key << "comm_delay_max" << YAML::Value << s.comm_delay_max;
  out << YAML::Key << "model_error_pct" << YAML::Value << num(s.model_error_pct);
  out << YAML::Key << "model_error_mode" << YAML::Value << to_string(s.model_error_mode);
  if (!s.controllable.empty()) {
    out << YAML::Key << "controllable" << YAML::Value << YAML::Flow << s.controllable;
  }
  out << YAML::Key << "baseline" << YAML::Value << s.baseline;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << cfg.output.dir;
  out << YAML::Key << "trace_stride" << YAML::Value << cfg.output.trace_stride;
  out << YAML::Key << "messages" << YAML::Value << cfg.output.messages;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

RadialNetwork parse_network(const std::string& text, const std::string& origin) {
  const YAML::Node root = load_yaml(text, origin);
  const Reader r(origin);
  if (!root.IsMap()) r.fail(root, "network file must be a mapping");
  r.allow_keys(root, "", {"schema_version", "v0", "lines"});
  const YAML::Node version = root["schema_version"];
  if (!version) r.fail(root, "missing schema_version");
  if (r.as<int>(version, "schema_version") != kSchemaVersion) r.fail(version, "unsupported schema_version");
  double v0 = 1.0;
  r.get(root, "v0", v0, "");
  const YAML::Node lines_node = root["lines"];
  if (!lines_node || !lines_node.IsSequence()) r.fail(root, "lines: expected a list");
  std::vector<Line> lines;
  for (const auto& item : lines_node) {
    Line l;
    if (item.IsSequence()) {
      if (item.size() != 4) r.fail(item, "line: expected [from, to, r, x]");
      l = {r.as<int>(item[0], "from"), r.as<int>(item[1], "to"), r.as<double>(item[2], "r"),
           r.as<double>(item[3], "x")};
    } else if (item.IsMap()) {
      r.allow_keys(item, "line", {"from", "to", "r", "x"});
      for (const char* k : {"from", "to", "r", "x"}) {
        if (!item[k]) r.fail(item, std::string("line: missing ") + k);
      }
      l = {r.as<int>(item["from"], "from"), r.as<int>(item["to"], "to"), r.as<double>(item["r"], "r"),
           r.as<double>(item["x"], "x")};
    } else {
      r.fail(item, "line: expected a mapping or [from, to, r, x]");
    }
    lines.push_back(l);
  }
  try {
    return RadialNetwork(static_cast<int>(lines.size()), v0, lines);
  } catch (const TopologyError& e) {
    r.fail(lines_node, e.what());
  }
}

RadialNetwork load_network(const std::string& path) {
  if (path.rfind("builtin:", 0) == 0) return builtin_network(path);
  return parse_network(read_file(path, "network"), path);
}

std::string emit_network(const RadialNetwork& net) {
  std::ostringstream os;
  os << "schema_version: " << kSchemaVersion << "\nv0: " << number(net.v0()) << "\nlines:\n";
  for (const Line& l : net.lines()) {
    os << "  - {from: " << l.from << ", to: " << l.to << ", r: " << number(l.r) << ", x: " << number(l.x)
       << "}\n";
  }
  return os.str();
}

ProfileSeries parse_profile_csv(const std::string& text, int n, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  ProfileSeries series;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != 2 * n) {
      throw ConfigError(origin, line_no,
                        "expected " + std::to_string(2 * n) + " columns, got " + std::to_string(cells.size()));
    }
    if (!header_seen) {
      for (int k = 0; k < 2 * n; ++k) {
        const std::string expected = (k < n ? "p_" : "q_") + std::to_string(k % n + 1);
        if (cells[k] != expected) {
          throw ConfigError(origin, line_no, "header column " + std::to_string(k + 1) + " should be " + expected);
        }
      }
      header_seen = true;
      continue;
    }
    InjectionProfile row{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int k = 0; k < 2 * n; ++k) {
      const std::string& cell = cells[k];
      double value = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ConfigError(origin, line_no, "column " + std::to_string(k + 1) + ": '" + cell + "' is not a number");
      }
      (k < n ? row.p : row.q)(k % n) = value;
    }
    series.rows.push_back(std::move(row));
  }
  if (!header_seen) throw ConfigError(origin, line_no, "missing header p_1..p_n,q_1..q_n");
  if (series.rows.empty()) throw ConfigError(origin, line_no, "profile has no rows");
  return series;
}

ProfileSeries load_profile_csv(const std::string& path, int n) {
  return parse_profile_csv(read_file(path, "profile"), n, path);
}

}  // namespace voltctl
