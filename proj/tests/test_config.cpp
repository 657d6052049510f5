#include "voltctl/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "voltctl/commands.hpp"
#include "voltctl/feeders.hpp"

namespace voltctl {
namespace {

namespace fs = std::filesystem;

const std::string kMinimal = "schema_version: 1\nnetwork: builtin:six_bus\n";

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

TEST(ConfigTest, DefaultsFromMinimalConfig) {
  const RunConfig cfg = parse_config(kMinimal);
  EXPECT_EQ(cfg.network, "builtin:six_bus");
  EXPECT_EQ(cfg.controller.step_rule, StepRule::suggested);
  EXPECT_FALSE(cfg.controller.d.has_value());
  EXPECT_EQ(cfg.scenario.plant, PlantKind::linearized);
  EXPECT_EQ(cfg.limits.v_low, 0.95 * 0.95);
  EXPECT_EQ(cfg.scenario.model_error_mode, ModelErrorMode::branch);
}

TEST(ConfigTest, RoundTripsBundledConfigs) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(VOLTCTL_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    const RunConfig cfg = load_config(entry.path().string());
    const std::string text = emit_config(cfg);
    EXPECT_EQ(parse_config(text), cfg) << entry.path() << "\n" << text;
    ++count;
  }
  EXPECT_GE(count, 5);
}

TEST(ConfigTest, RoundTripKeepsAwkwardDoubles) {
  RunConfig cfg = parse_config(kMinimal);
  cfg.controller.step_rule = StepRule::manual;
  cfg.controller.alpha = 0.1 + 0.2;
  cfg.controller.beta = 1e-300;
  cfg.controller.gamma = 1.0 / 3.0;
  cfg.controller.d = 0.0;
  cfg.scenario.v_par = {0.9025, 1.0 / 7.0, 1.1025, 0.95, 0.96, 0.97};
  cfg.scenario.controllable = {1, 3};
  cfg.name = "quoted: name";
  EXPECT_EQ(parse_config(emit_config(cfg)), cfg);
}

TEST(ConfigTest, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("schema_version: 1\nnetwork: x\nscenario:\n  horizon: 10\n  hoirzon: 5\n"), 5);
  EXPECT_EQ(error_line("schema_version: 1\nnetwork: x\ncontroller:\n  c: abc\n"), 4);
  EXPECT_EQ(error_line("schema_version: 2\nnetwork: x\n"), 1);
  EXPECT_EQ(error_line("schema_version: 1\nnetwork: x\nscenario:\n  plant: dc\n"), 4);
  EXPECT_EQ(error_line("schema_version: 1\nnetwork: x\nscenario: [1, 2\n"), 4);
  EXPECT_EQ(error_line("schema_version: 1\nnetwork: x\nscenario:\n  model_error_pct: 1.5\n"), 4);
  try {
    parse_config("schema_version: 1\nnetwork: x\nscenario:\n  hoirzon: 5\n", "cfg.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.yaml:4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("scenario.hoirzon"), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, RequiresSchemaVersionAndNetwork) {
  EXPECT_THROW(parse_config("network: x\n"), ConfigError);
  EXPECT_THROW(parse_config("schema_version: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("- 1\n- 2\n"), ConfigError);
  EXPECT_THROW(parse_config(kMinimal + "controller:\n  step_rule: manual\n  alpha: 0.1\n"), ConfigError);
}

TEST(ConfigTest, OverridesReplaceAndCreateKeys) {
  const RunConfig cfg =
      parse_config(kMinimal + "scenario:\n  horizon: 10\n", "<t>",
                   {"scenario.horizon=500", "seed=9", "controller.d=0.5", "scenario.controllable=[1, 3]",
                    "scenario.profile.kind=daily"});
  EXPECT_EQ(cfg.scenario.horizon, 500);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.controller.d, 0.5);
  EXPECT_EQ(cfg.scenario.controllable, (std::vector<BusId>{1, 3}));
  EXPECT_EQ(cfg.scenario.profile.kind, "daily");
  EXPECT_THROW(parse_config(kMinimal, "<t>", {"novalue"}), ConfigError);
  EXPECT_THROW(parse_config(kMinimal, "<t>", {"network.x=1"}), ConfigError);
  EXPECT_THROW(parse_config(kMinimal, "<t>", {"scenario.bogus=1"}), ConfigError);
}

TEST(NetworkFileTest, RoundTripAndErrors) {
  const RadialNetwork net = random_radial_network(9, 4);
  const RadialNetwork back = parse_network(emit_network(net));
  ASSERT_EQ(back.size(), 9);
  EXPECT_EQ(build_RX(back).X, build_RX(net).X);

  const RadialNetwork seq = parse_network("schema_version: 1\nlines:\n  - [0, 1, 0.1, 0.2]\n  - [1, 2, 0.05, 0.1]\n");
  EXPECT_NEAR(build_RX(seq).X(1, 1), 0.6, 1e-15);

  try {
    parse_network("schema_version: 1\nlines:\n  - [0, 1, 0.1, 0.2]\n  - {from: 1, to: 2, r: 0.1, x: oops}\n", "n.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 4);
  }
  EXPECT_THROW(parse_network("schema_version: 1\nlines:\n  - [1, 2, 0.1, 0.2]\n  - [2, 1, 0.1, 0.2]\n"),
               ConfigError);
  EXPECT_THROW(load_network("/nonexistent/net.yaml"), ConfigError);
  EXPECT_THROW(load_network("builtin:nothing"), ConfigError);
  EXPECT_EQ(load_network("builtin:sce56").size(), 55);
}

TEST(ProfileCsvTest, ParsesAndReportsLines) {
  const ProfileSeries s = parse_profile_csv("# comment\np_1,p_2,q_1,q_2\n-0.1,-0.2,0.01,0.02\n0,0,0,0\n", 2);
  ASSERT_EQ(s.size(), 2);
  EXPECT_EQ(s.rows[0].p(1), -0.2);
  EXPECT_EQ(s.rows[0].q(0), 0.01);
  try {
    parse_profile_csv("p_1,p_2,q_1,q_2\n1,2,3,4\n1,2,x,4\n", 2, "prof.csv");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_profile_csv("p_1,q_1\n", 1), ConfigError);
  EXPECT_THROW(parse_profile_csv("p_2,q_1\n1,2\n", 1), ConfigError);
  EXPECT_THROW(parse_profile_csv("p_1,p_2,q_1,q_2\n1,2,3\n", 2), ConfigError);
}

TEST(PrepareTest, SubsetDefaultsToZeroLossWeight) {
  const RunConfig cfg = parse_config(kMinimal + "scenario:\n  controllable: [1, 3, 5, 6]\n");
  const auto run = prepare_run(cfg);
  EXPECT_EQ(run->problem.d, 0.0);
  EXPECT_EQ(run->config.controller.d, 0.0);
  EXPECT_EQ(run->buses, (std::vector<BusId>{1, 3, 5, 6}));
  EXPECT_EQ(prepare_run(parse_config(kMinimal))->problem.d, 1.0);
  EXPECT_EQ(prepare_run(parse_config(kMinimal + "controller:\n  d: 0.25\n"))->params.d, 0.25);
}

TEST(PrepareTest, RejectsMismatchedLengths) {
  EXPECT_THROW(prepare_run(parse_config(kMinimal + "costs:\n  a: [1, 2]\n")), ConfigError);
  EXPECT_THROW(prepare_run(parse_config(kMinimal + "scenario:\n  v_par: [1, 1]\n")), ConfigError);
  EXPECT_THROW(prepare_run(parse_config(kMinimal + "scenario:\n  controllable: [7]\n")), ConfigError);
  EXPECT_THROW(prepare_run(parse_config(kMinimal + "costs:\n  a: 0\n  b: 0\ncontroller:\n  d: 0\n")),
               ConfigError);
}

TEST(PrepareTest, CertifiedStepRuleUsesCertificate) {
  const auto run = prepare_run(parse_config(kMinimal + "controller:\n  step_rule: certified\n"));
  const Certificate cert = run_certificate(*run);
  EXPECT_NEAR(run->params.alpha, cert.alpha_max / 2, 1e-12 * cert.alpha_max);
  EXPECT_LE(run->params.gamma, cert.gamma_max(run->params.alpha));
}

TEST(CommandTest, SingleBusRunAndOracle) {
  const auto run = prepare_run(load_config(std::string(VOLTCTL_CONFIG_DIR) + "/single_bus.yaml"));
  std::ostringstream log;
  const RunOutcome out = cmd_run(*run, "", log);
  ASSERT_EQ(out.summary.q_final.size(), 1);
  EXPECT_NEAR(out.summary.q_final(0), 0.0025, 1e-6);
  ASSERT_TRUE(out.comparison);
  EXPECT_NEAR(out.comparison->oracle.q(0), 0.0025, 1e-9);
  EXPECT_TRUE(out.converged);
  EXPECT_EQ(cmd_oracle(*run, "", log), kExitOk);
}

TEST(CommandTest, InfeasibleOracleReported) {
  const auto run = prepare_run(load_config(std::string(VOLTCTL_CONFIG_DIR) + "/single_bus_infeasible.yaml"));
  std::ostringstream log;
  EXPECT_EQ(cmd_oracle(*run, "", log), kExitRunFailure);
  EXPECT_NE(log.str().find("infeasible"), std::string::npos);
}

TEST(CommandTest, ValidateFlagsIllConditionedNetwork) {
  const fs::path dir = fs::temp_directory_path() / "voltctl_validate_test";
  fs::create_directories(dir);
  const fs::path file = dir / "bad.yaml";
  {
    std::ofstream out(file);
    out << "schema_version: 1\nlines:\n  - [0, 1, 0, 1]\n  - [1, 2, 0, 1e-15]\n  - [2, 3, 0, 1]\n";
  }
  std::ostringstream log;
  EXPECT_EQ(cmd_validate(file.string(), log), kExitRunFailure);
  EXPECT_EQ(cmd_validate("builtin:six_bus", log), kExitOk);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace voltctl
