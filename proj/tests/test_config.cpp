#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "delaygame/config.hpp"

using namespace delaygame;
using nlohmann::json;

namespace {

std::string configs() { return std::string(DELAYGAME_SOURCE_DIR) + "/configs/"; }

bool mentions(const ConfigError& e, const std::string& text) {
  for (const auto& v : e.violations())
    if (v.find(text) != std::string::npos) return true;
  return false;
}

json lq_doc() {
  std::ifstream in(configs() + "lq_delay.json");
  return json::parse(in);
}

}  // namespace

TEST(LoadConfig, ShippedConfigsAreValid) {
  for (const char* name : {"pension_baseline.json", "lq_delay.json", "lq_h4a.json",
                           "general_random.json", "general_no_delay.json"}) {
    EXPECT_NO_THROW(load_config(configs() + name)) << name;
  }
}

TEST(LoadConfig, PensionBaselineValues) {
  const ModelConfig c = load_config(configs() + "pension_baseline.json");
  EXPECT_EQ(c.kind, ModelKind::Pension);
  EXPECT_EQ(c.grid.n_steps, 100);
  EXPECT_DOUBLE_EQ(c.pension.delay, 0.25);
  EXPECT_DOUBLE_EQ(c.pension.g(0.5), 0.3);
  EXPECT_EQ(c.simulation.m_paths, 10000);
  EXPECT_EQ(c.mode, DiscountMode::Derived);
}

TEST(LoadConfig, PositiveControlWeightRejected) {
  json d = lq_doc();
  d["lq"]["player1"]["R"] = 1.0;
  try {
    parse_config(d);
    FAIL() << "accepted R_1 > 0";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "R_i must be negative definite"));
  }
}

TEST(LoadConfig, MisalignedDelayRejected) {
  json d = lq_doc();
  d["grid"] = {{"T", 1.0}, {"delta", 0.3}, {"n_steps", 8}};
  try {
    parse_config(d);
    FAIL() << "accepted misaligned delay";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "not a multiple"));
  }
}

TEST(LoadConfig, EveryViolationReported) {
  json d = lq_doc();
  d["lq"]["player1"]["R"] = 1.0;
  d["lq"]["player2"]["O"] = 2.0;
  d["simulation"]["m_paths"] = 1;
  d["solver"]["damping"] = 1.5;
  try {
    parse_config(d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.violations().size(), 4u);
    EXPECT_TRUE(mentions(e, "m_paths"));
    EXPECT_TRUE(mentions(e, "damping"));
    EXPECT_TRUE(mentions(e, "O_2"));
  }
}

TEST(LoadConfig, DimensionMismatchNamesBothShapes) {
  json d = lq_doc();
  d["lq"]["system"]["A"] = json::array({json::array({0.1, 0.0}), json::array({0.0, 0.1})});
  try {
    parse_config(d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "lq.system.A: is 2x2, expected 1x1"));
  }
}

TEST(LoadConfig, ParseErrorHasLineAndColumn) {
  const auto path = std::filesystem::temp_directory_path() / "delaygame_broken.json";
  {
    std::ofstream out(path);
    out << "{\n  \"kind\": \"lq\",\n  \"grid\": {\"T\": 1.0,, }\n}\n";
  }
  try {
    load_config(path.string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(LoadConfig, NamedTimeForms) {
  json d;
  std::ifstream(configs() + "pension_baseline.json") >> d;
  d["pension"]["r"] = {{"form", "linear"}, {"intercept", 0.03}, {"slope", 0.01}};
  d["pension"]["g"] = {{"form", "piecewise"}, {"breaks", {0.0, 0.5}}, {"values", {0.2, 0.4}}};
  const ModelConfig c = parse_config(d);
  EXPECT_DOUBLE_EQ(c.pension.r(1.0), 0.04);
  EXPECT_DOUBLE_EQ(c.pension.g(0.25), 0.2);
  EXPECT_DOUBLE_EQ(c.pension.g(0.75), 0.4);
  d["pension"]["g"] = {{"form", "cubic"}};
  EXPECT_THROW(parse_config(d), ConfigError);
}

TEST(LoadConfig, UnknownKindAndMissingGrid) {
  try {
    parse_config(json{{"kind", "other"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "kind"));
    EXPECT_TRUE(mentions(e, "grid"));
  }
}

TEST(Overrides, AppliedAndEchoed) {
  ModelConfig c = load_config(configs() + "pension_baseline.json");
  Overrides o;
  o.paths = 500;
  o.steps = 40;
  o.seed = 9;
  o.mode = DiscountMode::Paper;
  apply_overrides(c, o);
  EXPECT_EQ(c.simulation.m_paths, 500);
  EXPECT_EQ(c.grid.n_steps, 40);
  EXPECT_EQ(c.simulation.master_seed, 9u);
  EXPECT_EQ(c.mode, DiscountMode::Paper);
  EXPECT_EQ(c.source["simulation"]["m_paths"], 500);
  EXPECT_EQ(c.source["pension"]["mode"], "paper");
  Overrides bad;
  bad.steps = 30;  // 0.25 is not a multiple of 1/30
  EXPECT_THROW(apply_overrides(c, bad), ConfigError);
}
