#include <gtest/gtest.h>

#include "uncertain/config.hpp"

namespace {

using namespace uncertain;

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, DefaultValues) {
  const auto c = parse_config_text("{}");
  EXPECT_TRUE(c.is_dynamic());
  EXPECT_EQ(c.dynamic.params.t_d, 0.10);
  EXPECT_EQ(c.dynamic.params.t_max, 0.95);
  EXPECT_EQ(c.dynamic.params.P, 1.2);
  EXPECT_EQ(c.dynamic.params.r, 0.70);
  EXPECT_EQ(c.dynamic.params.warmup, 100u);
  EXPECT_EQ(c.environment, ProcessEnv::kUncertain);
  EXPECT_EQ(c.timeout_factor, 2.0);
}

TEST(Config, FullDocument) {
  const auto c = parse_config_text(R"({
    "mode": "static", "static_threshold": 0.5,
    "dynamic": {"t_d": 0.2, "t_max": 0.9, "P": 1.5, "r": 0.6, "warmup": 10, "gate": "per_name",
                "escalate_all_names": true, "strict_behavior_warmup": true},
    "environment": "standard", "strategy_set": "non-intrusive",
    "enabled_strategies": ["delay", "error_return"],
    "whitelist": ["/usr/bin/vim"],
    "protected_paths": {"prefixes": ["/opt/keep"], "keywords": ["secret"]},
    "system_binary_dirs": ["/bin/"],
    "connection": {"redirect": "honeypot", "honeypot_addr": "127.0.0.1:9", "restrict_connect": true},
    "offset_range": [-10, 10], "corrupt_max_bytes": 4,
    "timeout_factor": 3.0, "runtime_slack_seconds": 0.5, "seed": 99
  })");
  EXPECT_EQ(c.static_threshold, 0.5);
  EXPECT_EQ(c.dynamic.gate, WarmupGate::kPerName);
  EXPECT_TRUE(c.dynamic.escalate_all_names);
  EXPECT_EQ(c.environment, ProcessEnv::kStandard);
  EXPECT_EQ(c.strategy_set, StrategySet::kNonIntrusive);
  EXPECT_EQ(c.engine.enabled.size(), 2u);
  EXPECT_TRUE(c.protection.matches("/opt/keep/x"));
  EXPECT_FALSE(c.protection.matches("/lib/x"));
  EXPECT_EQ(c.engine.redirect, RedirectMode::kHoneypot);
  EXPECT_TRUE(c.engine.applicability.restrict_connect);
  EXPECT_EQ(c.engine.offset_min, -10);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.strategy_set_for("/usr/bin/vim"), StrategySet::kNonIntrusive);
}

TEST(Config, UnknownKeysAreNamed) {
  EXPECT_NE(error_of(R"({"thresold": 0.1})").find("thresold"), std::string::npos);
  EXPECT_NE(error_of(R"({"dynamic": {"tmax": 0.9}})").find("dynamic.tmax"), std::string::npos);
  EXPECT_NE(error_of(R"({"connection": {"port": 1}})").find("connection.port"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
  EXPECT_FALSE(error_of(R"({"mode": "sometimes"})").empty());
  EXPECT_FALSE(error_of(R"({"mode": "static", "static_threshold": 1.5})").empty());
  EXPECT_FALSE(error_of(R"({"static_threshold": 0.5})").empty());
  EXPECT_FALSE(error_of(R"({"dynamic": {"t_d": 0.99}})").empty());
  EXPECT_FALSE(error_of(R"({"dynamic": {"warmup": -1}})").empty());
  EXPECT_FALSE(error_of(R"({"enabled_strategies": ["Teleport"]})").empty());
  EXPECT_FALSE(error_of(R"({"timeout_factor": "2"})").empty());
  EXPECT_FALSE(error_of("[1, 2]").empty());
  EXPECT_FALSE(error_of("{").empty());
}

TEST(Config, SerializedFormParsesBackIdentically) {
  const auto c = parse_config_text(R"({"mode": "static", "static_threshold": 0.25, "seed": 5,
                                       "whitelist": ["a"], "offset_range": [-1, 2]})");
  const auto text = config_to_json(c).dump();
  EXPECT_EQ(config_to_json(parse_config_text(text)).dump(), text);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError); }

}  // namespace
