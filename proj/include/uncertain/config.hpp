#pragma once

// PolicyConfig and its JSON form. Parsing is fail-closed: unknown keys,
// wrong types and out-of-range values are all rejected.

#include <fnmatch.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "uncertain/policy_core.hpp"
#include "uncertain/strategy_engine.hpp"

namespace uncertain {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicyConfig {
  // Set means static mode with this value; empty means dynamic mode.
  std::optional<double> static_threshold;
  DynamicOptions dynamic;
  ProcessEnv environment = ProcessEnv::kUncertain;
  StrategySet strategy_set = StrategySet::kIntrusive;
  std::vector<std::string> whitelist;
  ProtectionRules protection;
  BehaviorRules behavior;
  EngineOptions engine;
  double timeout_factor = 2.0;
  // Absolute slack added to factor * baseline runtime; absorbs timer noise on
  // very short programs.
  double runtime_slack_seconds = 0.25;
  std::uint64_t seed = 0;

  bool is_dynamic() const { return !static_threshold.has_value(); }

  bool whitelisted(const std::string& program) const {
    for (const auto& pattern : whitelist) {
      if (::fnmatch(pattern.c_str(), program.c_str(), 0) == 0) return true;
    }
    return false;
  }

  StrategySet strategy_set_for(const std::string& program) const {
    return whitelisted(program) ? StrategySet::kNonIntrusive : strategy_set;
  }

  void validate() const {
    if (static_threshold && !(*static_threshold >= 0.0 && *static_threshold <= 1.0)) {
      throw ConfigError("static_threshold: must lie in [0,1]");
    }
    try {
      dynamic.params.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("dynamic: ") + e.what());
    }
    if (engine.offset_min > engine.offset_max) {
      throw ConfigError("offset_range: min exceeds max");
    }
    if (engine.corrupt_max_bytes < 1) throw ConfigError("corrupt_max_bytes: must be >= 1");
    if (!(timeout_factor > 0.0)) throw ConfigError("timeout_factor: must be positive");
    if (!(runtime_slack_seconds >= 0.0)) {
      throw ConfigError("runtime_slack_seconds: must be non-negative");
    }
  }
};

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError((where.empty() ? std::string("config") : where) + ": expected an object");
  }
  for (const auto& [key, _] : obj.items()) {
    if (allowed.count(key) == 0) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

template <typename T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(key + ": wrong type");
  }
}

inline double get_number(const Json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key + ": expected a number");
  return j.get<double>();
}

inline bool get_bool(const Json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key + ": expected a boolean");
  return j.get<bool>();
}

inline std::int64_t get_int(const Json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(key + ": expected an integer");
  return j.get<std::int64_t>();
}

inline std::string get_string(const Json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<std::string> get_strings(const Json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(key + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(get_string(v, key));
  return out;
}

}  // namespace detail

inline PolicyConfig parse_config(const nlohmann::json& j) {
  using detail::get_bool;
  using detail::get_int;
  using detail::get_number;
  using detail::get_string;
  using detail::get_strings;
  detail::reject_unknown(
      j,
      {"mode", "static_threshold", "dynamic", "environment", "strategy_set",
       "enabled_strategies", "whitelist", "protected_paths", "system_binary_dirs",
       "connection", "offset_range", "corrupt_max_bytes", "timeout_factor",
       "runtime_slack_seconds", "seed"},
      "");

  PolicyConfig c;
  std::string mode = "dynamic";
  if (j.contains("mode")) mode = get_string(j["mode"], "mode");
  if (mode == "static") {
    c.static_threshold = j.contains("static_threshold")
                             ? get_number(j["static_threshold"], "static_threshold")
                             : 0.10;
  } else if (mode == "dynamic") {
    if (j.contains("static_threshold")) {
      throw ConfigError("static_threshold: only valid with mode \"static\"");
    }
  } else {
    throw ConfigError("mode: expected \"static\" or \"dynamic\"");
  }

  if (j.contains("dynamic")) {
    const auto& d = j["dynamic"];
    detail::reject_unknown(d,
                           {"t_d", "t_max", "P", "r", "warmup", "gate",
                            "escalate_all_names", "strict_behavior_warmup"},
                           "dynamic.");
    auto& p = c.dynamic.params;
    if (d.contains("t_d")) p.t_d = get_number(d["t_d"], "dynamic.t_d");
    if (d.contains("t_max")) p.t_max = get_number(d["t_max"], "dynamic.t_max");
    if (d.contains("P")) p.P = get_number(d["P"], "dynamic.P");
    if (d.contains("r")) p.r = get_number(d["r"], "dynamic.r");
    if (d.contains("warmup")) {
      const auto w = get_int(d["warmup"], "dynamic.warmup");
      if (w < 0) throw ConfigError("dynamic.warmup: must be >= 0");
      p.warmup = static_cast<std::uint64_t>(w);
    }
    if (d.contains("gate")) {
      const auto g = get_string(d["gate"], "dynamic.gate");
      if (g == "total") {
        c.dynamic.gate = WarmupGate::kTotal;
      } else if (g == "per_name") {
        c.dynamic.gate = WarmupGate::kPerName;
      } else {
        throw ConfigError("dynamic.gate: expected \"total\" or \"per_name\"");
      }
    }
    if (d.contains("escalate_all_names")) {
      c.dynamic.escalate_all_names = get_bool(d["escalate_all_names"], "dynamic.escalate_all_names");
    }
    if (d.contains("strict_behavior_warmup")) {
      c.dynamic.strict_behavior_warmup =
          get_bool(d["strict_behavior_warmup"], "dynamic.strict_behavior_warmup");
    }
  }

  if (j.contains("environment")) {
    const auto e = get_string(j["environment"], "environment");
    if (e == "uncertain") {
      c.environment = ProcessEnv::kUncertain;
    } else if (e == "standard") {
      c.environment = ProcessEnv::kStandard;
    } else {
      throw ConfigError("environment: expected \"uncertain\" or \"standard\"");
    }
  }
  if (j.contains("strategy_set")) {
    const auto s = strategy_set_from_string(get_string(j["strategy_set"], "strategy_set"));
    if (!s) throw ConfigError("strategy_set: expected \"intrusive\" or \"non-intrusive\"");
    c.strategy_set = *s;
  }
  if (j.contains("enabled_strategies")) {
    for (const auto& name : get_strings(j["enabled_strategies"], "enabled_strategies")) {
      const auto k = strategy_from_string(name);
      if (!k) throw ConfigError("enabled_strategies: unknown strategy '" + name + "'");
      c.engine.enabled.push_back(*k);
    }
  }
  if (j.contains("whitelist")) c.whitelist = get_strings(j["whitelist"], "whitelist");
  if (j.contains("protected_paths")) {
    const auto& pp = j["protected_paths"];
    detail::reject_unknown(pp, {"prefixes", "keywords"}, "protected_paths.");
    if (pp.contains("prefixes")) {
      c.protection.prefixes = get_strings(pp["prefixes"], "protected_paths.prefixes");
    }
    if (pp.contains("keywords")) {
      c.protection.keywords = get_strings(pp["keywords"], "protected_paths.keywords");
    }
  }
  if (j.contains("system_binary_dirs")) {
    c.behavior.system_binary_dirs = get_strings(j["system_binary_dirs"], "system_binary_dirs");
  }
  if (j.contains("connection")) {
    const auto& cn = j["connection"];
    detail::reject_unknown(cn, {"redirect", "honeypot_addr", "restrict_connect"}, "connection.");
    if (cn.contains("redirect")) {
      const auto r = get_string(cn["redirect"], "connection.redirect");
      if (r == "honeypot") {
        c.engine.redirect = RedirectMode::kHoneypot;
      } else if (r == "random_private") {
        c.engine.redirect = RedirectMode::kRandomPrivate;
      } else {
        throw ConfigError("connection.redirect: expected \"honeypot\" or \"random_private\"");
      }
    }
    if (cn.contains("honeypot_addr")) {
      c.engine.honeypot_addr = get_string(cn["honeypot_addr"], "connection.honeypot_addr");
    }
    if (cn.contains("restrict_connect")) {
      c.engine.applicability.restrict_connect =
          get_bool(cn["restrict_connect"], "connection.restrict_connect");
    }
  }
  if (j.contains("offset_range")) {
    const auto& r = j["offset_range"];
    if (!r.is_array() || r.size() != 2) {
      throw ConfigError("offset_range: expected [min, max]");
    }
    c.engine.offset_min = get_int(r[0], "offset_range");
    c.engine.offset_max = get_int(r[1], "offset_range");
  }
  if (j.contains("corrupt_max_bytes")) {
    c.engine.corrupt_max_bytes = get_int(j["corrupt_max_bytes"], "corrupt_max_bytes");
  }
  if (j.contains("timeout_factor")) {
    c.timeout_factor = get_number(j["timeout_factor"], "timeout_factor");
  }
  if (j.contains("runtime_slack_seconds")) {
    c.runtime_slack_seconds = get_number(j["runtime_slack_seconds"], "runtime_slack_seconds");
  }
  if (j.contains("seed")) {
    const auto& s = j["seed"];
    if (!s.is_number_integer()) throw ConfigError("seed: expected an integer");
    c.seed = s.is_number_unsigned() ? s.get<std::uint64_t>()
                                    : static_cast<std::uint64_t>(s.get<std::int64_t>());
  }
  c.validate();
  return c;
}

inline PolicyConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline PolicyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline nlohmann::ordered_json config_to_json(const PolicyConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = c.is_dynamic() ? "dynamic" : "static";
  if (c.static_threshold) j["static_threshold"] = *c.static_threshold;
  const auto& p = c.dynamic.params;
  j["dynamic"] = {{"t_d", p.t_d},
                  {"t_max", p.t_max},
                  {"P", p.P},
                  {"r", p.r},
                  {"warmup", p.warmup},
                  {"gate", c.dynamic.gate == WarmupGate::kTotal ? "total" : "per_name"},
                  {"escalate_all_names", c.dynamic.escalate_all_names},
                  {"strict_behavior_warmup", c.dynamic.strict_behavior_warmup}};
  j["environment"] = c.environment == ProcessEnv::kUncertain ? "uncertain" : "standard";
  j["strategy_set"] = std::string(to_string(c.strategy_set));
  auto enabled = nlohmann::ordered_json::array();
  for (const auto k : c.engine.enabled) enabled.push_back(std::string(to_string(k)));
  j["enabled_strategies"] = enabled;
  j["whitelist"] = c.whitelist;
  j["protected_paths"] = {{"prefixes", c.protection.prefixes},
                          {"keywords", c.protection.keywords}};
  j["system_binary_dirs"] = c.behavior.system_binary_dirs;
  j["connection"] = {
      {"redirect", c.engine.redirect == RedirectMode::kHoneypot ? "honeypot" : "random_private"},
      {"honeypot_addr", c.engine.honeypot_addr},
      {"restrict_connect", c.engine.applicability.restrict_connect}};
  j["offset_range"] = {c.engine.offset_min, c.engine.offset_max};
  j["corrupt_max_bytes"] = c.engine.corrupt_max_bytes;
  j["timeout_factor"] = c.timeout_factor;
  j["runtime_slack_seconds"] = c.runtime_slack_seconds;
  j["seed"] = c.seed;
  return j;
}

}  // namespace uncertain
