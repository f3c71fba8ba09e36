#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "uncertain/config.hpp"
#include "uncertain/engine.hpp"
#include "uncertain/trace_io.hpp"

namespace uncertain {

struct ReplayResult {
  std::vector<InterferenceDecision> decisions;  // in-set events only
  PerturbationStats stats;
  std::size_t events = 0;
};

inline std::string program_of(const TraceFile& t) {
  const auto it = t.header.meta.find("program");
  if (it != t.header.meta.end() && it->is_string()) return it->get<std::string>();
  return {};
}

// Feeds every event through a fresh PolicyEngine. Result is a pure function
// of (trace, config, seed).
inline ReplayResult replay_trace(const TraceFile& trace, const PolicyConfig& config,
                                 std::uint64_t seed) {
  PolicyEngine engine(config, seed, program_of(trace));
  ReplayResult r;
  r.events = trace.events.size();
  r.decisions.reserve(trace.events.size());
  for (const auto& e : trace.events) {
    auto d = engine.replay(e);
    if (d.reason == PassReason::kNotInSet) continue;
    r.stats.add(d);
    r.decisions.push_back(std::move(d));
  }
  return r;
}

inline void write_decision_log(std::ostream& out, const std::vector<InterferenceDecision>& ds) {
  for (const auto& d : ds) out << serialize_decision(d) << '\n';
}

}  // namespace uncertain
