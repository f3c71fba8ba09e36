#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>

#include "uncertain/config.hpp"
#include "uncertain/event.hpp"
#include "uncertain/policy_core.hpp"
#include "uncertain/rng.hpp"
#include "uncertain/strategy_engine.hpp"

namespace uncertain {

// Owns the per-pid ProcessState and Rng for one traced process tree (or one
// replayed trace). Each pid draws from its own stream, seeded with
// derive_seed(seed, {pid}), so interleaving between pids never changes the
// decisions a pid receives.
class PolicyEngine {
 public:
  PolicyEngine(PolicyConfig config, std::uint64_t seed, std::string program = {})
      : config_(std::move(config)), seed_(seed), program_(std::move(program)) {}

  const PolicyConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  ProcessState& state(std::int64_t pid) {
    auto it = states_.find(pid);
    if (it != states_.end()) return it->second;
    ProcessState s;
    s.pid = pid;
    s.process_env = config_.environment;
    s.strategy_set = config_.strategy_set_for(program_);
    s.static_threshold = config_.static_threshold;
    return states_.emplace(pid, std::move(s)).first->second;
  }

  const ProcessState* find(std::int64_t pid) const {
    const auto it = states_.find(pid);
    return it == states_.end() ? nullptr : &it->second;
  }

  Rng& rng(std::int64_t pid) {
    auto it = rngs_.find(pid);
    if (it != rngs_.end()) return it->second;
    return rngs_.emplace(pid, Rng(derive_seed(seed_, {static_cast<std::uint64_t>(pid)})))
        .first->second;
  }

  // Full pipeline for a recorded event whose native_return is known:
  // observe, update fd_list, then decide. A close of a protected descriptor
  // stays protected even though registration removes it.
  InterferenceDecision replay(const SyscallEvent& e) {
    ProcessState& s = state(e.pid);
    const bool was_protected = is_protected(s, e, config_.protection);
    auto behaviors = observe(s, e, config_.dynamic, config_.behavior);
    register_fd(s, e, config_.protection);
    const bool prot = was_protected || is_protected(s, e, config_.protection);
    auto d = decide(s, e, config_.dynamic, config_.engine, rng(e.pid), prot);
    for (const auto& b : behaviors) d.behaviors.push_back(b.which);
    return d;
  }

  // Live tracing: decide at syscall entry, register descriptors at exit
  // once the real return value is known.
  InterferenceDecision on_entry(const SyscallEvent& e) {
    ProcessState& s = state(e.pid);
    auto behaviors = observe(s, e, config_.dynamic, config_.behavior);
    auto d = decide(s, e, config_.dynamic, config_.engine, rng(e.pid),
                    is_protected(s, e, config_.protection));
    for (const auto& b : behaviors) d.behaviors.push_back(b.which);
    return d;
  }

  void on_exit(const SyscallEvent& e) { register_fd(state(e.pid), e, config_.protection); }

  // A forked child starts with fresh counters but inherits the environment,
  // strategy set and (since descriptors are inherited) the protected fds.
  void on_fork(std::int64_t parent, std::int64_t child) {
    const ProcessState& p = state(parent);
    ProcessState c;
    c.pid = child;
    c.process_env = p.process_env;
    c.strategy_set = p.strategy_set;
    c.static_threshold = p.static_threshold;
    c.fd_list = p.fd_list;
    states_[child] = std::move(c);
  }

  void forget(std::int64_t pid) {
    states_.erase(pid);
    rngs_.erase(pid);
  }

 private:
  PolicyConfig config_;
  std::uint64_t seed_;
  std::string program_;
  std::unordered_map<std::int64_t, ProcessState> states_;
  std::unordered_map<std::int64_t, Rng> rngs_;
};

}  // namespace uncertain
