#pragma once

// Per-process policy state: behavior detection, the dynamic per-syscall
// threshold, and the critical-file descriptor registry.

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uncertain/event.hpp"
#include "uncertain/syscall_model.hpp"

namespace uncertain {

struct ThresholdParams {
  double t_d = 0.10;
  double t_max = 0.95;
  double P = 1.2;
  double r = 0.70;
  std::uint64_t warmup = 100;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const {
    if (!(t_d >= 0.0 && t_d <= 1.0)) throw std::invalid_argument("t_d must lie in [0,1]");
    if (!(t_max >= 0.0 && t_max <= 1.0)) throw std::invalid_argument("t_max must lie in [0,1]");
    if (t_d > t_max) throw std::invalid_argument("t_d must not exceed t_max");
    if (!(P > 0.0)) throw std::invalid_argument("P must be positive");
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("r must lie in [0,1]");
    // The proportional row fires only for ratio > r, so P*r >= t_d keeps it
    // from dropping below the default threshold.
    if (P * r < t_d) throw std::invalid_argument("P*r must be at least t_d");
  }
};

// Which counter the warmup gate inspects.
enum class WarmupGate : std::uint8_t { kTotal, kPerName };

struct DynamicOptions {
  ThresholdParams params;
  WarmupGate gate = WarmupGate::kTotal;
  // A behavior flag on any name escalates every name.
  bool escalate_all_names = false;
  // Behaviors 2-4 escalate only once the warmup gate has passed.
  bool strict_behavior_warmup = false;
};

struct ProtectionRules {
  std::vector<std::string> prefixes{"/lib", "/usr/lib", "/lib64", "/etc",
                                    "/proc", "/sys", "/dev"};
  std::vector<std::string> keywords{".so", "ld-"};

  bool matches(std::string_view path) const {
    for (const auto& p : prefixes) {
      if (path.substr(0, p.size()) == p) return true;
    }
    for (const auto& k : keywords) {
      if (path.find(k) != std::string_view::npos) return true;
    }
    return false;
  }
};

struct BehaviorRules {
  std::vector<std::string> system_binary_dirs{"/bin/", "/sbin/", "/usr/bin/",
                                              "/usr/sbin/"};

  bool is_system_binary(std::string_view path) const {
    for (const auto& d : system_binary_dirs) {
      if (path.find(d) != std::string_view::npos) return true;
    }
    return false;
  }
};

enum class ProcessEnv : std::uint8_t { kStandard, kUncertain };

enum class Behavior : std::uint8_t {
  kFrequentInvocation,  // B1
  kElfHeaderWrite,      // B2
  kStdRedirect,         // B3
  kBinaryRenameUnlink,  // B4
};

inline std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::kFrequentInvocation: return "B1_FrequentInvocation";
    case Behavior::kElfHeaderWrite: return "B2_ElfHeaderWrite";
    case Behavior::kStdRedirect: return "B3_StdRedirect";
    case Behavior::kBinaryRenameUnlink: return "B4_BinaryRenameUnlink";
  }
  return "B1_FrequentInvocation";
}

struct BehaviorEvent {
  Behavior which;
  Syscall trigger;
  bool operator==(const BehaviorEvent&) const = default;
};

class SequenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProcessState {
  std::int64_t pid = 0;
  ProcessEnv process_env = ProcessEnv::kUncertain;
  StrategySet strategy_set = StrategySet::kIntrusive;
  std::set<std::int64_t> fd_list;
  std::uint64_t total_syscall_cnt = 0;
  std::array<std::uint64_t, kSyscallSlots> per_syscall_cnt{};
  std::bitset<kSyscallSlots> behavior_flags;
  std::optional<double> static_threshold;
  std::optional<std::uint64_t> last_seq;

  std::uint64_t count(Syscall s) const { return per_syscall_cnt[index_of(s)]; }
  bool flagged(Syscall s) const { return behavior_flags.test(index_of(s)); }
};

inline double ratio(const ProcessState& state, Syscall name) {
  if (state.total_syscall_cnt == 0) return 0.0;
  return static_cast<double>(state.count(name)) /
         static_cast<double>(state.total_syscall_cnt);
}

namespace detail {

inline bool warmup_passed(const ProcessState& s, Syscall name,
                          const DynamicOptions& opts) {
  const std::uint64_t n =
      opts.gate == WarmupGate::kTotal ? s.total_syscall_cnt : s.count(name);
  return n > opts.params.warmup;
}

inline bool std_fd(const std::optional<std::int64_t>& fd) {
  return fd && *fd >= 0 && *fd <= 2;
}

}  // namespace detail

// Updates counters for an interference-set event and reports the behaviors
// it triggers. Behaviors 2-4 latch a flag on the triggering name.
inline std::vector<BehaviorEvent> observe(ProcessState& state,
                                          const SyscallEvent& event,
                                          const DynamicOptions& opts = {},
                                          const BehaviorRules& rules = {}) {
  if (event.pid != state.pid) {
    throw SequenceError("event pid " + std::to_string(event.pid) +
                        " does not match state pid " + std::to_string(state.pid));
  }
  if (state.last_seq && event.seq <= *state.last_seq) {
    throw SequenceError("out-of-order seq " + std::to_string(event.seq) +
                        " for pid " + std::to_string(event.pid) + " (last " +
                        std::to_string(*state.last_seq) + ")");
  }
  state.last_seq = event.seq;

  std::vector<BehaviorEvent> out;
  const Syscall s = event.id();
  if (!in_interference_set(s)) return out;

  ++state.total_syscall_cnt;
  ++state.per_syscall_cnt[index_of(s)];

  if (is_write_family(s) && event.buffer_prefix &&
      starts_with_elf_magic(*event.buffer_prefix)) {
    out.push_back({Behavior::kElfHeaderWrite, s});
  }
  if (is_dup_family(s) &&
      (detail::std_fd(event.fd) || detail::std_fd(event.newfd))) {
    out.push_back({Behavior::kStdRedirect, s});
  }
  if (s == Syscall::kUnlink || s == Syscall::kRename) {
    const bool hit = (event.path && rules.is_system_binary(*event.path)) ||
                     (event.newpath && rules.is_system_binary(*event.newpath));
    if (hit) out.push_back({Behavior::kBinaryRenameUnlink, s});
  }
  if (!out.empty()) state.behavior_flags.set(index_of(s));

  if (state.total_syscall_cnt > opts.params.warmup &&
      ratio(state, s) > opts.params.r) {
    out.insert(out.begin(), {Behavior::kFrequentInvocation, s});
  }
  return out;
}

// Dynamic per-syscall threshold. Rows, first match wins:
//   (a) name escalated by Behaviors 2-4                 -> t_max
//   (b) warmup passed and P*ratio >= t_max              -> t_max
//   (c) warmup passed, ratio > r and P*ratio < t_max    -> P*ratio
//   (d) otherwise                                       -> t_d
inline double threshold(const ProcessState& state, Syscall name,
                        const DynamicOptions& opts = {}) {
  const ThresholdParams& p = opts.params;
  const bool gate = detail::warmup_passed(state, name, opts);
  const bool escalated =
      state.flagged(name) || (opts.escalate_all_names && state.behavior_flags.any());
  if (escalated && (gate || !opts.strict_behavior_warmup)) return p.t_max;
  if (!gate) return p.t_d;
  const double rt = ratio(state, name);
  const double scaled = p.P * rt;
  if (scaled >= p.t_max) return p.t_max;
  if (rt > p.r) return scaled;
  return p.t_d;
}

// Static threshold when configured, else the dynamic one.
inline double effective_threshold(const ProcessState& state, Syscall name,
                                  const DynamicOptions& opts = {}) {
  if (state.static_threshold) return *state.static_threshold;
  return threshold(state, name, opts);
}

// Maintains fd_list from open/close/dup events. Returns whether it changed.
inline bool register_fd(ProcessState& state, const SyscallEvent& event,
                        const ProtectionRules& rules = {}) {
  const Syscall s = event.id();
  if (is_open_family(s)) {
    if (!event.native_return || *event.native_return < 0) return false;
    const std::int64_t fd = *event.native_return;
    if (event.path && rules.matches(*event.path)) {
      return state.fd_list.insert(fd).second;
    }
    // A non-critical file now owns this number; drop any stale entry.
    return state.fd_list.erase(fd) > 0;
  }
  if (s == Syscall::kClose) {
    if (!event.fd) return false;
    return state.fd_list.erase(*event.fd) > 0;
  }
  if (is_dup_family(s)) {
    if (!event.fd) return false;
    std::optional<std::int64_t> target;
    if (s == Syscall::kDup) {
      target = event.native_return;
    } else {
      if (event.native_return && *event.native_return < 0) return false;
      target = event.newfd ? event.newfd : event.native_return;
    }
    if (!target || *target < 0 || *target == *event.fd) return false;
    if (state.fd_list.count(*event.fd) != 0) {
      return state.fd_list.insert(*target).second;
    }
    return state.fd_list.erase(*target) > 0;
  }
  return false;
}

inline bool is_protected(const ProcessState& state, const SyscallEvent& event,
                         const ProtectionRules& rules = {}) {
  if (event.fd && state.fd_list.count(*event.fd) != 0) return true;
  if (event.newfd && state.fd_list.count(*event.newfd) != 0) return true;
  if (is_open_family(event.id()) && event.path && rules.matches(*event.path)) {
    return true;
  }
  return false;
}

}  // namespace uncertain
