#pragma once

// Turns (process state, event, randomness) into an interference decision,
// and aggregates decisions into perturbation statistics.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uncertain/event.hpp"
#include "uncertain/policy_core.hpp"
#include "uncertain/rng.hpp"
#include "uncertain/syscall_model.hpp"

namespace uncertain {

inline constexpr std::int64_t kMinErrorCode = -255;
inline constexpr std::int64_t kMaxErrorCode = -1;
inline constexpr double kMaxDelaySeconds = 0.1;

enum class RedirectMode : std::uint8_t { kHoneypot, kRandomPrivate };

struct EngineOptions {
  ApplicabilityOptions applicability;
  RedirectMode redirect = RedirectMode::kRandomPrivate;
  std::string honeypot_addr = "127.0.0.1:2222";
  std::int64_t offset_min = -4096;
  std::int64_t offset_max = 4096;
  std::int64_t corrupt_max_bytes = 16;
  // Empty means every kind is allowed.
  std::vector<StrategyKind> enabled;

  bool allows(StrategyKind k) const {
    return enabled.empty() ||
           std::find(enabled.begin(), enabled.end(), k) != enabled.end();
  }
};

enum class Verdict : std::uint8_t { kPassThrough, kPerturb };

enum class PassReason : std::uint8_t {
  kNone,
  kStandardEnv,
  kNotInSet,
  kProtected,
  kRoll,
  kNoStrategy,
};

inline std::string_view to_string(PassReason r) {
  switch (r) {
    case PassReason::kNone: return "";
    case PassReason::kStandardEnv: return "standard_env";
    case PassReason::kNotInSet: return "not_in_set";
    case PassReason::kProtected: return "protected";
    case PassReason::kRoll: return "roll";
    case PassReason::kNoStrategy: return "no_strategy";
  }
  return "";
}

struct InterferenceDecision {
  std::int64_t pid = 0;
  std::uint64_t seq = 0;
  std::string name;
  SyscallCategory category = SyscallCategory::kOther;
  std::optional<std::int64_t> buffer_len;

  Verdict verdict = Verdict::kPassThrough;
  PassReason reason = PassReason::kNone;
  std::optional<StrategyKind> strategy;
  std::optional<std::int64_t> error_code;
  std::optional<double> delay_seconds;
  std::optional<bool> lower_priority;
  std::optional<std::int64_t> forced_return;
  std::optional<std::int64_t> reduced_len;
  std::optional<std::int64_t> corrupt_byte_count;
  std::optional<std::string> redirect_addr;
  std::optional<std::int64_t> backlog_cap;
  std::optional<std::int64_t> offset_delta;
  double threshold_used = 0.0;
  std::optional<double> roll;
  // Behaviors this event triggered (filled by the engine, logged only).
  std::vector<Behavior> behaviors;

  bool perturbed() const { return verdict == Verdict::kPerturb; }
  bool in_set() const { return reason != PassReason::kNotInSet; }
  bool buffer_related() const { return buffer_len.has_value(); }
  bool operator==(const InterferenceDecision&) const = default;
};

namespace detail {

inline bool strategy_fits_event(StrategyKind k, const SyscallEvent& e) {
  switch (k) {
    case StrategyKind::kBufferReduce:
    case StrategyKind::kBufferCorrupt:
      return e.buffer_len && *e.buffer_len >= 1;
    case StrategyKind::kConnectionRestrict:
      return e.id() == Syscall::kListen || e.sockaddr.has_value();
    default:
      return true;
  }
}

inline std::string port_of(const std::optional<std::string>& addr) {
  if (!addr) return "0";
  const auto colon = addr->rfind(':');
  if (colon == std::string::npos || colon + 1 == addr->size()) return "0";
  return addr->substr(colon + 1);
}

// Uniform over the union of 10/8, 172.16/12 and 192.168/16.
inline std::string random_private_ip(Rng& rng) {
  constexpr std::int64_t k10 = 1LL << 24, k172 = 1LL << 20, k192 = 1LL << 16;
  std::int64_t i = rng.uniform_int(0, k10 + k172 + k192 - 1);
  std::uint32_t base;
  if (i < k10) {
    base = 10u << 24;
  } else if ((i -= k10) < k172) {
    base = (172u << 24) | (16u << 16);
  } else {
    i -= k172;
    base = (192u << 24) | (168u << 16);
  }
  const std::uint32_t a = base + static_cast<std::uint32_t>(i);
  return std::to_string(a >> 24) + "." + std::to_string((a >> 16) & 0xFF) +
         "." + std::to_string((a >> 8) & 0xFF) + "." + std::to_string(a & 0xFF);
}

}  // namespace detail

// Strategies the engine may pick for this event: the name-level applicable
// set, filtered by configuration and by which parameters the event carries.
inline std::vector<StrategyKind> candidate_strategies(const SyscallEvent& event,
                                                      StrategySet set,
                                                      const EngineOptions& opts) {
  std::vector<StrategyKind> out;
  for (const auto k : applicable_strategies(event.id(), set, opts.applicability)) {
    if (opts.allows(k) && detail::strategy_fits_event(k, event)) out.push_back(k);
  }
  return out;
}

// Draw order (fixed, part of the log format contract): roll, then strategy
// index, then that strategy's parameters.
inline InterferenceDecision decide(const ProcessState& state,
                                   const SyscallEvent& event,
                                   const DynamicOptions& dyn,
                                   const EngineOptions& opts, Rng& rng,
                                   bool protected_event) {
  InterferenceDecision d;
  d.pid = event.pid;
  d.seq = event.seq;
  d.name = event.name.text();
  d.category = event.name.category();
  d.buffer_len = event.buffer_len;

  const Syscall s = event.id();
  if (!in_interference_set(s)) {
    d.reason = PassReason::kNotInSet;
    return d;
  }
  if (state.process_env == ProcessEnv::kStandard) {
    d.reason = PassReason::kStandardEnv;
    return d;
  }
  d.threshold_used = effective_threshold(state, s, dyn);
  if (protected_event) {
    d.reason = PassReason::kProtected;
    return d;
  }
  d.roll = rng.uniform01();
  if (!(*d.roll < d.threshold_used)) {
    d.reason = PassReason::kRoll;
    return d;
  }
  const auto candidates = candidate_strategies(event, state.strategy_set, opts);
  if (candidates.empty()) {
    d.reason = PassReason::kNoStrategy;
    return d;
  }
  const StrategyKind k = candidates[rng.index(candidates.size())];
  d.verdict = Verdict::kPerturb;
  d.strategy = k;
  switch (k) {
    case StrategyKind::kErrorReturn:
      d.error_code = rng.uniform_int(kMinErrorCode, kMaxErrorCode);
      break;
    case StrategyKind::kDelay:
      d.delay_seconds = rng.uniform_real(0.0, kMaxDelaySeconds);
      break;
    case StrategyKind::kPriorityDecrease:
      d.lower_priority = true;
      break;
    case StrategyKind::kSilenceSuccess:
      d.forced_return = is_write_family(s) ? event.buffer_len.value_or(0) : 0;
      break;
    case StrategyKind::kBufferReduce:
      d.reduced_len = rng.uniform_int(0, *event.buffer_len - 1);
      break;
    case StrategyKind::kBufferCorrupt:
      d.corrupt_byte_count = rng.uniform_int(
          1, std::max<std::int64_t>(1, std::min(*event.buffer_len, opts.corrupt_max_bytes)));
      break;
    case StrategyKind::kConnectionRestrict:
      if (s == Syscall::kListen) {
        d.backlog_cap = 1;
      } else if (opts.redirect == RedirectMode::kHoneypot) {
        d.redirect_addr = opts.honeypot_addr;
      } else {
        d.redirect_addr =
            detail::random_private_ip(rng) + ":" + detail::port_of(event.sockaddr);
      }
      break;
    case StrategyKind::kFileOffsetChange: {
      std::int64_t delta = rng.uniform_int(opts.offset_min, opts.offset_max);
      if (event.offset && *event.offset >= 0 && *event.offset + delta < 0) {
        delta = -*event.offset;
      }
      d.offset_delta = delta;
      break;
    }
  }
  return d;
}

// Convenience form that evaluates protection from the current state.
inline InterferenceDecision decide(const ProcessState& state,
                                   const SyscallEvent& event,
                                   const DynamicOptions& dyn,
                                   const EngineOptions& opts, Rng& rng,
                                   const ProtectionRules& rules = {}) {
  return decide(state, event, dyn, opts, rng, is_protected(state, event, rules));
}

struct RateCounter {
  std::uint64_t total = 0;
  std::uint64_t perturbed = 0;

  double rate() const {
    return total == 0 ? 0.0 : static_cast<double>(perturbed) / static_cast<double>(total);
  }
  void add(bool p) {
    ++total;
    if (p) ++perturbed;
  }
  RateCounter& operator+=(const RateCounter& o) {
    total += o.total;
    perturbed += o.perturbed;
    return *this;
  }
  bool operator==(const RateCounter&) const = default;
};

// Perturbation statistics over interference-set decisions. "connection" is
// the network category; "buffer" is every event that carried a buffer length.
struct PerturbationStats {
  RateCounter all;
  RateCounter connection;
  RateCounter buffer;
  std::array<RateCounter, 3> by_category{};  // file, network, process
  std::array<RateCounter, 3> buffer_by_category{};
  std::array<std::uint64_t, kStrategyKindCount> by_strategy{};

  void add(const InterferenceDecision& d) {
    if (!d.in_set()) return;
    const bool p = d.perturbed();
    all.add(p);
    if (d.category == SyscallCategory::kNetwork) connection.add(p);
    if (d.buffer_related()) buffer.add(p);
    if (d.category != SyscallCategory::kOther) {
      const auto c = static_cast<std::size_t>(d.category);
      by_category[c].add(p);
      if (d.buffer_related()) buffer_by_category[c].add(p);
    }
    if (p && d.strategy) ++by_strategy[static_cast<std::size_t>(*d.strategy)];
  }

  PerturbationStats& operator+=(const PerturbationStats& o) {
    all += o.all;
    connection += o.connection;
    buffer += o.buffer;
    for (std::size_t i = 0; i < by_category.size(); ++i) {
      by_category[i] += o.by_category[i];
      buffer_by_category[i] += o.buffer_by_category[i];
    }
    for (std::size_t i = 0; i < by_strategy.size(); ++i) by_strategy[i] += o.by_strategy[i];
    return *this;
  }
  bool operator==(const PerturbationStats&) const = default;
};

inline PerturbationStats perturbation_rate(const std::vector<InterferenceDecision>& decisions) {
  PerturbationStats s;
  for (const auto& d : decisions) s.add(d);
  return s;
}

}  // namespace uncertain
