#pragma once

// Syscall vocabulary: the 37-entry interference set, category classification,
// alias resolution and strategy applicability.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uncertain {

enum class SyscallCategory : std::uint8_t {
  kFile,
  kNetwork,
  kProcess,
  kOther,
};

// Canonical interference-set members, in registry order. kOther is the
// catch-all for every name outside the set.
enum class Syscall : std::uint8_t {
  // File related.
  kOpen, kOpenat, kCreat, kRead, kReadv, kWrite, kWritev, kLseek, kClose,
  kStat, kLstat, kFstat, kStat64, kLstat64, kFstat64, kDup, kDup2, kDup3,
  kUnlink, kRename,
  // Network related.
  kBind, kListen, kConnect, kAccept, kAccept4, kSendto, kRecvfrom, kSendmsg,
  kRecvmsg, kSocketcall,
  // Process related.
  kPreadv, kPread64, kPwritev, kPwrite64, kFork, kClone, kNanosleep,
  kOther,
};

inline constexpr std::size_t kInterferenceSetSize = 37;
inline constexpr std::size_t kSyscallSlots = kInterferenceSetSize + 1;

constexpr std::size_t index_of(Syscall s) { return static_cast<std::size_t>(s); }

enum class StrategyKind : std::uint8_t {
  kErrorReturn,
  kDelay,
  kPriorityDecrease,
  kSilenceSuccess,
  kBufferReduce,
  kBufferCorrupt,
  kConnectionRestrict,
  kFileOffsetChange,
};

inline constexpr std::size_t kStrategyKindCount = 8;

enum class StrategySet : std::uint8_t { kNonIntrusive, kIntrusive };

constexpr bool is_non_intrusive(StrategyKind k) {
  return k == StrategyKind::kErrorReturn || k == StrategyKind::kDelay ||
         k == StrategyKind::kPriorityDecrease;
}

namespace detail {

struct RegistryEntry {
  std::string_view name;
  Syscall id;
  SyscallCategory category;
};

inline constexpr std::array<RegistryEntry, kInterferenceSetSize> kRegistry{{
    {"sys_open", Syscall::kOpen, SyscallCategory::kFile},
    {"sys_openat", Syscall::kOpenat, SyscallCategory::kFile},
    {"sys_creat", Syscall::kCreat, SyscallCategory::kFile},
    {"sys_read", Syscall::kRead, SyscallCategory::kFile},
    {"sys_readv", Syscall::kReadv, SyscallCategory::kFile},
    {"sys_write", Syscall::kWrite, SyscallCategory::kFile},
    {"sys_writev", Syscall::kWritev, SyscallCategory::kFile},
    {"sys_lseek", Syscall::kLseek, SyscallCategory::kFile},
    {"sys_close", Syscall::kClose, SyscallCategory::kFile},
    {"sys_stat", Syscall::kStat, SyscallCategory::kFile},
    {"sys_lstat", Syscall::kLstat, SyscallCategory::kFile},
    {"sys_fstat", Syscall::kFstat, SyscallCategory::kFile},
    {"sys_stat64", Syscall::kStat64, SyscallCategory::kFile},
    {"sys_lstat64", Syscall::kLstat64, SyscallCategory::kFile},
    {"sys_fstat64", Syscall::kFstat64, SyscallCategory::kFile},
    {"sys_dup", Syscall::kDup, SyscallCategory::kFile},
    {"sys_dup2", Syscall::kDup2, SyscallCategory::kFile},
    {"sys_dup3", Syscall::kDup3, SyscallCategory::kFile},
    {"sys_unlink", Syscall::kUnlink, SyscallCategory::kFile},
    {"sys_rename", Syscall::kRename, SyscallCategory::kFile},
    {"sys_bind", Syscall::kBind, SyscallCategory::kNetwork},
    {"sys_listen", Syscall::kListen, SyscallCategory::kNetwork},
    {"sys_connect", Syscall::kConnect, SyscallCategory::kNetwork},
    {"sys_accept", Syscall::kAccept, SyscallCategory::kNetwork},
    {"sys_accept4", Syscall::kAccept4, SyscallCategory::kNetwork},
    {"sys_sendto", Syscall::kSendto, SyscallCategory::kNetwork},
    {"sys_recvfrom", Syscall::kRecvfrom, SyscallCategory::kNetwork},
    {"sys_sendmsg", Syscall::kSendmsg, SyscallCategory::kNetwork},
    {"sys_recvmsg", Syscall::kRecvmsg, SyscallCategory::kNetwork},
    {"sys_socketcall", Syscall::kSocketcall, SyscallCategory::kNetwork},
    {"sys_preadv", Syscall::kPreadv, SyscallCategory::kProcess},
    {"sys_pread64", Syscall::kPread64, SyscallCategory::kProcess},
    {"sys_pwritev", Syscall::kPwritev, SyscallCategory::kProcess},
    {"sys_pwrite64", Syscall::kPwrite64, SyscallCategory::kProcess},
    {"sys_fork", Syscall::kFork, SyscallCategory::kProcess},
    {"sys_clone", Syscall::kClone, SyscallCategory::kProcess},
    {"sys_nanosleep", Syscall::kNanosleep, SyscallCategory::kProcess},
}};

// Alternative spellings seen in traces from other ABIs and libc versions.
// Keys are bare names (no "sys_" prefix).
struct Alias {
  std::string_view from;
  Syscall to;
};

inline constexpr std::array<Alias, 18> kAliases{{
    {"_llseek", Syscall::kLseek},
    {"llseek", Syscall::kLseek},
    {"oldstat", Syscall::kStat},
    {"oldlstat", Syscall::kLstat},
    {"oldfstat", Syscall::kFstat},
    {"newfstatat", Syscall::kStat},
    {"fstatat64", Syscall::kStat64},
    {"unlinkat", Syscall::kUnlink},
    {"renameat", Syscall::kRename},
    {"renameat2", Syscall::kRename},
    {"send", Syscall::kSendto},
    {"recv", Syscall::kRecvfrom},
    {"pread", Syscall::kPread64},
    {"pwrite", Syscall::kPwrite64},
    {"preadv2", Syscall::kPreadv},
    {"pwritev2", Syscall::kPwritev},
    {"vfork", Syscall::kFork},
    {"clone3", Syscall::kClone},
}};

inline std::string_view strip_sys_prefix(std::string_view s) {
  if (s.substr(0, 4) == "sys_") s.remove_prefix(4);
  return s;
}

}  // namespace detail

// Resolves any spelling ("write", "sys_write", "_llseek") to its registry id.
inline Syscall resolve_syscall(std::string_view name) {
  const std::string_view bare = detail::strip_sys_prefix(name);
  for (const auto& e : detail::kRegistry) {
    if (detail::strip_sys_prefix(e.name) == bare) return e.id;
  }
  for (const auto& a : detail::kAliases) {
    if (a.from == bare) return a.to;
  }
  return Syscall::kOther;
}

inline std::string_view canonical_name(Syscall s) {
  if (s == Syscall::kOther) return "other";
  return detail::kRegistry[index_of(s)].name;
}

inline SyscallCategory classify(Syscall s) {
  if (s == Syscall::kOther) return SyscallCategory::kOther;
  return detail::kRegistry[index_of(s)].category;
}

inline bool in_interference_set(Syscall s) { return s != Syscall::kOther; }

// A syscall name from a trace. In-set names are stored canonically; anything
// else keeps its original text and classifies as Other.
class SyscallName {
 public:
  SyscallName() : id_(Syscall::kOther), text_("other") {}
  explicit SyscallName(Syscall id) : id_(id), text_(canonical_name(id)) {}
  explicit SyscallName(std::string_view text) : id_(resolve_syscall(text)) {
    if (id_ != Syscall::kOther) {
      text_ = canonical_name(id_);
    } else if (text.empty()) {
      text_ = "other";
    } else {
      text_ = text;
    }
  }

  Syscall id() const { return id_; }
  const std::string& text() const { return text_; }
  SyscallCategory category() const { return classify(id_); }
  bool in_set() const { return in_interference_set(id_); }

  bool operator==(const SyscallName& o) const { return text_ == o.text_; }

 private:
  Syscall id_;
  std::string text_;
};

inline SyscallCategory classify(std::string_view name) {
  return classify(resolve_syscall(name));
}
inline bool in_interference_set(std::string_view name) {
  return in_interference_set(resolve_syscall(name));
}

// Calls with a data buffer argument (plain or vectored).
constexpr bool takes_buffer(Syscall s) {
  switch (s) {
    case Syscall::kRead: case Syscall::kReadv: case Syscall::kWrite:
    case Syscall::kWritev: case Syscall::kSendto: case Syscall::kRecvfrom:
    case Syscall::kSendmsg: case Syscall::kRecvmsg: case Syscall::kPreadv:
    case Syscall::kPread64: case Syscall::kPwritev: case Syscall::kPwrite64:
      return true;
    default:
      return false;
  }
}

// Calls whose buffer is a data source handed to the kernel.
constexpr bool is_write_family(Syscall s) {
  switch (s) {
    case Syscall::kWrite: case Syscall::kWritev: case Syscall::kPwrite64:
    case Syscall::kPwritev: case Syscall::kSendto: case Syscall::kSendmsg:
      return true;
    default:
      return false;
  }
}

constexpr bool is_vectored(Syscall s) {
  switch (s) {
    case Syscall::kReadv: case Syscall::kWritev: case Syscall::kPreadv:
    case Syscall::kPwritev: case Syscall::kSendmsg: case Syscall::kRecvmsg:
      return true;
    default:
      return false;
  }
}

constexpr bool is_open_family(Syscall s) {
  return s == Syscall::kOpen || s == Syscall::kOpenat || s == Syscall::kCreat;
}

constexpr bool is_dup_family(Syscall s) {
  return s == Syscall::kDup || s == Syscall::kDup2 || s == Syscall::kDup3;
}

// Calls whose first argument is a file descriptor.
constexpr bool takes_fd(Syscall s) {
  switch (s) {
    case Syscall::kRead: case Syscall::kReadv: case Syscall::kWrite:
    case Syscall::kWritev: case Syscall::kLseek: case Syscall::kClose:
    case Syscall::kFstat: case Syscall::kFstat64: case Syscall::kDup:
    case Syscall::kDup2: case Syscall::kDup3: case Syscall::kBind:
    case Syscall::kListen: case Syscall::kConnect: case Syscall::kAccept:
    case Syscall::kAccept4: case Syscall::kSendto: case Syscall::kRecvfrom:
    case Syscall::kSendmsg: case Syscall::kRecvmsg: case Syscall::kPreadv:
    case Syscall::kPread64: case Syscall::kPwritev: case Syscall::kPwrite64:
      return true;
    default:
      return false;
  }
}

struct ApplicabilityOptions {
  // Also allow address rewriting on sys_connect (honeypot redirection).
  bool restrict_connect = false;
};

class NotInInterferenceSet : public std::invalid_argument {
 public:
  explicit NotInInterferenceSet(const std::string& name)
      : std::invalid_argument("syscall not in interference set: " + name) {}
};

inline std::vector<StrategyKind> applicable_strategies(
    Syscall s, StrategySet set, ApplicabilityOptions opts = {}) {
  if (!in_interference_set(s)) {
    throw NotInInterferenceSet(std::string(canonical_name(s)));
  }
  if (set == StrategySet::kNonIntrusive) {
    return {StrategyKind::kErrorReturn, StrategyKind::kDelay,
            StrategyKind::kPriorityDecrease};
  }
  std::vector<StrategyKind> out{StrategyKind::kSilenceSuccess};
  if (takes_buffer(s)) {
    out.push_back(StrategyKind::kBufferReduce);
    out.push_back(StrategyKind::kBufferCorrupt);
  }
  if (s == Syscall::kBind || s == Syscall::kListen ||
      (opts.restrict_connect && s == Syscall::kConnect)) {
    out.push_back(StrategyKind::kConnectionRestrict);
  }
  if (s == Syscall::kLseek) out.push_back(StrategyKind::kFileOffsetChange);
  return out;
}

inline std::vector<StrategyKind> applicable_strategies(
    std::string_view name, StrategySet set, ApplicabilityOptions opts = {}) {
  const Syscall s = resolve_syscall(name);
  if (!in_interference_set(s)) throw NotInInterferenceSet(std::string(name));
  return applicable_strategies(s, set, opts);
}

inline std::string_view to_string(SyscallCategory c) {
  switch (c) {
    case SyscallCategory::kFile: return "file";
    case SyscallCategory::kNetwork: return "network";
    case SyscallCategory::kProcess: return "process";
    case SyscallCategory::kOther: return "other";
  }
  return "other";
}

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::kErrorReturn: return "error_return";
    case StrategyKind::kDelay: return "delay";
    case StrategyKind::kPriorityDecrease: return "priority_decrease";
    case StrategyKind::kSilenceSuccess: return "silence_success";
    case StrategyKind::kBufferReduce: return "buffer_reduce";
    case StrategyKind::kBufferCorrupt: return "buffer_corrupt";
    case StrategyKind::kConnectionRestrict: return "connection_restrict";
    case StrategyKind::kFileOffsetChange: return "file_offset_change";
  }
  return "error_return";
}

inline std::optional<StrategyKind> strategy_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStrategyKindCount; ++i) {
    const auto k = static_cast<StrategyKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline std::string_view to_string(StrategySet s) {
  return s == StrategySet::kIntrusive ? "intrusive" : "non-intrusive";
}

inline std::optional<StrategySet> strategy_set_from_string(std::string_view s) {
  if (s == "intrusive") return StrategySet::kIntrusive;
  if (s == "non-intrusive" || s == "nonintrusive" || s == "non_intrusive") {
    return StrategySet::kNonIntrusive;
  }
  return std::nullopt;
}

}  // namespace uncertain
