#pragma once

// Live tracing of a child process tree with ptrace (Linux x86_64).
//
// Each interference-set syscall entry becomes a SyscallEvent and is decided
// by a PolicyEngine at entry; descriptor registration runs at exit once the
// real return value is known. Every syscall the tree makes after its first
// execve goes to the trace; decisions are logged for interference-set calls
// only, in entry order.
//
// Enactment:
//   ErrorReturn / SilenceSuccess  skip the call (orig_rax = -1), then set
//                                 rax at exit to error_code / forced_return
//   Delay                         the tracer sleeps while the child is stopped
//   PriorityDecrease              setpriority(PRIO_PROCESS, tid, 19)
//   BufferReduce                  lower the length register, or the iov_len
//                                 fields for vectored calls
//   BufferCorrupt                 overwrite the first bytes of the buffer:
//                                 before the call for writes (restored at
//                                 exit), after the call for reads
//   ConnectionRestrict            rewrite the sockaddr (restored at exit) or
//                                 the listen backlog
//   FileOffsetChange              add offset_delta to the lseek offset
// Registers and memory touched for the call are restored at syscall exit,
// since the syscall ABI preserves argument registers.
//
// BufferReduce on reads shortens the requested length from user space; the
// kernel never sees the original request, which is close to, but not the
// same as, truncating inside the kernel.

#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uncertain/config.hpp"
#include "uncertain/engine.hpp"
#include "uncertain/live/outcome.hpp"
#include "uncertain/live/process.hpp"
#include "uncertain/trace_io.hpp"

#if defined(__linux__) && defined(__x86_64__)
#define UNCERTAIN_LIVE_SUPPORTED 1
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/ptrace.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <sys/user.h>

#include "uncertain/live/syscall_table_x86_64.hpp"
#else
#define UNCERTAIN_LIVE_SUPPORTED 0
#endif

namespace uncertain::live {

struct RunOptions {
  std::optional<double> timeout_seconds;
  // Program path used for whitelist matching; defaults to the resolved path.
  std::optional<std::string> program_label;
};

struct RunResult {
  TraceFile trace;
  std::vector<InterferenceDecision> decisions;
  RunRecord record;
  std::string stderr_data;
};

inline constexpr bool platform_supported() { return UNCERTAIN_LIVE_SUPPORTED != 0; }

inline const char* platform_name() {
#if defined(__linux__) && defined(__x86_64__)
  return "linux-x86_64";
#elif defined(__linux__)
  return "linux (unsupported architecture)";
#else
  return "non-linux";
#endif
}

// Runs the program without tracing. Used for identity checks.
inline RunRecord run_untraced(const ExecSpec& spec, const RunOptions& opts = {}) {
#if defined(__unix__)
  const std::string path = detail::resolve_program(spec.program);
  const auto t0 = std::chrono::steady_clock::now();
  const auto sp = detail::spawn(path, spec);
  detail::StdioPump pump(sp, spec.stdin_data);
  detail::Watchdog dog(sp.pid, opts.timeout_seconds);
  int exec_errno = 0;
  const bool exec_failed = ::read(sp.exec_err_fd, &exec_errno, sizeof exec_errno) == sizeof exec_errno;
  ::close(sp.exec_err_fd);
  int st = 0;
  while (::waitpid(sp.pid, &st, 0) < 0 && errno == EINTR) {
  }
  dog.cancel();
  pump.finish();
  if (exec_failed) {
    throw AttachFailure("exec '" + spec.program + "' failed: " + std::strerror(exec_errno));
  }
  RunRecord r;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.status = dog.fired() ? ExitStatus{ExitStatus::Kind::kTimeout, 0, 9} : detail::status_from_wait(st);
  r.stdout_data = pump.out();
  return r;
#else
  (void)spec;
  (void)opts;
  throw UnsupportedPlatform("process control is not available on this platform");
#endif
}

#if UNCERTAIN_LIVE_SUPPORTED

namespace detail {

// Kernel ABI of PTRACE_GET_SYSCALL_INFO (linux/ptrace.h); glibc does not
// export the struct.
struct SyscallInfo {
  std::uint8_t op;
  std::uint8_t pad[3];
  std::uint32_t arch;
  std::uint64_t instruction_pointer;
  std::uint64_t stack_pointer;
  union {
    struct {
      std::uint64_t nr;
      std::uint64_t args[6];
    } entry;
    struct {
      std::int64_t rval;
      std::uint8_t is_error;
    } exit;
    struct {
      std::uint64_t nr;
      std::uint64_t args[6];
      std::uint32_t ret_data;
    } seccomp;
  };
};

inline constexpr std::uint8_t kInfoEntry = 1;
inline constexpr std::uint8_t kInfoExit = 2;
inline constexpr int kLowestPriority = 19;
inline constexpr std::size_t kMaxPath = 4096;

inline bool request_tracing() {
  if (::ptrace(PTRACE_TRACEME, 0, nullptr, nullptr) != 0) return false;
  ::raise(SIGSTOP);
  return true;
}

// ----- platform boundary: memory and registers of a stopped tracee -----

inline std::vector<std::uint8_t> read_mem(pid_t pid, std::uint64_t addr, std::size_t len) {
  std::vector<std::uint8_t> out(len);
  if (len == 0 || addr == 0) return {};
  iovec local{out.data(), len};
  iovec remote{reinterpret_cast<void*>(addr), len};
  const ssize_t got = ::process_vm_readv(pid, &local, 1, &remote, 1, 0);
  if (got >= 0) {
    out.resize(static_cast<std::size_t>(got));
    return out;
  }
  // Fall back to word-sized peeks.
  out.clear();
  for (std::size_t off = 0; off < len; off += sizeof(long)) {
    errno = 0;
    const long word = ::ptrace(PTRACE_PEEKDATA, pid, reinterpret_cast<void*>(addr + off), nullptr);
    if (errno != 0) break;
    const auto* b = reinterpret_cast<const std::uint8_t*>(&word);
    for (std::size_t i = 0; i < sizeof(long) && off + i < len; ++i) out.push_back(b[i]);
  }
  return out;
}

inline std::optional<std::string> read_cstring(pid_t pid, std::uint64_t addr) {
  if (addr == 0) return std::nullopt;
  std::string out;
  while (out.size() < kMaxPath) {
    // Never cross a page boundary in one read: the next page may be unmapped.
    const std::size_t chunk =
        std::min<std::size_t>(256, 4096 - static_cast<std::size_t>((addr + out.size()) % 4096));
    const auto bytes = read_mem(pid, addr + out.size(), chunk);
    if (bytes.empty()) return out.empty() ? std::nullopt : std::optional<std::string>(out);
    for (const auto b : bytes) {
      if (b == 0) return out;
      out.push_back(static_cast<char>(b));
    }
  }
  return out;
}

// POKEDATA writes through read-only mappings too, which process_vm_writev
// refuses.
inline bool write_mem(pid_t pid, std::uint64_t addr, const std::vector<std::uint8_t>& bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::uint64_t at = addr + done;
    const std::uint64_t base = at & ~static_cast<std::uint64_t>(sizeof(long) - 1);
    const std::size_t skew = static_cast<std::size_t>(at - base);
    errno = 0;
    long word = ::ptrace(PTRACE_PEEKDATA, pid, reinterpret_cast<void*>(base), nullptr);
    if (errno != 0) return false;
    auto* w = reinterpret_cast<std::uint8_t*>(&word);
    for (std::size_t i = skew; i < sizeof(long) && done < bytes.size(); ++i) w[i] = bytes[done++];
    if (::ptrace(PTRACE_POKEDATA, pid, reinterpret_cast<void*>(base),
                 reinterpret_cast<void*>(word)) != 0) {
      return false;
    }
  }
  return true;
}

inline bool get_regs(pid_t pid, user_regs_struct& r) {
  return ::ptrace(PTRACE_GETREGS, pid, nullptr, &r) == 0;
}
inline bool set_regs(pid_t pid, const user_regs_struct& r) {
  return ::ptrace(PTRACE_SETREGS, pid, nullptr, &r) == 0;
}

inline unsigned long long& arg_reg(user_regs_struct& r, int i) {
  switch (i) {
    case 0: return r.rdi;
    case 1: return r.rsi;
    case 2: return r.rdx;
    case 3: return r.r10;
    case 4: return r.r8;
    default: return r.r9;
  }
}

struct Iov {
  std::uint64_t base;
  std::uint64_t len;
};

inline std::vector<Iov> read_iovs(pid_t pid, std::uint64_t addr, std::uint64_t count) {
  count = std::min<std::uint64_t>(count, 1024);
  const auto raw = read_mem(pid, addr, count * sizeof(Iov));
  std::vector<Iov> out(raw.size() / sizeof(Iov));
  if (!out.empty()) std::memcpy(out.data(), raw.data(), out.size() * sizeof(Iov));
  return out;
}

inline std::optional<std::string> decode_sockaddr(const std::vector<std::uint8_t>& raw) {
  if (raw.size() < sizeof(sa_family_t)) return std::nullopt;
  sa_family_t family;
  std::memcpy(&family, raw.data(), sizeof family);
  char host[INET6_ADDRSTRLEN];
  if (family == AF_INET && raw.size() >= sizeof(sockaddr_in)) {
    sockaddr_in sin;
    std::memcpy(&sin, raw.data(), sizeof sin);
    ::inet_ntop(AF_INET, &sin.sin_addr, host, sizeof host);
    return std::string(host) + ":" + std::to_string(ntohs(sin.sin_port));
  }
  if (family == AF_INET6 && raw.size() >= sizeof(sockaddr_in6)) {
    sockaddr_in6 sin6;
    std::memcpy(&sin6, raw.data(), sizeof sin6);
    ::inet_ntop(AF_INET6, &sin6.sin6_addr, host, sizeof host);
    return "[" + std::string(host) + "]:" + std::to_string(ntohs(sin6.sin6_port));
  }
  return std::nullopt;
}

// Builds the replacement for `original` pointing at "a.b.c.d:port", keeping
// the address family (IPv6 sockets get the v4-mapped form).
inline std::optional<std::vector<std::uint8_t>> redirect_sockaddr(
    const std::vector<std::uint8_t>& original, const std::string& target) {
  const auto colon = target.rfind(':');
  if (colon == std::string::npos) return std::nullopt;
  in_addr ip;
  if (::inet_pton(AF_INET, target.substr(0, colon).c_str(), &ip) != 1) return std::nullopt;
  const auto port = htons(static_cast<std::uint16_t>(std::stoi(target.substr(colon + 1))));
  sa_family_t family;
  std::memcpy(&family, original.data(), sizeof family);
  std::vector<std::uint8_t> out = original;
  if (family == AF_INET) {
    sockaddr_in sin;
    std::memcpy(&sin, original.data(), sizeof sin);
    sin.sin_addr = ip;
    sin.sin_port = port;
    std::memcpy(out.data(), &sin, sizeof sin);
    return out;
  }
  if (family == AF_INET6) {
    sockaddr_in6 sin6;
    std::memcpy(&sin6, original.data(), sizeof sin6);
    std::memset(&sin6.sin6_addr, 0, sizeof sin6.sin6_addr);
    sin6.sin6_addr.s6_addr[10] = 0xFF;
    sin6.sin6_addr.s6_addr[11] = 0xFF;
    std::memcpy(&sin6.sin6_addr.s6_addr[12], &ip, 4);
    sin6.sin6_port = port;
    std::memcpy(out.data(), &sin6, sizeof sin6);
    return out;
  }
  return std::nullopt;
}

// ----- per-call decoding -----

struct CallArgs {
  std::uint64_t nr = 0;
  std::uint64_t a[6] = {};
};

// Where the data buffer of a buffer-taking call lives.
struct BufferLoc {
  std::uint64_t addr = 0;   // first non-empty segment
  std::uint64_t seg_len = 0;
  std::uint64_t total = 0;
  // Vectored calls: where the iovec array is and what it held.
  std::uint64_t iov_addr = 0;
  std::vector<Iov> iovs;
  int len_reg = -1;  // register index of the length, non-vectored calls
};

inline std::optional<BufferLoc> locate_buffer(pid_t pid, Syscall id, const CallArgs& c) {
  BufferLoc b;
  switch (id) {
    case Syscall::kRead:
    case Syscall::kWrite:
    case Syscall::kPread64:
    case Syscall::kPwrite64:
    case Syscall::kSendto:
    case Syscall::kRecvfrom:
      b.addr = c.a[1];
      b.seg_len = b.total = c.a[2];
      b.len_reg = 2;
      return b;
    case Syscall::kReadv:
    case Syscall::kWritev:
    case Syscall::kPreadv:
    case Syscall::kPwritev:
      b.iov_addr = c.a[1];
      b.iovs = read_iovs(pid, c.a[1], c.a[2]);
      break;
    case Syscall::kSendmsg:
    case Syscall::kRecvmsg: {
      const auto raw = read_mem(pid, c.a[1], sizeof(msghdr));
      if (raw.size() < sizeof(msghdr)) return std::nullopt;
      msghdr m;
      std::memcpy(&m, raw.data(), sizeof m);
      b.iov_addr = reinterpret_cast<std::uint64_t>(m.msg_iov);
      b.iovs = read_iovs(pid, b.iov_addr, m.msg_iovlen);
      break;
    }
    default:
      return std::nullopt;
  }
  for (const auto& v : b.iovs) {
    b.total += v.len;
    if (b.addr == 0 && v.len > 0) {
      b.addr = v.base;
      b.seg_len = v.len;
    }
  }
  return b;
}

inline std::string absolute_path(pid_t pid, const std::string& p, std::int64_t dirfd) {
  if (p.empty() || p[0] == '/') return p;
  std::string link = dirfd == AT_FDCWD ? "/proc/" + std::to_string(pid) + "/cwd"
                                       : "/proc/" + std::to_string(pid) + "/fd/" + std::to_string(dirfd);
  char buf[kMaxPath];
  const ssize_t n = ::readlink(link.c_str(), buf, sizeof buf - 1);
  if (n <= 0) return p;
  std::string base(buf, static_cast<std::size_t>(n));
  if (base.back() != '/') base.push_back('/');
  return base + p;
}

// Fills the event fields for a modeled call from the tracee's registers
// and memory.
inline void decode_event(pid_t pid, const std::string& raw_name, const CallArgs& c,
                         SyscallEvent& e) {
  const Syscall id = e.name.id();
  const auto& a = c.a;
  auto sfd = [](std::uint64_t v) { return static_cast<std::int64_t>(static_cast<int>(v)); };
  auto path_at = [&](int reg, std::int64_t dirfd) -> std::optional<std::string> {
    auto p = read_cstring(pid, a[reg]);
    if (p) *p = absolute_path(pid, *p, dirfd);
    return p;
  };
  const bool at_form = raw_name == "openat" || raw_name == "newfstatat" || raw_name == "unlinkat" ||
                       raw_name == "renameat" || raw_name == "renameat2";
  switch (id) {
    case Syscall::kOpen:
    case Syscall::kCreat:
    case Syscall::kStat:
    case Syscall::kLstat:
    case Syscall::kUnlink:
      e.path = at_form ? path_at(1, sfd(a[0])) : path_at(0, AT_FDCWD);
      if (at_form && e.path && e.path->empty()) {  // AT_EMPTY_PATH: acts on dirfd
        e.path.reset();
        e.fd = sfd(a[0]);
      }
      break;
    case Syscall::kOpenat:
      e.path = path_at(1, sfd(a[0]));
      break;
    case Syscall::kRename:
      if (at_form) {
        e.path = path_at(1, sfd(a[0]));
        e.newpath = path_at(3, sfd(a[2]));
      } else {
        e.path = path_at(0, AT_FDCWD);
        e.newpath = path_at(1, AT_FDCWD);
      }
      break;
    case Syscall::kClose:
    case Syscall::kFstat:
    case Syscall::kDup:
    case Syscall::kAccept:
    case Syscall::kAccept4:
      e.fd = sfd(a[0]);
      break;
    case Syscall::kDup2:
    case Syscall::kDup3:
      e.fd = sfd(a[0]);
      e.newfd = sfd(a[1]);
      break;
    case Syscall::kLseek:
      e.fd = sfd(a[0]);
      e.offset = static_cast<std::int64_t>(a[1]);
      break;
    case Syscall::kBind:
    case Syscall::kConnect:
      e.fd = sfd(a[0]);
      e.sockaddr = decode_sockaddr(read_mem(pid, a[1], std::min<std::uint64_t>(a[2], 128)));
      break;
    case Syscall::kListen:
      e.fd = sfd(a[0]);
      e.backlog = sfd(a[1]);
      break;
    default:
      break;
  }
  if (takes_buffer(id)) {
    e.fd = sfd(a[0]);
    if (id == Syscall::kPread64 || id == Syscall::kPwrite64 || id == Syscall::kPreadv ||
        id == Syscall::kPwritev) {
      e.offset = static_cast<std::int64_t>(a[3]);
    }
    if (id == Syscall::kSendto && a[4] != 0) {
      e.sockaddr = decode_sockaddr(read_mem(pid, a[4], std::min<std::uint64_t>(a[5], 128)));
    }
    if (const auto loc = locate_buffer(pid, id, c)) {
      e.buffer_len = static_cast<std::int64_t>(loc->total);
      if (is_write_family(id) && loc->addr != 0) {
        e.buffer_prefix =
            read_mem(pid, loc->addr, std::min<std::uint64_t>(loc->seg_len, kMaxBufferPrefix));
      }
    }
  }
}

// ----- the tracer -----

struct MemPatch {
  std::uint64_t addr;
  std::vector<std::uint8_t> original;
};

struct Pending {
  SyscallEvent event;
  bool in_set = false;
  bool suppressed = false;
  std::int64_t forced_rax = 0;
  std::vector<std::pair<int, std::uint64_t>> reg_restore;  // (arg index, value)
  std::vector<MemPatch> mem_restore;
  // Read-family BufferCorrupt happens after the kernel filled the buffer.
  std::uint64_t corrupt_after_addr = 0;
  std::int64_t corrupt_after_count = 0;
  std::uint64_t corrupt_after_seg = 0;
};

struct Tracee {
  bool started = false;          // past the root's first execve
  bool awaiting_first_stop = false;
  std::uint64_t next_seq = 1;
  std::optional<Pending> pending;
};

class Tracer {
 public:
  Tracer(const PolicyConfig& config, std::uint64_t seed, std::string program)
      : engine_(config, seed, std::move(program)), seed_(seed) {}

  RunResult run(const ExecSpec& spec, const std::string& path, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sp = spawn(path, spec, &request_tracing);
    ::close(sp.exec_err_fd);  // the child is stopped; exec failure shows as exit 127
    StdioPump pump(sp, spec.stdin_data);
    root_ = sp.pid;

    int st = 0;
    if (::waitpid(root_, &st, __WALL) < 0 || !WIFSTOPPED(st)) {
      pump.finish();
      throw AttachFailure("child did not stop for tracing");
    }
    const long options = PTRACE_O_TRACESYSGOOD | PTRACE_O_TRACEFORK | PTRACE_O_TRACEVFORK |
                         PTRACE_O_TRACECLONE | PTRACE_O_TRACEEXEC | PTRACE_O_EXITKILL;
    if (::ptrace(PTRACE_SETOPTIONS, root_, nullptr, reinterpret_cast<void*>(options)) != 0) {
      const int e = errno;
      ::kill(root_, SIGKILL);
      ::waitpid(root_, &st, __WALL);
      pump.finish();
      throw AttachFailure(std::string("PTRACE_SETOPTIONS: ") + std::strerror(e));
    }
    tracees_[root_] = Tracee{};
    Watchdog dog(root_, opts.timeout_seconds);
    resume(root_, 0);

    ExitStatus root_status;
    bool root_exec_seen = false;
    while (!tracees_.empty()) {
      const pid_t pid = ::waitpid(-1, &st, __WALL);
      if (pid < 0) {
        if (errno == EINTR) continue;
        break;
      }
      if (WIFEXITED(st) || WIFSIGNALED(st)) {
        flush(pid);
        tracees_.erase(pid);
        early_.erase(pid);
        if (pid == root_) root_status = status_from_wait(st);
        continue;
      }
      if (!WIFSTOPPED(st)) continue;
      auto it = tracees_.find(pid);
      if (it == tracees_.end()) {
        // A new child reported before its parent's fork event: hold it.
        early_.insert(pid);
        continue;
      }
      const int sig = WSTOPSIG(st);
      const int event = st >> 16;
      if (sig == (SIGTRAP | 0x80)) {
        on_syscall_stop(pid, it->second);
        resume(pid, 0);
      } else if (sig == SIGTRAP && event != 0) {
        if (event == PTRACE_EVENT_FORK || event == PTRACE_EVENT_VFORK ||
            event == PTRACE_EVENT_CLONE) {
          unsigned long child = 0;
          ::ptrace(PTRACE_GETEVENTMSG, pid, nullptr, &child);
          adopt(pid, static_cast<pid_t>(child), dog);
        } else if (event == PTRACE_EVENT_EXEC) {
          it->second.started = true;
          if (pid == root_) root_exec_seen = true;
        }
        resume(pid, 0);
      } else if (sig == SIGSTOP && it->second.awaiting_first_stop) {
        it->second.awaiting_first_stop = false;
        resume(pid, 0);
      } else {
        siginfo_t si;
        const bool group_stop = ::ptrace(PTRACE_GETSIGINFO, pid, nullptr, &si) != 0;
        resume(pid, group_stop ? 0 : sig);
      }
    }
    dog.cancel();
    pump.finish();

    if (!root_exec_seen && root_status.kind == ExitStatus::Kind::kExited &&
        root_status.code == 127) {
      throw AttachFailure("exec '" + spec.program + "' failed");
    }
    RunResult r;
    r.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.record.status = dog.fired() ? ExitStatus{ExitStatus::Kind::kTimeout, 0, 9} : root_status;
    r.record.stdout_data = pump.out();
    r.stderr_data = pump.err();
    r.trace.events = std::move(events_);
    r.trace.header.meta["source"] = "live";
    r.trace.header.meta["program"] = path;
    r.decisions = std::move(decisions_);
    return r;
  }

 private:
  static void resume(pid_t pid, int sig) {
    ::ptrace(PTRACE_SYSCALL, pid, nullptr, reinterpret_cast<void*>(static_cast<long>(sig)));
  }

  void adopt(pid_t parent, pid_t child, Watchdog& dog) {
    engine_.on_fork(parent, child);
    Tracee t;
    t.started = tracees_[parent].started;
    dog.track(child);
    if (early_.erase(child) > 0) {
      tracees_[child] = std::move(t);
      resume(child, 0);
    } else {
      t.awaiting_first_stop = true;
      tracees_[child] = std::move(t);
    }
  }

  Rng& enact_rng(pid_t pid) {
    auto it = enact_rngs_.find(pid);
    if (it != enact_rngs_.end()) return it->second;
    constexpr std::uint64_t kEnactTag = 0x656e616374ULL;  // "enact"
    return enact_rngs_
        .emplace(pid, Rng(derive_seed(seed_, {static_cast<std::uint64_t>(pid), kEnactTag})))
        .first->second;
  }

  std::vector<std::uint8_t> random_bytes(pid_t pid, std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(enact_rng(pid).next());
    return out;
  }

  void on_syscall_stop(pid_t pid, Tracee& t) {
    SyscallInfo info{};
    if (::ptrace(PTRACE_GET_SYSCALL_INFO, pid,
                 reinterpret_cast<void*>(sizeof info), &info) <= 0) {
      return;
    }
    if (info.op == kInfoEntry) {
      if (!t.started) return;
      CallArgs c;
      c.nr = info.entry.nr;
      std::memcpy(c.a, info.entry.args, sizeof c.a);
      on_entry(pid, t, c);
    } else if (info.op == kInfoExit) {
      on_exit(pid, t, info.exit.rval);
    }
  }

  void on_entry(pid_t pid, Tracee& t, const CallArgs& c) {
    Pending p;
    const auto raw = syscall_name_x86_64(static_cast<long>(c.nr));
    const std::string raw_name = raw.empty() ? "syscall_" + std::to_string(c.nr) : std::string(raw);
    SyscallEvent& e = p.event;
    e.pid = pid;
    e.seq = t.next_seq++;
    e.name = SyscallName("sys_" + raw_name);
    p.in_set = e.name.in_set();
    if (p.in_set) {
      decode_event(pid, raw_name, c, e);
      auto d = engine_.on_entry(e);
      if (d.perturbed()) enact(pid, c, d, p);
      decisions_.push_back(std::move(d));
    }
    t.pending = std::move(p);
  }

  void enact(pid_t pid, const CallArgs& c, const InterferenceDecision& d, Pending& p) {
    user_regs_struct regs;
    if (!get_regs(pid, regs)) return;
    const Syscall id = p.event.name.id();
    bool regs_dirty = false;
    auto set_arg = [&](int i, std::uint64_t v) {
      p.reg_restore.emplace_back(i, arg_reg(regs, i));
      arg_reg(regs, i) = v;
      regs_dirty = true;
    };
    switch (*d.strategy) {
      case StrategyKind::kErrorReturn:
      case StrategyKind::kSilenceSuccess:
        regs.orig_rax = static_cast<unsigned long long>(-1);
        regs_dirty = true;
        p.suppressed = true;
        p.forced_rax = d.error_code ? *d.error_code : d.forced_return.value_or(0);
        break;
      case StrategyKind::kDelay:
        std::this_thread::sleep_for(std::chrono::duration<double>(d.delay_seconds.value_or(0)));
        break;
      case StrategyKind::kPriorityDecrease:
        ::setpriority(PRIO_PROCESS, static_cast<id_t>(pid), kLowestPriority);
        break;
      case StrategyKind::kBufferReduce: {
        const auto loc = locate_buffer(pid, id, c);
        if (!loc) break;
        const auto target = static_cast<std::uint64_t>(d.reduced_len.value_or(0));
        if (loc->len_reg >= 0) {
          set_arg(loc->len_reg, target);
        } else if (!loc->iovs.empty()) {
          std::vector<Iov> cut = loc->iovs;
          std::uint64_t budget = target;
          for (auto& v : cut) {
            v.len = std::min(v.len, budget);
            budget -= v.len;
          }
          std::vector<std::uint8_t> orig(loc->iovs.size() * sizeof(Iov)), next(orig.size());
          std::memcpy(orig.data(), loc->iovs.data(), orig.size());
          std::memcpy(next.data(), cut.data(), next.size());
          if (write_mem(pid, loc->iov_addr, next)) p.mem_restore.push_back({loc->iov_addr, orig});
        }
        break;
      }
      case StrategyKind::kBufferCorrupt: {
        const auto loc = locate_buffer(pid, id, c);
        if (!loc || loc->addr == 0) break;
        const auto n = std::min<std::uint64_t>(
            static_cast<std::uint64_t>(d.corrupt_byte_count.value_or(0)), loc->seg_len);
        if (is_write_family(id)) {
          auto orig = read_mem(pid, loc->addr, n);
          if (write_mem(pid, loc->addr, random_bytes(pid, orig.size()))) {
            p.mem_restore.push_back({loc->addr, std::move(orig)});
          }
        } else {
          p.corrupt_after_addr = loc->addr;
          p.corrupt_after_count = static_cast<std::int64_t>(n);
          p.corrupt_after_seg = loc->seg_len;
        }
        break;
      }
      case StrategyKind::kConnectionRestrict:
        if (id == Syscall::kListen) {
          set_arg(1, static_cast<std::uint64_t>(d.backlog_cap.value_or(1)));
        } else if (d.redirect_addr) {
          const auto len = std::min<std::uint64_t>(c.a[2], 128);
          auto orig = read_mem(pid, c.a[1], len);
          if (orig.size() < sizeof(sa_family_t)) break;
          if (const auto next = redirect_sockaddr(orig, *d.redirect_addr)) {
            if (write_mem(pid, c.a[1], *next)) p.mem_restore.push_back({c.a[1], std::move(orig)});
          }
        }
        break;
      case StrategyKind::kFileOffsetChange:
        set_arg(1, c.a[1] + static_cast<std::uint64_t>(d.offset_delta.value_or(0)));
        break;
    }
    if (regs_dirty) set_regs(pid, regs);
  }

  void on_exit(pid_t pid, Tracee& t, std::int64_t rval) {
    if (!t.pending) return;
    Pending p = std::move(*t.pending);
    t.pending.reset();
    if (p.corrupt_after_addr != 0 && !p.suppressed && rval > 0) {
      const auto n = std::min<std::uint64_t>(static_cast<std::uint64_t>(p.corrupt_after_count),
                                             static_cast<std::uint64_t>(rval));
      write_mem(pid, p.corrupt_after_addr, random_bytes(pid, std::min(n, p.corrupt_after_seg)));
    }
    for (auto it = p.mem_restore.rbegin(); it != p.mem_restore.rend(); ++it) {
      write_mem(pid, it->addr, it->original);
    }
    if (p.suppressed || !p.reg_restore.empty()) {
      user_regs_struct regs;
      if (get_regs(pid, regs)) {
        for (const auto& [i, v] : p.reg_restore) arg_reg(regs, i) = v;
        if (p.suppressed) regs.rax = static_cast<unsigned long long>(p.forced_rax);
        set_regs(pid, regs);
      }
    }
    // A suppressed call never ran, so there is no native return value.
    if (!p.suppressed) p.event.native_return = rval;
    if (p.in_set) engine_.on_exit(p.event);
    events_.push_back(std::move(p.event));
  }

  // The tracee died inside a syscall (exit_group, or a kill).
  void flush(pid_t pid) {
    const auto it = tracees_.find(pid);
    if (it == tracees_.end() || !it->second.pending) return;
    events_.push_back(std::move(it->second.pending->event));
    it->second.pending.reset();
  }

  PolicyEngine engine_;
  std::uint64_t seed_;
  pid_t root_ = -1;
  std::unordered_map<pid_t, Tracee> tracees_;
  std::set<pid_t> early_;
  std::unordered_map<pid_t, Rng> enact_rngs_;
  std::vector<SyscallEvent> events_;
  std::vector<InterferenceDecision> decisions_;
};

}  // namespace detail

#endif  // UNCERTAIN_LIVE_SUPPORTED

// Runs `spec` under the tracer. Throws UnsupportedPlatform or AttachFailure.
inline RunResult run_traced(const ExecSpec& spec, const PolicyConfig& config, std::uint64_t seed,
                            const RunOptions& opts = {}) {
#if UNCERTAIN_LIVE_SUPPORTED
  const std::string path = detail::resolve_program(spec.program);
  detail::Tracer tracer(config, seed, opts.program_label.value_or(path));
  return tracer.run(spec, path, opts);
#else
  (void)spec;
  (void)config;
  (void)seed;
  (void)opts;
  throw UnsupportedPlatform(std::string("live tracing needs Linux on x86_64; this build is ") +
                            platform_name());
#endif
}

}  // namespace uncertain::live
