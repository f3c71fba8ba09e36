#pragma once

// Synthetic trace generation for behavioral archetypes. Mixes are our own,
// qualitative choices; they are not calibrated against any malware corpus.
// Output depends only on (spec, seed).

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uncertain/event.hpp"
#include "uncertain/rng.hpp"
#include "uncertain/trace_io.hpp"

namespace uncertain {

enum class Archetype : std::uint8_t {
  kFlooder,
  kVirus,
  kSpyware,
  kTrojanBackdoor,
  kWorm,
  kBenignIO,
  kBenignCPU,
  kAPT,
};

inline constexpr std::array<std::string_view, 8> kArchetypeNames{
    "flooder", "virus", "spyware", "trojan", "worm", "benign-io", "benign-cpu", "apt"};

inline std::string_view to_string(Archetype a) {
  return kArchetypeNames[static_cast<std::size_t>(a)];
}

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Archetype archetype_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kArchetypeNames.size(); ++i) {
    if (kArchetypeNames[i] == s) return static_cast<Archetype>(i);
  }
  if (s == "trojan-backdoor" || s == "trojanbackdoor") return Archetype::kTrojanBackdoor;
  if (s == "benignio") return Archetype::kBenignIO;
  if (s == "benigncpu") return Archetype::kBenignCPU;
  throw ScenarioError("unknown archetype '" + std::string(s) + "'");
}

struct ScenarioSpec {
  std::string name;
  Archetype archetype = Archetype::kBenignIO;
  std::size_t event_count = 1000;
  std::int64_t pid = 1000;
};

namespace scenario_detail {

inline std::vector<std::uint8_t> bytes_of(std::string_view s) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size() && i < kMaxBufferPrefix; ++i) {
    out.push_back(static_cast<std::uint8_t>(s[i]));
  }
  return out;
}

inline const std::vector<std::uint8_t>& elf_header_prefix() {
  static const std::vector<std::uint8_t> kElf{0x7F, 'E', 'L', 'F', 2, 1, 1, 0,
                                              0,    0,   0,   0,   0, 0, 0, 0};
  return kElf;
}

class Builder {
 public:
  Builder(std::int64_t pid, std::size_t limit, Rng& rng) : pid_(pid), limit_(limit), rng_(rng) {}

  bool full() const { return events_.size() >= limit_; }
  std::size_t size() const { return events_.size(); }
  Rng& rng() { return rng_; }

  SyscallEvent& add(std::string_view name) {
    SyscallEvent e;
    e.pid = pid_;
    e.seq = events_.size() + 1;
    e.name = SyscallName(name);
    events_.push_back(std::move(e));
    return events_.back();
  }

  void other(std::string_view name) {
    if (!full()) add(name);
  }

  std::int64_t open(std::string_view path) {
    const std::int64_t fd = next_fd_++;
    if (full()) return fd;
    auto& e = add("sys_openat");
    e.path = std::string(path);
    e.native_return = fd;
    return fd;
  }

  void close(std::int64_t fd) {
    if (full()) return;
    auto& e = add("sys_close");
    e.fd = fd;
    e.native_return = 0;
  }

  void read(std::int64_t fd, std::int64_t len) {
    if (full()) return;
    auto& e = add("sys_read");
    e.fd = fd;
    e.buffer_len = len;
    e.native_return = len;
  }

  void write(std::int64_t fd, std::int64_t len, std::vector<std::uint8_t> prefix) {
    if (full()) return;
    auto& e = add("sys_write");
    e.fd = fd;
    e.buffer_prefix = std::move(prefix);
    e.buffer_len = len;
    e.native_return = len;
  }

  void fstat(std::int64_t fd) {
    if (full()) return;
    auto& e = add("sys_fstat");
    e.fd = fd;
    e.native_return = 0;
  }

  std::int64_t socket() {
    const std::int64_t fd = next_fd_++;
    if (!full()) add("sys_socket").native_return = fd;
    return fd;
  }

  void connect(std::int64_t fd, std::string addr) {
    if (full()) return;
    auto& e = add("sys_connect");
    e.fd = fd;
    e.sockaddr = std::move(addr);
    e.native_return = 0;
  }

  void sendto(std::int64_t fd, std::int64_t len, std::string_view payload,
              std::optional<std::string> addr = std::nullopt) {
    if (full()) return;
    auto& e = add("sys_sendto");
    e.fd = fd;
    e.buffer_prefix = bytes_of(payload);
    e.buffer_len = len;
    e.sockaddr = std::move(addr);
    e.native_return = len;
  }

  void recvfrom(std::int64_t fd, std::int64_t len) {
    if (full()) return;
    auto& e = add("sys_recvfrom");
    e.fd = fd;
    e.buffer_len = len;
    e.native_return = len;
  }

  void dup2(std::int64_t from, std::int64_t to) {
    if (full()) return;
    auto& e = add("sys_dup2");
    e.fd = from;
    e.newfd = to;
    e.native_return = to;
  }

  void simple(std::string_view name, std::int64_t ret = 0) {
    if (!full()) add(name).native_return = ret;
  }

  // Dynamic loader start-up: every descriptor here is critical.
  void loader_prologue() {
    const auto cache = open("/etc/ld.so.cache");
    fstat(cache);
    other("sys_mmap");
    close(cache);
    const auto libc = open("/lib/x86_64-linux-gnu/libc.so.6");
    if (!full()) {
      auto& e = add("sys_read");
      e.fd = libc;
      e.buffer_len = 832;
      e.native_return = 832;
    }
    fstat(libc);
    other("sys_mmap");
    other("sys_mmap");
    other("sys_mprotect");
    close(libc);
    other("sys_arch_prctl");
    other("sys_set_tid_address");
    next_fd_ = 3;
  }

  std::int64_t reserve_fd() { return next_fd_++; }

  std::vector<SyscallEvent> take() { return std::move(events_); }

 private:
  std::int64_t pid_;
  std::size_t limit_;
  Rng& rng_;
  std::int64_t next_fd_ = 3;
  std::vector<SyscallEvent> events_;
};

struct Weighted {
  double weight;
  std::function<void(Builder&)> emit;
};

inline void run_mix(Builder& b, const std::vector<Weighted>& mix) {
  double total = 0;
  for (const auto& w : mix) total += w.weight;
  while (!b.full()) {
    double x = b.rng().uniform01() * total;
    for (const auto& w : mix) {
      if (x < w.weight) {
        w.emit(b);
        break;
      }
      x -= w.weight;
    }
  }
}

inline std::string random_public_addr(Rng& rng, int port) {
  return std::to_string(rng.uniform_int(1, 223)) + "." + std::to_string(rng.uniform_int(0, 255)) +
         "." + std::to_string(rng.uniform_int(0, 255)) + "." +
         std::to_string(rng.uniform_int(1, 254)) + ":" + std::to_string(port);
}

inline void flooder(Builder& b) {
  b.loader_prologue();
  const auto sock = b.socket();
  b.connect(sock, "198.51.100.20:80");
  run_mix(b, {{0.94, [&](Builder& x) { x.sendto(sock, 64, "GET / HTTP/1.1\r\n", "198.51.100.20:80"); }},
              {0.02, [&](Builder& x) { x.recvfrom(sock, 1500); }},
              {0.02, [](Builder& x) { x.simple("sys_nanosleep"); }},
              {0.02, [](Builder& x) { x.other("sys_clock_gettime"); }}});
}

inline void virus(Builder& b) {
  b.loader_prologue();
  int victim = 0;
  run_mix(b, {{0.45,
               [&](Builder& x) {
                 const auto fd = x.open("/home/user/bin/prog" + std::to_string(victim++));
                 x.read(fd, 64);
                 if (!x.full()) {
                   auto& e = x.add("sys_lseek");
                   e.fd = fd;
                   e.offset = 0;
                   e.native_return = 0;
                 }
                 x.write(fd, 4096, elf_header_prefix());
                 x.close(fd);
               }},
              {0.20, [](Builder& x) { x.other("sys_getdents64"); }},
              {0.20,
               [](Builder& x) {
                 if (x.full()) return;
                 auto& e = x.add("sys_stat");
                 e.path = "/home/user/bin";
                 e.native_return = 0;
               }},
              {0.15, [](Builder& x) { x.other("sys_brk"); }}});
}

inline void spyware(Builder& b) {
  b.loader_prologue();
  const auto hist = b.open("/home/user/.bash_history");
  b.read(hist, 4096);
  b.close(hist);
  const auto sock = b.socket();
  b.connect(sock, "203.0.113.50:8080");
  if (!b.full()) {
    auto& e = b.add("sys_dup");
    e.fd = 1;
    e.native_return = b.reserve_fd();
  }
  run_mix(b, {{0.05, [&](Builder& x) { x.sendto(sock, 65536, "user=admin&pass="); }},
              {0.15, [](Builder& x) { x.read(0, 1024); }},
              {0.50, [](Builder& x) { x.other("sys_poll"); }},
              {0.30, [](Builder& x) { x.other("sys_ioctl"); }}});
}

inline void trojan(Builder& b) {
  b.loader_prologue();
  if (!b.full()) {
    auto& e = b.add("sys_rename");
    e.path = "/usr/bin/ls";
    e.newpath = "/usr/bin/.ls.orig";
    e.native_return = 0;
  }
  const auto bin = b.reserve_fd();
  if (!b.full()) {
    auto& e = b.add("sys_creat");
    e.path = "/usr/bin/ls";
    e.native_return = bin;
  }
  b.write(bin, 8192, elf_header_prefix());
  b.close(bin);
  const auto sock = b.socket();
  if (!b.full()) {
    auto& e = b.add("sys_bind");
    e.fd = sock;
    e.sockaddr = "0.0.0.0:4444";
    e.native_return = 0;
  }
  if (!b.full()) {
    auto& e = b.add("sys_listen");
    e.fd = sock;
    e.backlog = 16;
    e.native_return = 0;
  }
  run_mix(b, {{0.10,
               [&](Builder& x) {
                 if (x.full()) return;
                 auto& e = x.add("sys_accept");
                 e.fd = sock;
                 e.native_return = sock + 1;
               }},
              {0.25, [&](Builder& x) { x.recvfrom(sock + 1, 512); }},
              {0.25, [&](Builder& x) { x.sendto(sock + 1, 512, "uid=0(root)"); }},
              {0.05, [](Builder& x) { x.simple("sys_fork", 0); }},
              {0.35, [](Builder& x) { x.other("sys_wait4"); }}});
}

inline void worm(Builder& b) {
  b.loader_prologue();
  run_mix(b, {{0.04,
               [](Builder& x) {
                 const auto fd = x.socket();
                 x.connect(fd, random_public_addr(x.rng(), 22));
                 x.close(fd);
               }},
              {0.02, [](Builder& x) { x.simple("sys_fork", 0); }},
              {0.94, [](Builder& x) { x.other("sys_select"); }}});
}

inline void benign_io(Builder& b) {
  b.loader_prologue();
  int n = 0;
  run_mix(b, {{0.10,
               [&](Builder& x) {
                 const auto in = x.open("/home/user/data/input" + std::to_string(n++) + ".txt");
                 x.read(in, 4096);
                 x.read(in, 4096);
                 x.close(in);
               }},
              {0.10,
               [&](Builder& x) {
                 const auto out = x.open("/home/user/data/out" + std::to_string(n++) + ".txt");
                 x.write(out, 4096, bytes_of("result line 0001"));
                 x.write(out, 4096, bytes_of("result line 0002"));
                 x.close(out);
               }},
              {0.10,
               [](Builder& x) {
                 if (x.full()) return;
                 auto& e = x.add("sys_stat");
                 e.path = "/home/user/data";
                 e.native_return = 0;
               }},
              {0.30, [](Builder& x) { x.write(1, 80, bytes_of("progress: 42%\n")); }},
              {0.40, [](Builder& x) { x.other("sys_brk"); }}});
}

inline void benign_cpu(Builder& b) {
  b.loader_prologue();
  run_mix(b, {{0.04, [](Builder& x) { x.write(1, 64, bytes_of("iteration done\n")); }},
              {0.48, [](Builder& x) { x.other("sys_futex"); }},
              {0.28, [](Builder& x) { x.other("sys_brk"); }},
              {0.20, [](Builder& x) { x.other("sys_getrusage"); }}});
}

// Backdoor install, bind shell with three stdin/stdout redirections, key
// theft, then keylogger exfiltration. Padding syscalls outside the
// interference set are spread between the steps until event_count is reached.
inline void apt(Builder& b, std::size_t event_count) {
  std::vector<std::function<void(Builder&)>> steps;
  steps.push_back([](Builder& x) { x.loader_prologue(); });
  steps.push_back([](Builder& x) {
    const auto cfg = x.open("/tmp/.backdoor/config");
    x.write(cfg, 128, bytes_of("PORT=4444\nKEY=d3"));
    x.write(cfg, 64, bytes_of("CC=203.0.113.7\n"));
    x.close(cfg);
  });
  steps.push_back([](Builder& x) {
    const auto bin = x.open("/tmp/.backdoor/sshd");
    x.write(bin, 4096, elf_header_prefix());
    x.write(bin, 4096, bytes_of("\x48\x89\xe5\x48\x83\xec\x10"));
    x.close(bin);
  });
  steps.push_back([](Builder& x) {
    const auto sock = x.socket();
    if (!x.full()) {
      auto& e = x.add("sys_bind");
      e.fd = sock;
      e.sockaddr = "0.0.0.0:4444";
      e.native_return = 0;
    }
    if (!x.full()) {
      auto& e = x.add("sys_listen");
      e.fd = sock;
      e.backlog = 1;
      e.native_return = 0;
    }
    for (int i = 0; i < 3; ++i) {
      const auto conn = x.reserve_fd();
      if (!x.full()) {
        auto& e = x.add("sys_accept");
        e.fd = sock;
        e.native_return = conn;
      }
      x.dup2(conn, 0);
      x.dup2(conn, 1);
      x.other("sys_execve");
    }
  });
  steps.push_back([](Builder& x) {
    const auto key = x.open("/home/admin/.ssh/id_rsa");
    x.read(key, 1679);
    x.other("sys_poll");
    x.read(key, 4096);
    x.close(key);
    const auto pub = x.open("/home/admin/.ssh/id_rsa.pub");
    x.read(pub, 400);
    x.close(pub);
  });
  steps.push_back([](Builder& x) {
    const auto log = x.open("/tmp/.keylog");
    for (int i = 0; i < 5; ++i) {
      x.read(0, 16);
      x.write(log, 16, bytes_of("keystrokes:ls -l"));
    }
    const auto sock = x.socket();
    x.connect(sock, "203.0.113.7:443");
    for (int i = 0; i < 3; ++i) x.sendto(sock, 2048, "EXFIL:keylog....");
    x.close(log);
  });

  // Size the fixed part, then spread the padding between steps.
  Rng probe(0);
  Builder dry(0, SIZE_MAX, probe);
  for (const auto& s : steps) s(dry);
  const std::size_t fixed = dry.size();
  const std::size_t padding = event_count > fixed ? event_count - fixed : 0;
  std::vector<std::size_t> pad(steps.size(), 0);
  for (std::size_t i = 0; i < padding; ++i) {
    ++pad[1 + b.rng().index(steps.size() - 1)];  // never before the loader
  }
  static constexpr std::array<std::string_view, 4> kPad{"sys_poll", "sys_futex",
                                                        "sys_clock_gettime", "sys_getpid"};
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (std::size_t k = 0; k < pad[i]; ++k) b.other(kPad[b.rng().index(kPad.size())]);
    steps[i](b);
  }
}

}  // namespace scenario_detail

inline TraceFile generate_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  using namespace scenario_detail;
  Rng rng(derive_seed(seed, {fnv1a64(to_string(spec.archetype))}));
  const std::size_t limit = spec.archetype == Archetype::kAPT ? SIZE_MAX : spec.event_count;
  Builder b(spec.pid, limit, rng);
  switch (spec.archetype) {
    case Archetype::kFlooder: flooder(b); break;
    case Archetype::kVirus: virus(b); break;
    case Archetype::kSpyware: spyware(b); break;
    case Archetype::kTrojanBackdoor: trojan(b); break;
    case Archetype::kWorm: worm(b); break;
    case Archetype::kBenignIO: benign_io(b); break;
    case Archetype::kBenignCPU: benign_cpu(b); break;
    case Archetype::kAPT: apt(b, spec.event_count); break;
  }
  TraceFile t;
  t.events = b.take();
  t.header.meta["scenario"] = spec.name.empty() ? std::string(to_string(spec.archetype)) : spec.name;
  t.header.meta["archetype"] = std::string(to_string(spec.archetype));
  t.header.meta["seed"] = seed;
  t.header.meta["synthetic"] = true;
  t.header.meta["program"] = "/opt/scenarios/" + std::string(to_string(spec.archetype));
  return t;
}

}  // namespace uncertain
