#pragma once

// Arbitrary-but-plausible events for fuzz and property tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uncertain/event.hpp"
#include "uncertain/syscall_model.hpp"

namespace uncertain::testing {

inline SyscallEvent random_event(std::mt19937_64& gen, std::int64_t pid, std::uint64_t seq) {
  SyscallEvent e;
  e.pid = pid;
  e.seq = seq;
  const auto k = gen() % (kInterferenceSetSize + 4);
  if (k >= kInterferenceSetSize) {
    e.name = SyscallName("sys_getpid");
    return e;
  }
  const auto s = static_cast<Syscall>(k);
  e.name = SyscallName(s);
  if (takes_fd(s) || is_dup_family(s)) e.fd = static_cast<std::int64_t>(gen() % 12);
  if (takes_buffer(s)) {
    e.buffer_len = static_cast<std::int64_t>(1 + gen() % 8192);
    std::vector<std::uint8_t> prefix(std::min<std::size_t>(16, static_cast<std::size_t>(*e.buffer_len)));
    for (auto& b : prefix) b = static_cast<std::uint8_t>(gen());
    if (gen() % 50 == 0 && prefix.size() >= 4) {
      prefix[0] = 0x7F;
      prefix[1] = 'E';
      prefix[2] = 'L';
      prefix[3] = 'F';
    }
    e.buffer_prefix = prefix;
  }
  if (is_open_family(s)) {
    static const char* kPaths[] = {"/lib/libc.so.6", "/tmp/a", "/home/u/notes.txt",
                                   "/etc/hosts", "/var/log/x"};
    e.path = kPaths[gen() % 5];
    e.native_return = static_cast<std::int64_t>(3 + gen() % 9);
  }
  if (s == Syscall::kDup2 || s == Syscall::kDup3) e.newfd = static_cast<std::int64_t>(gen() % 12);
  if (s == Syscall::kDup) e.native_return = static_cast<std::int64_t>(3 + gen() % 9);
  if (s == Syscall::kConnect || s == Syscall::kBind) {
    e.sockaddr = "93.184.216." + std::to_string(gen() % 256) + ":" + std::to_string(gen() % 65536);
  }
  if (s == Syscall::kListen) e.backlog = static_cast<std::int64_t>(gen() % 128);
  if (s == Syscall::kLseek) e.offset = static_cast<std::int64_t>(gen() % 10000);
  if (s == Syscall::kUnlink || s == Syscall::kRename) e.path = gen() % 2 ? "/usr/bin/ls" : "/tmp/t";
  return e;
}

}  // namespace uncertain::testing
