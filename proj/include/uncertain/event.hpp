#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uncertain/syscall_model.hpp"

namespace uncertain {

inline constexpr std::size_t kMaxBufferPrefix = 16;

// One observed syscall invocation. Only the arguments the interference
// strategies and behavior rules need are modeled.
struct SyscallEvent {
  std::int64_t pid = 0;
  std::uint64_t seq = 0;
  SyscallName name;
  std::optional<std::int64_t> fd;
  std::optional<std::string> path;
  std::optional<std::vector<std::uint8_t>> buffer_prefix;
  std::optional<std::int64_t> buffer_len;
  std::optional<std::string> sockaddr;  // "ip:port"
  std::optional<std::int64_t> backlog;
  std::optional<std::int64_t> offset;
  std::optional<std::int64_t> native_return;
  // Second descriptor of dup2/dup3 and destination path of rename.
  std::optional<std::int64_t> newfd;
  std::optional<std::string> newpath;

  Syscall id() const { return name.id(); }
  bool operator==(const SyscallEvent&) const = default;
};

class InvalidEvent : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Field-level invariants that hold independent of sequence context.
inline void validate_event(const SyscallEvent& e) {
  if (e.buffer_prefix) {
    if (!e.buffer_len) {
      throw InvalidEvent("buffer_prefix present without buffer_len");
    }
    if (e.buffer_prefix->size() > kMaxBufferPrefix) {
      throw InvalidEvent("buffer_prefix longer than 16 bytes");
    }
  }
  if (e.buffer_len && *e.buffer_len < 0) {
    throw InvalidEvent("negative buffer_len");
  }
}

inline bool starts_with_elf_magic(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 4 && bytes[0] == 0x7F && bytes[1] == 'E' &&
         bytes[2] == 'L' && bytes[3] == 'F';
}

}  // namespace uncertain
