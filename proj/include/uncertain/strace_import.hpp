#pragma once

// Best-effort conversion of strace text output (-f, -y, -t/-tt/-ttt/-r) into
// a TraceFile. Interference-set calls with decodable arguments become full
// events, other syscall lines become events classified Other, and lines that
// are not syscalls at all (signals, exit notices, tracer chatter) are counted
// as dropped.

#include <string.h>

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "uncertain/event.hpp"
#include "uncertain/syscall_model.hpp"
#include "uncertain/trace_io.hpp"

namespace uncertain {

struct ImportReport {
  std::size_t lines_total = 0;
  std::size_t lines_recognized = 0;  // in-set calls with full argument decode
  std::size_t lines_fallback = 0;    // unmodeled or undecodable calls
  std::size_t lines_dropped = 0;     // not a syscall line
  std::size_t unfinished_joined = 0;
  std::size_t unfinished_orphaned = 0;

  std::size_t events_out() const { return lines_recognized + lines_fallback; }
};

struct ImportResult {
  TraceFile trace;
  ImportReport report;
};

struct ImportOptions {
  // pid used when lines carry no pid prefix (strace without -f).
  std::int64_t default_pid = 1;
};

namespace strace_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<std::int64_t> errno_from_name(std::string_view name) {
  static const std::map<std::string, int, std::less<>> table = [] {
    std::map<std::string, int, std::less<>> m;
    for (int e = 1; e < 4096; ++e) {
      if (const char* n = ::strerrorname_np(e)) m.emplace(n, e);
    }
    return m;
  }();
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

// Integer literal: decimal, negative, or 0x hex, optionally followed by a
// -y style "<...>" decoration.
inline std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '-') {
    neg = true;
    i = 1;
  }
  int base = 10;
  if (s.size() > i + 1 && s[i] == '0' && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
    base = 16;
    i += 2;
  }
  const std::size_t start = i;
  std::uint64_t v = 0;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    int d;
    if (c >= '0' && c <= '9') {
      d = c - '0';
    } else if (base == 16 && c >= 'a' && c <= 'f') {
      d = c - 'a' + 10;
    } else if (base == 16 && c >= 'A' && c <= 'F') {
      d = c - 'A' + 10;
    } else {
      break;
    }
    v = v * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(d);
  }
  if (i == start) return std::nullopt;
  if (i < s.size() && s[i] != '<') return std::nullopt;
  const auto sv = static_cast<std::int64_t>(v);
  return neg ? -sv : sv;
}

// Decodes a C-style quoted string as printed by strace. Returns nullopt when
// the argument is not a string literal (e.g. a pointer printed as 0x...).
inline std::optional<std::string> parse_string(std::string_view s) {
  s = trim(s);
  if (s.empty() || s.front() != '"') return std::nullopt;
  std::string out;
  std::size_t i = 1;
  while (i < s.size() && s[i] != '"') {
    char c = s[i++];
    if (c != '\\' || i >= s.size()) {
      out.push_back(c);
      continue;
    }
    c = s[i++];
    switch (c) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'v': out.push_back('\v'); break;
      case 'f': out.push_back('\f'); break;
      case 'a': out.push_back('\a'); break;
      case 'b': out.push_back('\b'); break;
      case 'e': out.push_back('\x1b'); break;
      case 'x': {
        int v = 0, n = 0;
        while (n < 2 && i < s.size() && std::isxdigit(static_cast<unsigned char>(s[i]))) {
          const char h = s[i++];
          v = v * 16 + (std::isdigit(static_cast<unsigned char>(h)) ? h - '0'
                                                                    : (std::tolower(h) - 'a' + 10));
          ++n;
        }
        out.push_back(static_cast<char>(v));
        break;
      }
      default:
        if (c >= '0' && c <= '7') {
          int v = c - '0', n = 1;
          while (n < 3 && i < s.size() && s[i] >= '0' && s[i] <= '7') {
            v = v * 8 + (s[i++] - '0');
            ++n;
          }
          out.push_back(static_cast<char>(v & 0xFF));
        } else {
          out.push_back(c);
        }
    }
  }
  if (i >= s.size()) return std::nullopt;  // unterminated
  return out;
}

// Splits an argument list on top-level commas.
inline std::vector<std::string_view> split_args(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  bool in_str = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      --depth;
    } else if (c == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  const auto last = trim(s.substr(start));
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

// Index of the parenthesis closing the one at `open`, or npos.
inline std::size_t matching_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

inline std::optional<std::string> parse_sockaddr(std::string_view s) {
  static const std::regex v4(
      R"re(sa_family=AF_INET,\s*sin_port=htons\((\d+)\),\s*sin_addr=inet_addr\("([0-9.]+)"\))re");
  static const std::regex v6(
      R"re(sa_family=AF_INET6,\s*sin6_port=htons\((\d+)\).*inet_pton\(AF_INET6,\s*"([0-9a-fA-F:.]+)")re");
  const std::string str(s);
  std::smatch m;
  if (std::regex_search(str, m, v4)) return m[2].str() + ":" + m[1].str();
  if (std::regex_search(str, m, v6)) return "[" + m[2].str() + "]:" + m[1].str();
  return std::nullopt;
}

struct IovSummary {
  std::int64_t total = 0;
  bool any = false;
  std::optional<std::string> first_base;
};

inline IovSummary parse_iov(std::string_view s) {
  static const std::regex len_re(R"re(iov_len=(\d+))re");
  IovSummary out;
  const std::string str(s);
  for (auto it = std::sregex_iterator(str.begin(), str.end(), len_re);
       it != std::sregex_iterator(); ++it) {
    out.total += std::stoll((*it)[1].str());
    out.any = true;
  }
  const auto base = str.find("iov_base=");
  if (base != std::string::npos) out.first_base = parse_string(std::string_view(str).substr(base + 9));
  return out;
}

inline std::vector<std::uint8_t> prefix_bytes(const std::string& s) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size() && i < kMaxBufferPrefix; ++i) {
    out.push_back(static_cast<std::uint8_t>(s[i]));
  }
  return out;
}

inline std::optional<std::int64_t> parse_return(std::string_view s) {
  s = trim(s);
  if (s.empty() || s.front() == '?') return std::nullopt;
  const auto first_space = s.find(' ');
  const auto tok = s.substr(0, first_space);
  auto v = parse_int(tok);
  if (!v) return std::nullopt;
  if (*v == -1 && first_space != std::string_view::npos) {
    auto rest = trim(s.substr(first_space));
    const auto end = rest.find(' ');
    if (auto e = errno_from_name(rest.substr(0, end))) return -*e;
  }
  return v;
}

// Socket call numbers for the i386 socketcall multiplexer.
inline Syscall socketcall_target(std::int64_t call) {
  switch (call) {
    case 2: return Syscall::kBind;
    case 3: return Syscall::kConnect;
    case 4: return Syscall::kListen;
    case 5: return Syscall::kAccept;
    case 9: return Syscall::kSendto;
    case 10: return Syscall::kRecvfrom;
    case 11: return Syscall::kSendto;
    case 12: return Syscall::kRecvfrom;
    case 16: return Syscall::kSendmsg;
    case 17: return Syscall::kRecvmsg;
    case 18: return Syscall::kAccept4;
    default: return Syscall::kOther;
  }
}

// Fills event fields for an in-set call. Returns false when a field the
// strategies depend on cannot be decoded.
inline bool decode_args(SyscallEvent& e, std::string_view bare,
                        const std::vector<std::string_view>& a) {
  auto arg = [&](std::size_t i) -> std::string_view { return i < a.size() ? a[i] : std::string_view{}; };
  auto need_fd = [&](std::size_t i) {
    e.fd = parse_int(arg(i));
    return e.fd.has_value();
  };
  auto need_path = [&](std::optional<std::string>& dst, std::size_t i) {
    dst = parse_string(arg(i));
    return dst.has_value();
  };
  auto set_prefix = [&](const std::optional<std::string>& s) {
    if (s && e.buffer_len) e.buffer_prefix = prefix_bytes(*s);
  };

  switch (e.id()) {
    case Syscall::kOpen:
    case Syscall::kCreat:
      return need_path(e.path, 0);
    case Syscall::kOpenat:
      return need_path(e.path, 1);
    case Syscall::kRead:
    case Syscall::kPread64:
    case Syscall::kRecvfrom:
      if (!need_fd(0)) return false;
      e.buffer_len = parse_int(arg(2));
      return e.buffer_len.has_value();
    case Syscall::kWrite:
    case Syscall::kPwrite64:
    case Syscall::kSendto:
      if (!need_fd(0)) return false;
      e.buffer_len = parse_int(arg(2));
      if (!e.buffer_len) return false;
      set_prefix(parse_string(arg(1)));
      if (e.id() == Syscall::kSendto) e.sockaddr = parse_sockaddr(arg(4));
      return true;
    case Syscall::kReadv:
    case Syscall::kWritev:
    case Syscall::kPreadv:
    case Syscall::kPwritev:
    case Syscall::kSendmsg:
    case Syscall::kRecvmsg: {
      if (!need_fd(0)) return false;
      const auto iov = parse_iov(arg(1));
      if (!iov.any) return false;
      e.buffer_len = iov.total;
      if (is_write_family(e.id())) set_prefix(iov.first_base);
      if (e.id() == Syscall::kSendmsg) e.sockaddr = parse_sockaddr(arg(1));
      return true;
    }
    case Syscall::kLseek:
      if (!need_fd(0)) return false;
      if (bare == "_llseek" || bare == "llseek") {
        const auto hi = parse_int(arg(1)), lo = parse_int(arg(2));
        if (hi && lo) e.offset = (*hi << 32) | (*lo & 0xFFFFFFFF);
      } else {
        e.offset = parse_int(arg(1));
      }
      return e.offset.has_value();
    case Syscall::kClose:
    case Syscall::kFstat:
    case Syscall::kFstat64:
    case Syscall::kAccept:
    case Syscall::kAccept4:
    case Syscall::kDup:
      return need_fd(0);
    case Syscall::kDup2:
    case Syscall::kDup3:
      if (!need_fd(0)) return false;
      e.newfd = parse_int(arg(1));
      return e.newfd.has_value();
    case Syscall::kStat:
    case Syscall::kLstat:
    case Syscall::kStat64:
    case Syscall::kLstat64:
      if (bare == "newfstatat" || bare == "fstatat64") {
        e.fd = parse_int(arg(0));
        return need_path(e.path, 1);
      }
      return need_path(e.path, 0);
    case Syscall::kUnlink:
      return need_path(e.path, bare == "unlinkat" ? 1 : 0);
    case Syscall::kRename:
      if (bare == "renameat" || bare == "renameat2") {
        return need_path(e.path, 1) && need_path(e.newpath, 3);
      }
      return need_path(e.path, 0) && need_path(e.newpath, 1);
    case Syscall::kBind:
    case Syscall::kConnect:
      if (!need_fd(0)) return false;
      e.sockaddr = parse_sockaddr(arg(1));
      return true;
    case Syscall::kListen:
      if (!need_fd(0)) return false;
      e.backlog = parse_int(arg(1));
      return e.backlog.has_value();
    case Syscall::kSocketcall:
    case Syscall::kFork:
    case Syscall::kClone:
    case Syscall::kNanosleep:
      return true;
    case Syscall::kOther:
      return false;
  }
  return false;
}

struct ParsedCall {
  std::string name;
  std::string args;
  std::optional<std::string> ret;  // text after '=', absent when unfinished
};

// Parses "name(args) = ret". Without a closing paren (truncated or
// unfinished text) the remaining text is taken as the argument list.
inline std::optional<ParsedCall> parse_call(std::string_view s) {
  s = trim(s);
  std::size_t i = 0;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
  if (i == 0 || i >= s.size() || s[i] != '(' ||
      std::isdigit(static_cast<unsigned char>(s[0]))) {
    return std::nullopt;
  }
  ParsedCall pc;
  pc.name = std::string(s.substr(0, i));
  const auto close = matching_paren(s, i);
  if (close == std::string_view::npos) {
    pc.args = std::string(s.substr(i + 1));
    return pc;
  }
  pc.args = std::string(s.substr(i + 1, close - i - 1));
  auto rest = trim(s.substr(close + 1));
  if (!rest.empty() && rest.front() == '=') pc.ret = std::string(trim(rest.substr(1)));
  return pc;
}

inline bool looks_like_timestamp(std::string_view tok) {
  if (tok.empty()) return false;
  bool digit = false;
  for (const char c : tok) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ':') {
      return false;
    }
  }
  return digit && (tok.find('.') != std::string_view::npos || tok.find(':') != std::string_view::npos);
}

}  // namespace strace_detail

inline ImportResult import_strace_stream(std::istream& in, const ImportOptions& opts = {}) {
  using namespace strace_detail;

  struct Slot {
    std::int64_t pid;
    std::string text;  // "name(args) = ret" once complete
    bool complete = false;
  };
  std::vector<Slot> slots;
  std::map<std::int64_t, std::size_t> pending;  // pid -> slot awaiting resume
  ImportResult result;
  auto& rep = result.report;

  std::string raw;
  while (std::getline(in, raw)) {
    ++rep.lines_total;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    line = trim(line);
    if (line.empty()) {
      ++rep.lines_dropped;
      continue;
    }

    std::int64_t pid = opts.default_pid;
    if (line.substr(0, 5) == "[pid ") {
      const auto close = line.find(']');
      const auto v = close == std::string_view::npos ? std::nullopt
                                                     : parse_int(line.substr(5, close - 5));
      if (!v) {
        ++rep.lines_dropped;
        continue;
      }
      pid = *v;
      line = trim(line.substr(close + 1));
    } else if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) {
      const auto sp = line.find_first_of(" \t");
      const auto tok = line.substr(0, sp);
      if (sp != std::string_view::npos && !looks_like_timestamp(tok)) {
        if (const auto v = parse_int(tok)) {
          pid = *v;
          line = trim(line.substr(sp));
        }
      }
    }
    {
      const auto sp = line.find_first_of(" \t");
      if (sp != std::string_view::npos && looks_like_timestamp(line.substr(0, sp))) {
        line = trim(line.substr(sp));
      }
    }

    if (line.substr(0, 5) == "<... ") {
      const auto marker = line.find(" resumed>");
      const auto it = pending.find(pid);
      if (marker == std::string_view::npos || it == pending.end()) {
        ++rep.lines_dropped;
        continue;
      }
      Slot& slot = slots[it->second];
      slot.text += std::string(line.substr(marker + 9));
      slot.complete = true;
      pending.erase(it);
      ++rep.unfinished_joined;
      continue;
    }

    constexpr std::string_view kUnfinished = "<unfinished ...>";
    const auto unf = line.find(kUnfinished);
    if (unf != std::string_view::npos) {
      auto head = line.substr(0, unf);
      while (!head.empty() && head.back() == ' ') head.remove_suffix(1);
      if (!parse_call(head)) {
        ++rep.lines_dropped;
        continue;
      }
      pending[pid] = slots.size();
      slots.push_back({pid, std::string(head), false});
      continue;
    }

    if (!parse_call(line)) {
      ++rep.lines_dropped;
      continue;
    }
    slots.push_back({pid, std::string(line), true});
  }

  std::map<std::int64_t, std::uint64_t> next_seq;
  for (const auto& slot : slots) {
    if (!slot.complete) ++rep.unfinished_orphaned;
    const auto pc = parse_call(slot.text);
    SyscallEvent e;
    e.pid = slot.pid;
    e.seq = ++next_seq[slot.pid];
    const std::string_view bare = pc->name;
    Syscall id = resolve_syscall(bare);
    auto args = split_args(pc->args);
    if (id == Syscall::kSocketcall && !args.empty()) {
      if (const auto call = parse_int(args[0])) {
        const Syscall target = socketcall_target(*call);
        if (target != Syscall::kOther && args.size() >= 2 && args[1].size() >= 2 &&
            args[1].front() == '[' && args[1].back() == ']') {
          id = target;
          args = split_args(args[1].substr(1, args[1].size() - 2));
        }
      }
    }
    if (pc->ret) e.native_return = parse_return(*pc->ret);

    if (id == Syscall::kOther) {
      e.name = SyscallName("sys_" + pc->name);
      ++rep.lines_fallback;
    } else {
      e.name = SyscallName(id);
      SyscallEvent decoded = e;
      if (decode_args(decoded, bare, args)) {
        e = std::move(decoded);
        ++rep.lines_recognized;
      } else {
        e.name = SyscallName("other");
        ++rep.lines_fallback;
      }
    }
    result.trace.events.push_back(std::move(e));
  }
  if (result.trace.events.empty()) {
    throw TraceError(0, "no parseable syscall lines in strace input");
  }
  result.trace.header.meta["source"] = "strace";
  return result;
}

inline ImportResult import_strace(const std::string& path, const ImportOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(0, "cannot read strace file: " + path);
  return import_strace_stream(in, opts);
}

inline ImportResult import_strace_text(const std::string& text, const ImportOptions& opts = {}) {
  std::istringstream in(text);
  return import_strace_stream(in, opts);
}

}  // namespace uncertain
