#pragma once

// Native trace format (JSON lines) plus the decision-log and statistics
// encodings.
//
// Trace file:
//   line 1   {"format":"uncertain-trace","format_version":1,"arch":...,"meta":{...}}
//   line 2.. one SyscallEvent per line; keys in this order, absent fields
//            omitted: pid seq name fd path buffer_prefix buffer_len sockaddr
//            backlog offset native_return newfd newpath
//            buffer_prefix is lowercase hex of at most 16 bytes.
//
// Decision log line keys, in order: pid seq name category verdict strategy
// error_code delay_seconds lower_priority forced_return reduced_len
// corrupt_byte_count redirect_addr backlog_cap offset_delta threshold_used
// roll reason buffer_len behaviors.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "uncertain/event.hpp"
#include "uncertain/strategy_engine.hpp"

namespace uncertain {

using OrderedJson = nlohmann::ordered_json;

inline constexpr int kTraceFormatVersion = 1;
inline constexpr const char* kTraceFormatName = "uncertain-trace";

class TraceError : public std::runtime_error {
 public:
  TraceError(std::size_t line, const std::string& msg)
      : std::runtime_error(line == 0 ? msg : "line " + std::to_string(line) + ": " + msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class TraceVersionError : public TraceError {
 public:
  using TraceError::TraceError;
};

struct TraceHeader {
  int format_version = kTraceFormatVersion;
  std::string arch = "x86_64";
  OrderedJson meta = OrderedJson::object();
  bool operator==(const TraceHeader&) const = default;
};

struct TraceFile {
  TraceHeader header;
  std::vector<SyscallEvent> events;
  bool operator==(const TraceFile&) const = default;
};

namespace detail {

inline std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

inline std::optional<std::vector<std::uint8_t>> from_hex(const std::string& s) {
  if (s.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = nibble(s[i]), lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

}  // namespace detail

inline OrderedJson event_to_json(const SyscallEvent& e) {
  OrderedJson j;
  j["pid"] = e.pid;
  j["seq"] = e.seq;
  j["name"] = e.name.text();
  if (e.fd) j["fd"] = *e.fd;
  if (e.path) j["path"] = *e.path;
  if (e.buffer_prefix) j["buffer_prefix"] = detail::to_hex(*e.buffer_prefix);
  if (e.buffer_len) j["buffer_len"] = *e.buffer_len;
  if (e.sockaddr) j["sockaddr"] = *e.sockaddr;
  if (e.backlog) j["backlog"] = *e.backlog;
  if (e.offset) j["offset"] = *e.offset;
  if (e.native_return) j["native_return"] = *e.native_return;
  if (e.newfd) j["newfd"] = *e.newfd;
  if (e.newpath) j["newpath"] = *e.newpath;
  return j;
}

inline std::string serialize_event(const SyscallEvent& e) {
  return event_to_json(e).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

// Parses one event object. Throws TraceError(line, ...) on any violation.
inline SyscallEvent event_from_json(const nlohmann::json& j, std::size_t line = 0) {
  if (!j.is_object()) throw TraceError(line, "event is not a JSON object");
  static const std::set<std::string> kKeys{
      "pid", "seq", "name", "fd", "path", "buffer_prefix", "buffer_len", "sockaddr",
      "backlog", "offset", "native_return", "newfd", "newpath"};
  for (const auto& [k, _] : j.items()) {
    if (kKeys.count(k) == 0) throw TraceError(line, "unknown event field '" + k + "'");
  }
  auto req_int = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw TraceError(line, std::string("missing field '") + key + "'");
    const auto& v = j[key];
    if (!v.is_number_integer()) throw TraceError(line, std::string("field '") + key + "' must be an integer");
    return v;
  };
  auto opt_int = [&](const char* key) -> std::optional<std::int64_t> {
    if (!j.contains(key)) return std::nullopt;
    const auto& v = j[key];
    if (!v.is_number_integer()) throw TraceError(line, std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
  };
  auto opt_str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    const auto& v = j[key];
    if (!v.is_string()) throw TraceError(line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  };

  SyscallEvent e;
  e.pid = req_int("pid").get<std::int64_t>();
  const auto& seq = req_int("seq");
  if (seq.is_number_unsigned()) {
    e.seq = seq.get<std::uint64_t>();
  } else {
    const auto v = seq.get<std::int64_t>();
    if (v < 0) throw TraceError(line, "field 'seq' must be non-negative");
    e.seq = static_cast<std::uint64_t>(v);
  }
  const auto name = opt_str("name");
  if (!name) throw TraceError(line, "missing field 'name'");
  e.name = SyscallName(*name);
  e.fd = opt_int("fd");
  e.path = opt_str("path");
  if (const auto hex = opt_str("buffer_prefix")) {
    auto bytes = detail::from_hex(*hex);
    if (!bytes) throw TraceError(line, "buffer_prefix is not valid hex");
    e.buffer_prefix = std::move(*bytes);
  }
  e.buffer_len = opt_int("buffer_len");
  e.sockaddr = opt_str("sockaddr");
  e.backlog = opt_int("backlog");
  e.offset = opt_int("offset");
  e.native_return = opt_int("native_return");
  e.newfd = opt_int("newfd");
  e.newpath = opt_str("newpath");
  try {
    validate_event(e);
  } catch (const InvalidEvent& ex) {
    throw TraceError(line, ex.what());
  }
  return e;
}

inline OrderedJson header_to_json(const TraceHeader& h) {
  OrderedJson j;
  j["format"] = kTraceFormatName;
  j["format_version"] = h.format_version;
  j["arch"] = h.arch;
  j["meta"] = h.meta;
  return j;
}

inline void write_trace(std::ostream& out, const TraceFile& t) {
  out << header_to_json(t.header).dump() << '\n';
  for (const auto& e : t.events) out << serialize_event(e) << '\n';
}

inline std::string serialize_trace(const TraceFile& t) {
  std::ostringstream ss;
  write_trace(ss, t);
  return ss.str();
}

inline void save_trace(const std::string& path, const TraceFile& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError(0, "cannot write trace file: " + path);
  write_trace(out, t);
  if (!out) throw TraceError(0, "write failed: " + path);
}

// Checks per-pid sequence continuity as events stream in.
class SequenceChecker {
 public:
  void check(const SyscallEvent& e, std::size_t line) {
    const auto it = last_.find(e.pid);
    if (it != last_.end()) {
      if (e.seq != it->second + 1) {
        throw TraceError(line, "pid " + std::to_string(e.pid) + ": seq " +
                                   std::to_string(e.seq) + " does not follow " +
                                   std::to_string(it->second));
      }
      it->second = e.seq;
    } else {
      last_.emplace(e.pid, e.seq);
    }
  }

 private:
  std::map<std::int64_t, std::uint64_t> last_;
};

inline TraceFile parse_trace(std::istream& in) {
  TraceFile t;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw TraceError(1, "missing trace header");
  ++lineno;
  OrderedJson header;
  try {
    header = OrderedJson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw TraceError(lineno, std::string("malformed header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("format") ||
      header["format"] != kTraceFormatName) {
    throw TraceError(lineno, "not an uncertain-trace file");
  }
  for (const auto& [k, _] : header.items()) {
    if (k != "format" && k != "format_version" && k != "arch" && k != "meta") {
      throw TraceError(lineno, "unknown header field '" + k + "'");
    }
  }
  if (!header.contains("format_version") || !header["format_version"].is_number_integer()) {
    throw TraceError(lineno, "header lacks integer format_version");
  }
  t.header.format_version = header["format_version"].get<int>();
  if (t.header.format_version != kTraceFormatVersion) {
    throw TraceVersionError(lineno, "unsupported trace format_version " +
                                        std::to_string(t.header.format_version) +
                                        " (expected " + std::to_string(kTraceFormatVersion) + ")");
  }
  if (header.contains("arch")) {
    if (!header["arch"].is_string()) throw TraceError(lineno, "arch must be a string");
    t.header.arch = header["arch"].get<std::string>();
  }
  if (header.contains("meta")) {
    if (!header["meta"].is_object()) throw TraceError(lineno, "meta must be an object");
    t.header.meta = header["meta"];
  }

  SequenceChecker seqs;
  std::size_t blank_run_start = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      if (blank_run_start == 0) blank_run_start = lineno;
      continue;
    }
    if (blank_run_start != 0) throw TraceError(blank_run_start, "blank line inside trace");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw TraceError(lineno, std::string("malformed event: ") + e.what());
    }
    auto ev = event_from_json(j, lineno);
    seqs.check(ev, lineno);
    t.events.push_back(std::move(ev));
  }
  return t;
}

inline TraceFile load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(0, "cannot read trace file: " + path);
  return parse_trace(in);
}

inline TraceFile parse_trace_text(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

// ---------------------------------------------------------------------------
// Decision log

inline OrderedJson decision_to_json(const InterferenceDecision& d) {
  OrderedJson j;
  j["pid"] = d.pid;
  j["seq"] = d.seq;
  j["name"] = d.name;
  j["category"] = std::string(to_string(d.category));
  j["verdict"] = d.perturbed() ? "perturb" : "pass";
  if (d.strategy) j["strategy"] = std::string(to_string(*d.strategy));
  if (d.error_code) j["error_code"] = *d.error_code;
  if (d.delay_seconds) j["delay_seconds"] = *d.delay_seconds;
  if (d.lower_priority) j["lower_priority"] = *d.lower_priority;
  if (d.forced_return) j["forced_return"] = *d.forced_return;
  if (d.reduced_len) j["reduced_len"] = *d.reduced_len;
  if (d.corrupt_byte_count) j["corrupt_byte_count"] = *d.corrupt_byte_count;
  if (d.redirect_addr) j["redirect_addr"] = *d.redirect_addr;
  if (d.backlog_cap) j["backlog_cap"] = *d.backlog_cap;
  if (d.offset_delta) j["offset_delta"] = *d.offset_delta;
  j["threshold_used"] = d.threshold_used;
  if (d.roll) j["roll"] = *d.roll;
  if (d.reason != PassReason::kNone) j["reason"] = std::string(to_string(d.reason));
  if (d.buffer_len) j["buffer_len"] = *d.buffer_len;
  if (!d.behaviors.empty()) {
    auto arr = OrderedJson::array();
    for (const auto b : d.behaviors) arr.push_back(std::string(to_string(b)));
    j["behaviors"] = arr;
  }
  return j;
}

inline std::string serialize_decision(const InterferenceDecision& d) {
  return decision_to_json(d).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline InterferenceDecision decision_from_json(const nlohmann::json& j) {
  InterferenceDecision d;
  d.pid = j.at("pid").get<std::int64_t>();
  d.seq = j.at("seq").get<std::uint64_t>();
  d.name = j.at("name").get<std::string>();
  const auto cat = j.at("category").get<std::string>();
  d.category = cat == "file"      ? SyscallCategory::kFile
               : cat == "network" ? SyscallCategory::kNetwork
               : cat == "process" ? SyscallCategory::kProcess
                                  : SyscallCategory::kOther;
  d.verdict = j.at("verdict") == "perturb" ? Verdict::kPerturb : Verdict::kPassThrough;
  auto opt_i = [&](const char* k) -> std::optional<std::int64_t> {
    if (!j.contains(k)) return std::nullopt;
    return j[k].get<std::int64_t>();
  };
  if (j.contains("strategy")) {
    d.strategy = strategy_from_string(j["strategy"].get<std::string>());
    if (!d.strategy) throw std::invalid_argument("unknown strategy in decision log");
  }
  d.error_code = opt_i("error_code");
  if (j.contains("delay_seconds")) d.delay_seconds = j["delay_seconds"].get<double>();
  if (j.contains("lower_priority")) d.lower_priority = j["lower_priority"].get<bool>();
  d.forced_return = opt_i("forced_return");
  d.reduced_len = opt_i("reduced_len");
  d.corrupt_byte_count = opt_i("corrupt_byte_count");
  if (j.contains("redirect_addr")) d.redirect_addr = j["redirect_addr"].get<std::string>();
  d.backlog_cap = opt_i("backlog_cap");
  d.offset_delta = opt_i("offset_delta");
  d.threshold_used = j.at("threshold_used").get<double>();
  if (j.contains("roll")) d.roll = j["roll"].get<double>();
  if (j.contains("reason")) {
    const auto r = j["reason"].get<std::string>();
    for (int i = 0; i <= static_cast<int>(PassReason::kNoStrategy); ++i) {
      if (to_string(static_cast<PassReason>(i)) == r) d.reason = static_cast<PassReason>(i);
    }
  }
  d.buffer_len = opt_i("buffer_len");
  if (j.contains("behaviors")) {
    for (const auto& b : j["behaviors"]) {
      for (int i = 0; i <= static_cast<int>(Behavior::kBinaryRenameUnlink); ++i) {
        if (to_string(static_cast<Behavior>(i)) == b.get<std::string>()) {
          d.behaviors.push_back(static_cast<Behavior>(i));
        }
      }
    }
  }
  return d;
}

inline std::vector<InterferenceDecision> load_decision_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(0, "cannot read decision log: " + path);
  std::vector<InterferenceDecision> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(decision_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw TraceError(lineno, std::string("malformed decision: ") + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

inline OrderedJson rate_to_json(const RateCounter& r) {
  OrderedJson j;
  j["total"] = r.total;
  j["perturbed"] = r.perturbed;
  j["rate"] = r.rate();
  return j;
}

template <typename Json>
inline RateCounter rate_from_json(const Json& j) {
  RateCounter r;
  r.total = j.at("total").template get<std::uint64_t>();
  r.perturbed = j.at("perturbed").template get<std::uint64_t>();
  return r;
}

inline OrderedJson stats_to_json(const PerturbationStats& s) {
  OrderedJson j;
  j["all"] = rate_to_json(s.all);
  j["connection"] = rate_to_json(s.connection);
  j["buffer"] = rate_to_json(s.buffer);
  OrderedJson cats;
  for (std::size_t i = 0; i < s.by_category.size(); ++i) {
    cats[std::string(to_string(static_cast<SyscallCategory>(i)))] = rate_to_json(s.by_category[i]);
  }
  j["by_category"] = cats;
  OrderedJson bcats;
  for (std::size_t i = 0; i < s.buffer_by_category.size(); ++i) {
    bcats[std::string(to_string(static_cast<SyscallCategory>(i)))] =
        rate_to_json(s.buffer_by_category[i]);
  }
  j["buffer_by_category"] = bcats;
  OrderedJson strat;
  for (std::size_t i = 0; i < kStrategyKindCount; ++i) {
    strat[std::string(to_string(static_cast<StrategyKind>(i)))] = s.by_strategy[i];
  }
  j["by_strategy"] = strat;
  return j;
}

template <typename Json>
inline PerturbationStats stats_from_json(const Json& j) {
  PerturbationStats s;
  s.all = rate_from_json(j.at("all"));
  s.connection = rate_from_json(j.at("connection"));
  s.buffer = rate_from_json(j.at("buffer"));
  for (std::size_t i = 0; i < s.by_category.size(); ++i) {
    const std::string cat(to_string(static_cast<SyscallCategory>(i)));
    s.by_category[i] = rate_from_json(j.at("by_category").at(cat));
    s.buffer_by_category[i] = rate_from_json(j.at("buffer_by_category").at(cat));
  }
  for (std::size_t i = 0; i < kStrategyKindCount; ++i) {
    s.by_strategy[i] = j.at("by_strategy")
                           .at(std::string(to_string(static_cast<StrategyKind>(i))))
                           .template get<std::uint64_t>();
  }
  return s;
}

}  // namespace uncertain
