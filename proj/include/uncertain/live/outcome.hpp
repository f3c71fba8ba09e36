#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uncertain::live {

struct ExecSpec {
  std::string program;
  std::vector<std::string> args;  // argv[1..]
  // Empty: inherit the tracer's environment.
  std::vector<std::string> env;
  std::optional<std::string> workdir;
  std::optional<std::string> stdin_data;
};

struct ExitStatus {
  enum class Kind : std::uint8_t { kExited, kSignaled, kTimeout };
  Kind kind = Kind::kExited;
  int code = 0;    // exit code when kExited
  int signal = 0;  // terminating signal when kSignaled

  // Shell-style status: code, or 128 + signal.
  int shell_code() const {
    switch (kind) {
      case Kind::kExited: return code;
      case Kind::kSignaled: return 128 + signal;
      case Kind::kTimeout: return 128 + 9;
    }
    return 1;
  }
  bool operator==(const ExitStatus&) const = default;
};

inline std::string to_string(const ExitStatus& s) {
  switch (s.kind) {
    case ExitStatus::Kind::kExited: return "exit " + std::to_string(s.code);
    case ExitStatus::Kind::kSignaled: return "signal " + std::to_string(s.signal);
    case ExitStatus::Kind::kTimeout: return "timeout";
  }
  return "?";
}

// What classify_outcome needs from a run.
struct RunRecord {
  ExitStatus status;
  std::string stdout_data;
  double wall_seconds = 0;
};

enum class Outcome : std::uint8_t { kSucceeded, kHampered, kCrashed };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kSucceeded: return "succeeded";
    case Outcome::kHampered: return "hampered";
    case Outcome::kCrashed: return "crashed";
  }
  return "?";
}

inline std::optional<Outcome> outcome_from_string(std::string_view s) {
  if (s == "succeeded") return Outcome::kSucceeded;
  if (s == "hampered") return Outcome::kHampered;
  if (s == "crashed") return Outcome::kCrashed;
  return std::nullopt;
}

class MissingBaseline : public std::invalid_argument {
 public:
  MissingBaseline() : std::invalid_argument("outcome classification needs a baseline run") {}
};

// Crashed: killed by a signal, timed out, ran longer than factor x baseline
// (+ slack), or exited nonzero where the baseline exited zero.
// Succeeded: same exit status and stdout as the baseline within the time
// budget. Anything else is Hampered.
inline Outcome classify_outcome(const RunRecord& run, const std::optional<RunRecord>& baseline,
                                double timeout_factor = 2.0, double slack_seconds = 0.0) {
  if (!baseline) throw MissingBaseline();
  const double budget = timeout_factor * baseline->wall_seconds + slack_seconds;
  using K = ExitStatus::Kind;
  if (run.status.kind == K::kSignaled || run.status.kind == K::kTimeout) return Outcome::kCrashed;
  if (run.wall_seconds > budget) return Outcome::kCrashed;
  if (run.status.code != 0 && baseline->status.kind == K::kExited && baseline->status.code == 0) {
    return Outcome::kCrashed;
  }
  if (run.status == baseline->status && run.stdout_data == baseline->stdout_data) {
    return Outcome::kSucceeded;
  }
  return Outcome::kHampered;
}

class UnsupportedPlatform : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AttachFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uncertain::live
