#pragma once

// Child process plumbing shared by traced and untraced runs: program lookup,
// fork/exec with captured stdio, and a deadline watchdog. POSIX only.

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "uncertain/live/outcome.hpp"

#if defined(__unix__)
#include <fcntl.h>
#include <poll.h>
#include <pthread.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>
#endif

extern char** environ;

namespace uncertain::live::detail {

#if defined(__unix__)

inline bool is_executable(const std::string& path) {
  return ::access(path.c_str(), X_OK) == 0;
}

// execvp-style lookup. Returns the path that will be executed.
inline std::string resolve_program(const std::string& program) {
  if (program.empty()) throw AttachFailure("empty program path");
  if (program.find('/') != std::string::npos) {
    if (!is_executable(program)) {
      throw AttachFailure("cannot execute '" + program + "': " + std::strerror(errno));
    }
    return program;
  }
  const char* path = std::getenv("PATH");
  std::string dirs = path ? path : "/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= dirs.size()) {
    const auto end = dirs.find(':', start);
    std::string dir = dirs.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (dir.empty()) dir = ".";
    const std::string candidate = dir + "/" + program;
    if (is_executable(candidate)) return candidate;
    if (end == std::string::npos) break;
    start = end + 1;
  }
  throw AttachFailure("program '" + program + "' not found in PATH");
}

struct Spawned {
  pid_t pid = -1;
  int stdout_fd = -1;
  int stderr_fd = -1;
  int stdin_fd = -1;      // -1 when no stdin data
  int exec_err_fd = -1;   // reads errno if execve failed, EOF on success
};

// Forks and execs `path`. `before_exec` runs in the child right before
// execve (the tracer uses it to request tracing). The child leads its own
// process group so the watchdog can kill the whole tree.
inline Spawned spawn(const std::string& path, const ExecSpec& spec,
                     bool (*before_exec)() = nullptr) {
  int out[2], err[2], in[2] = {-1, -1}, ex[2];
  if (::pipe2(out, O_CLOEXEC) != 0 || ::pipe2(err, O_CLOEXEC) != 0 || ::pipe2(ex, O_CLOEXEC) != 0) {
    throw AttachFailure(std::string("pipe: ") + std::strerror(errno));
  }
  if (spec.stdin_data && ::pipe2(in, O_CLOEXEC) != 0) {
    throw AttachFailure(std::string("pipe: ") + std::strerror(errno));
  }

  std::vector<std::string> argv_s{spec.program};
  argv_s.insert(argv_s.end(), spec.args.begin(), spec.args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_s = spec.env;
  std::vector<char*> envp;
  for (auto& e : env_s) envp.push_back(e.data());
  envp.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw AttachFailure(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    if (in[0] >= 0) {
      ::dup2(in[0], 0);
    } else {
      const int devnull = ::open("/dev/null", O_RDONLY);
      if (devnull >= 0) ::dup2(devnull, 0);
    }
    ::dup2(out[1], 1);
    ::dup2(err[1], 2);
    if (spec.workdir && ::chdir(spec.workdir->c_str()) != 0) {
      const int e = errno;
      (void)!::write(ex[1], &e, sizeof e);
      ::_exit(127);
    }
    if (before_exec != nullptr && !before_exec()) {
      const int e = errno;
      (void)!::write(ex[1], &e, sizeof e);
      ::_exit(127);
    }
    ::execve(path.c_str(), argv.data(), spec.env.empty() ? environ : envp.data());
    const int e = errno;
    (void)!::write(ex[1], &e, sizeof e);
    ::_exit(127);
  }
  ::close(out[1]);
  ::close(err[1]);
  ::close(ex[1]);
  if (in[0] >= 0) ::close(in[0]);
  ::setpgid(pid, pid);  // also done in the child; whichever runs first wins
  return Spawned{pid, out[0], err[0], in[1], ex[0]};
}

// Drains stdout/stderr and feeds stdin on a helper thread.
class StdioPump {
 public:
  StdioPump(const Spawned& s, std::optional<std::string> stdin_data)
      : out_fd_(s.stdout_fd), err_fd_(s.stderr_fd), in_fd_(s.stdin_fd),
        stdin_data_(std::move(stdin_data)) {
    thread_ = std::thread([this] { run(); });
  }
  StdioPump(const StdioPump&) = delete;
  StdioPump& operator=(const StdioPump&) = delete;
  ~StdioPump() { finish(); }

  // Stops after draining whatever is readable now.
  void finish() {
    if (!thread_.joinable()) return;
    stop_.store(true);
    thread_.join();
    for (int fd : {out_fd_, err_fd_, in_fd_}) {
      if (fd >= 0) ::close(fd);
    }
    out_fd_ = err_fd_ = in_fd_ = -1;
  }

  const std::string& out() const { return out_; }
  const std::string& err() const { return err_; }

 private:
  void run() {
    // A write to a closed stdin raises SIGPIPE on this thread only.
    sigset_t mask;
    sigemptyset(&mask);
    sigaddset(&mask, SIGPIPE);
    ::pthread_sigmask(SIG_BLOCK, &mask, nullptr);

    std::size_t written = 0;
    bool out_open = out_fd_ >= 0, err_open = err_fd_ >= 0;
    bool in_open = in_fd_ >= 0;
    if (in_open) ::fcntl(in_fd_, F_SETFL, ::fcntl(in_fd_, F_GETFL) | O_NONBLOCK);
    char buf[65536];
    while (out_open || err_open) {
      pollfd fds[3];
      int n = 0;
      if (out_open) fds[n++] = {out_fd_, POLLIN, 0};
      if (err_open) fds[n++] = {err_fd_, POLLIN, 0};
      if (in_open) fds[n++] = {in_fd_, POLLOUT, 0};
      const int r = ::poll(fds, static_cast<nfds_t>(n), 50);
      if (r < 0 && errno != EINTR) break;
      if (r <= 0) {
        if (stop_.load()) break;
        continue;
      }
      for (int i = 0; i < n; ++i) {
        if (fds[i].revents == 0) continue;
        if (fds[i].fd == in_fd_) {
          const std::string& data = *stdin_data_;
          const ssize_t w = ::write(in_fd_, data.data() + written, data.size() - written);
          if (w > 0) written += static_cast<std::size_t>(w);
          if (w < 0 && errno != EAGAIN) written = data.size();
          if (written >= data.size()) {
            ::close(in_fd_);
            in_fd_ = -1;
            in_open = false;
          }
          continue;
        }
        const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
        if (got > 0) {
          (fds[i].fd == out_fd_ ? out_ : err_).append(buf, static_cast<std::size_t>(got));
        } else if (got == 0 || errno != EINTR) {
          (fds[i].fd == out_fd_ ? out_open : err_open) = false;
        }
      }
    }
    if (in_open) {
      ::close(in_fd_);
      in_fd_ = -1;
    }
  }

  int out_fd_, err_fd_, in_fd_;
  std::optional<std::string> stdin_data_;
  std::string out_, err_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

// Kills the child's process group (and anything added via track()) once the
// deadline passes.
class Watchdog {
 public:
  Watchdog(pid_t pgid, std::optional<double> seconds) : pgid_(pgid) {
    if (!seconds) return;
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(*seconds));
    thread_ = std::thread([this, deadline] {
      std::unique_lock lock(mu_);
      if (cv_.wait_until(lock, deadline, [this] { return done_; })) return;
      fired_.store(true);
      ::kill(-pgid_, SIGKILL);
      for (const pid_t p : extra_) ::kill(p, SIGKILL);
    });
  }
  Watchdog(const Watchdog&) = delete;
  Watchdog& operator=(const Watchdog&) = delete;
  ~Watchdog() { cancel(); }

  void track(pid_t p) {
    std::lock_guard lock(mu_);
    extra_.push_back(p);
  }

  void cancel() {
    {
      std::lock_guard lock(mu_);
      done_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  bool fired() const { return fired_.load(); }

 private:
  pid_t pgid_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::vector<pid_t> extra_;
  std::atomic<bool> fired_{false};
  std::thread thread_;
};

inline ExitStatus status_from_wait(int st) {
  ExitStatus s;
  if (WIFSIGNALED(st)) {
    s.kind = ExitStatus::Kind::kSignaled;
    s.signal = WTERMSIG(st);
  } else {
    s.code = WEXITSTATUS(st);
  }
  return s;
}

#endif  // __unix__

}  // namespace uncertain::live::detail
