#pragma once

// Child-process helpers for tests that drive the ccbo binary.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

extern char** environ;

namespace testproc {

struct Output {
  int exit_code = -1;  // -1 when killed by a signal
  int signal = 0;
  std::string out;
  std::string err;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline pid_t spawn(const std::vector<std::string>& args, const std::filesystem::path& out,
                   const std::filesystem::path& err) {
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&fa, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  return rc == 0 ? pid : -1;
}

/// Waits for exit; a child still running after `timeout` is killed.
inline Output wait_for(pid_t pid, const std::filesystem::path& out, const std::filesystem::path& err,
                       std::chrono::seconds timeout = std::chrono::seconds(600)) {
  Output o;
  int status = 0;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (waitpid(pid, &status, WNOHANG) == 0) {
    if (std::chrono::steady_clock::now() > deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (WIFEXITED(status)) o.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) o.signal = WTERMSIG(status);
  o.out = read_file(out);
  o.err = read_file(err);
  return o;
}

inline std::filesystem::path scratch(const std::string& tag) {
  return std::filesystem::temp_directory_path() /
         ("ccbo_proc_" + std::to_string(getpid()) + "_" + tag);
}

/// Runs to completion and captures stdout/stderr.
inline Output run(const std::vector<std::string>& args,
                  std::chrono::seconds timeout = std::chrono::seconds(600)) {
  static int counter = 0;
  const std::string tag = std::to_string(counter++);
  const auto out = scratch(tag + ".out");
  const auto err = scratch(tag + ".err");
  const pid_t pid = spawn(args, out, err);
  if (pid < 0) return {};
  Output o = wait_for(pid, out, err, timeout);
  std::filesystem::remove(out);
  std::filesystem::remove(err);
  return o;
}

/// A background `ccbo serve` with its stderr in a file.
struct Server {
  pid_t pid = -1;
  int port = 0;
  std::filesystem::path out, err;

  /// Starts the server on a free port and waits for its "listening" line.
  static std::optional<Server> start(std::vector<std::string> args, const std::string& tag,
                                     std::chrono::seconds timeout = std::chrono::seconds(30)) {
    Server s;
    s.out = scratch(tag + ".out");
    s.err = scratch(tag + ".err");
    s.pid = spawn(args, s.out, s.err);
    if (s.pid < 0) return std::nullopt;
    const std::regex re(R"(listening on http://[^:]+:(\d+))");
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      std::smatch m;
      const std::string text = read_file(s.err);
      if (std::regex_search(text, m, re)) {
        s.port = std::stoi(m[1]);
        return s;
      }
      int status = 0;
      if (waitpid(s.pid, &status, WNOHANG) == s.pid) return std::nullopt;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    kill(s.pid, SIGKILL);
    waitpid(s.pid, nullptr, 0);
    return std::nullopt;
  }

  Output stop(int sig) {
    kill(pid, sig);
    Output o = wait_for(pid, out, err, std::chrono::seconds(30));
    std::filesystem::remove(out);
    std::filesystem::remove(err);
    pid = -1;
    return o;
  }
};

} // namespace testproc
