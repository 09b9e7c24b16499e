#include "slicefuzz/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>

extern char** environ;

namespace slicefuzz {

namespace {

std::vector<std::string> build_environment(const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    std::string key(entry.substr(0, eq));
    if (overrides.count(key)) continue;
    env.emplace_back(entry);
  }
  for (const auto& [k, v] : overrides) env.push_back(k + "=" + v);
  return env;
}

std::vector<char*> as_c_array(std::vector<std::string>& strings) {
  std::vector<char*> out;
  out.reserve(strings.size() + 1);
  for (auto& s : strings) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv_in, const ProcessOptions& options) {
  ProcessResult result;
  if (argv_in.empty()) throw Error("run_process: empty argument vector");

  std::vector<std::string> argv_storage = argv_in;
  std::vector<std::string> env_storage = build_environment(options.env);
  auto argv = as_c_array(argv_storage);
  auto envp = as_c_array(env_storage);

  // Resolve the executable against the child's PATH before forking.
  std::string exe = argv_storage[0];
  if (exe.find('/') == std::string::npos) {
    std::string path_env;
    if (auto it = options.env.find("PATH"); it != options.env.end()) {
      path_env = it->second;
    } else if (const char* p = std::getenv("PATH")) {
      path_env = p;
    }
    auto found = find_executable(exe, path_env);
    if (!found) {
      result.spawn_failed = true;
      result.output = "executable not found: " + exe;
      return result;
    }
    exe = found->string();
  }
  std::string cwd = options.cwd.string();

  int pipefd[2];
  if (pipe2(pipefd, O_CLOEXEC) != 0) throw Error("pipe2 failed");

  auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) {
    close(pipefd[0]);
    close(pipefd[1]);
    throw Error("fork failed");
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(pipefd[1], STDOUT_FILENO);
    dup2(pipefd[1], STDERR_FILENO);
    int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(127);
    execve(exe.c_str(), argv.data(), envp.data());
    _exit(127);
  }
  setpgid(pid, pid);
  close(pipefd[1]);

  auto deadline = options.timeout_seconds
                      ? std::optional(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                  std::chrono::duration<double>(*options.timeout_seconds)))
                      : std::nullopt;
  char buf[65536];
  bool eof = false;
  while (!eof) {
    int wait_ms = -1;
    if (deadline) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        result.timed_out = true;
        kill(-pid, SIGKILL);
        break;
      }
      wait_ms = static_cast<int>(std::min<long long>(left.count(), 1000));
    }
    pollfd pfd{pipefd[0], POLLIN, 0};
    int rc = poll(&pfd, 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    ssize_t n = read(pipefd[0], buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) {
      eof = true;
      break;
    }
    if (result.output.size() < options.max_output) result.output.append(buf, static_cast<std::size_t>(n));
  }
  close(pipefd[0]);

  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  // Reap stragglers left in the group (e.g. a compiler driver's children).
  kill(-pid, SIGKILL);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
    if (result.exit_code == 127 && result.output.empty()) result.spawn_failed = true;
  } else if (WIFSIGNALED(status)) {
    result.term_signal = WTERMSIG(status);
  }
  return result;
}

std::optional<fs::path> find_executable(std::string_view name, std::string_view path_env) {
  if (name.find('/') != std::string_view::npos) {
    fs::path p(name);
    if (access(p.c_str(), X_OK) == 0) return p;
    return std::nullopt;
  }
  std::size_t start = 0;
  while (start <= path_env.size()) {
    auto colon = path_env.find(':', start);
    auto dir = path_env.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start);
    if (!dir.empty()) {
      fs::path candidate = fs::path(dir) / name;
      struct stat st {};
      if (stat(candidate.c_str(), &st) == 0 && S_ISREG(st.st_mode) && access(candidate.c_str(), X_OK) == 0) {
        return candidate;
      }
    }
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return std::nullopt;
}

std::optional<fs::path> find_executable(std::string_view name) {
  const char* p = std::getenv("PATH");
  return find_executable(name, p ? p : "");
}

std::string shell_quote(std::string_view arg) {
  if (!arg.empty() && arg.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-./=:+,@%") ==
                          std::string_view::npos) {
    return std::string(arg);
  }
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

std::string join_command(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& a : argv) {
    if (!out.empty()) out.push_back(' ');
    out += shell_quote(a);
  }
  return out;
}

}  // namespace slicefuzz
