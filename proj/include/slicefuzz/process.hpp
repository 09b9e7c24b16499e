#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slicefuzz/util.hpp"

namespace slicefuzz {

struct ProcessOptions {
  fs::path cwd;
  /// Variables set (or overridden) on top of the parent environment.
  std::map<std::string, std::string> env;
  /// Wall-clock limit; the whole process group is killed when it expires.
  std::optional<double> timeout_seconds;
  /// Output beyond this many bytes is dropped (the child keeps running).
  std::size_t max_output = 64 * 1024 * 1024;
};

struct ProcessResult {
  int exit_code = -1;   // valid when term_signal == 0
  int term_signal = 0;
  bool timed_out = false;
  bool spawn_failed = false;
  double seconds = 0;
  std::string output;   // stdout and stderr, interleaved

  bool ok() const { return !spawn_failed && !timed_out && term_signal == 0 && exit_code == 0; }
};

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

/// Searches a colon-separated PATH for an executable regular file.
std::optional<fs::path> find_executable(std::string_view name, std::string_view path_env);
std::optional<fs::path> find_executable(std::string_view name);

std::string shell_quote(std::string_view arg);
std::string join_command(const std::vector<std::string>& argv);

}  // namespace slicefuzz
