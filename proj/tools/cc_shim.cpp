// Compiler wrapper used during build capture. It is installed under the
// names of common C compilers in a directory placed first on PATH; it runs
// the real compiler found on SLICEFUZZ_ORIG_PATH and appends the invocation
// to SLICEFUZZ_CAPTURE_LOG.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "slicefuzz/build_capture.hpp"
#include "slicefuzz/process.hpp"

namespace {

std::optional<slicefuzz::fs::path> real_compiler(const std::string& name) {
  const char* orig = std::getenv("SLICEFUZZ_ORIG_PATH");
  std::string path = orig ? orig : "/usr/local/bin:/usr/bin:/bin";
  std::error_code ec;
  auto self = slicefuzz::fs::canonical("/proc/self/exe", ec);
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find(':', start);
    if (end == std::string::npos) end = path.size();
    std::string dir = path.substr(start, end - start);
    start = end + 1;
    if (dir.empty()) continue;
    auto found = slicefuzz::find_executable(name, dir);
    if (!found) continue;
    auto canon = slicefuzz::fs::canonical(*found, ec);
    if (!ec && canon == self) continue;
    return found;
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  std::string name = slicefuzz::fs::path(argv[0]).filename().string();
  auto real = real_compiler(name);
  if (!real) {
    std::fprintf(stderr, "slicefuzz-cc-shim: no real '%s' on SLICEFUZZ_ORIG_PATH\n", name.c_str());
    return 127;
  }

  std::vector<std::string> args(argv, argv + argc);
  args[0] = real->string();
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());
  cargs.push_back(nullptr);

  // The real compiler keeps our stdio so build output is unchanged.
  pid_t pid = ::fork();
  if (pid < 0) {
    std::perror("slicefuzz-cc-shim: fork");
    return 127;
  }
  if (pid == 0) {
    ::execv(cargs[0], cargs.data());
    std::perror("slicefuzz-cc-shim: exec");
    ::_exit(127);
  }
  int wstatus = 0;
  while (::waitpid(pid, &wstatus, 0) < 0) {
  }
  int status = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : 128 + WTERMSIG(wstatus);

  if (const char* log = std::getenv("SLICEFUZZ_CAPTURE_LOG"); log && *log) {
    try {
      slicefuzz::Invocation inv;
      inv.cwd = slicefuzz::fs::current_path();
      inv.argv = args;
      inv.status = status;
      slicefuzz::append_invocation(log, inv);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "slicefuzz-cc-shim: %s\n", e.what());
      return status == 0 ? 1 : status;
    }
  }
  return status;
}
