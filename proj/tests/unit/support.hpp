#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/build_capture.hpp"
#include "slicefuzz/code_index.hpp"
#include "slicefuzz/slicer.hpp"
#include "slicefuzz/warnings.hpp"

namespace sftest {

namespace fs = std::filesystem;

fs::path source_dir();
fs::path corpus_source();
fs::path shim_path();

// Removed on destruction unless SLICEFUZZ_KEEP_TEMP is set.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

void copy_tree(const fs::path& from, const fs::path& to);

struct Fixture {
  std::string file;
  int line = 0;
  std::string function;
  std::string role;
  std::string expect;
  std::string category;
  std::string text;
  std::vector<std::string> flags;
  std::string reason;
};

std::vector<Fixture> manifest();
slicefuzz::Warning warning_for(const Fixture& f);

// The bundled corpus copied, built, captured, preprocessed and indexed once
// per test process.
struct CapturedRepo {
  fs::path repo, workspace;
  slicefuzz::CompilationDatabase db;
  std::vector<slicefuzz::UnitPtr> units;
  slicefuzz::RepoIndex idx;
};

const CapturedRepo& corpus();
CapturedRepo capture_repo(const fs::path& source, const fs::path& into, const std::string& build_cmd = "make clean && make");

// One slice per manifest fixture, in manifest order, built once per process.
struct SlicedFixture {
  Fixture fixture;
  slicefuzz::Warning warning;
  slicefuzz::Slice slice;
};
const std::vector<SlicedFixture>& corpus_slices();

slicefuzz::FunctionRef function_ref(const slicefuzz::RepoIndex& idx, const std::string& file, int line);

// Runs a shell command, returns (status, output).
std::pair<int, std::string> sh(const std::string& cmd);

}  // namespace sftest
