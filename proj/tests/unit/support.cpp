#include "support.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <memory>

#include "slicefuzz/process.hpp"

namespace sftest {

using namespace slicefuzz;

fs::path source_dir() { return SLICEFUZZ_SOURCE_DIR; }
fs::path corpus_source() { return source_dir() / "corpus"; }
fs::path shim_path() { return SLICEFUZZ_SHIM_PATH; }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("sftest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  if (std::getenv("SLICEFUZZ_KEEP_TEMP")) return;
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void copy_tree(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  fs::remove_all(to / "build");
}

std::vector<Fixture> manifest() {
  auto j = nlohmann::json::parse(read_file(corpus_source() / "manifest.json"));
  std::vector<Fixture> out;
  for (const auto& e : j.at("fixtures")) {
    Fixture f;
    f.file = e.at("file");
    f.line = e.at("line");
    f.function = e.at("function");
    f.role = e.at("role");
    f.expect = e.at("expect");
    f.category = e.at("category");
    f.text = e.at("text");
    f.flags = e.value("flags", std::vector<std::string>{});
    f.reason = e.value("reason", "");
    out.push_back(f);
  }
  return out;
}

Warning warning_for(const Fixture& f) {
  Warning w;
  w.tool = Tool::ratslike;
  w.file = f.file;
  w.line = f.line;
  w.category = f.category;
  w.severity = "High";
  w.id = warning_id(w.tool, w.file, w.line, w.category);
  return w;
}

CapturedRepo capture_repo(const fs::path& source, const fs::path& into, const std::string& build_cmd) {
  CapturedRepo c;
  c.repo = into / "repo";
  c.workspace = into / "ws";
  copy_tree(source, c.repo);
  CaptureOptions o;
  o.workspace = c.workspace;
  o.shim_path = shim_path();
  c.db = capture_build(c.repo, build_cmd, o);
  c.units = preprocess_sources(c.db, c.workspace, 2);
  c.idx = build_repo_index(c.units, c.db.repo_root, 2);
  return c;
}

const CapturedRepo& corpus() {
  static TempDir dir("corpus");
  static CapturedRepo repo = capture_repo(corpus_source(), dir.path());
  return repo;
}

const std::vector<SlicedFixture>& corpus_slices() {
  static std::vector<SlicedFixture> slices = [] {
    const auto& c = corpus();
    std::vector<SlicedFixture> out;
    for (const auto& f : manifest()) {
      Warning w = warning_for(f);
      out.push_back({f, w, build_slice(w, function_ref(c.idx, f.file, f.line), c.idx, c.db, c.workspace / "slices" / w.id)});
    }
    return out;
  }();
  return slices;
}

FunctionRef function_ref(const RepoIndex& idx, const std::string& file, int line) {
  auto enc = enclosing_function(idx, file, line);
  if (!enc.function) throw Error("no function at " + file + ":" + std::to_string(line) + ": " + enc.reason);
  return *enc.function;
}

std::pair<int, std::string> sh(const std::string& cmd) {
  auto r = run_process({"/bin/sh", "-c", cmd});
  return {r.exit_code, r.output};
}

}  // namespace sftest
