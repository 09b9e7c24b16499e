#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slicefuzz/build_capture.hpp"
#include "slicefuzz/classifier_report.hpp"
#include "slicefuzz/fuzz_orchestrator.hpp"
#include "slicefuzz/slicer.hpp"
#include "slicefuzz/warnings.hpp"

namespace slicefuzz {

struct RunConfig {
  fs::path repo_root;
  std::string build_cmd = "make";
  fs::path warnings_path;
  std::optional<ReportFormat> warnings_format;  // by extension when unset
  double budget_seconds = 300;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string severity_policy;  // SeverityPolicy::parse syntax; empty keeps the defaults
  SliceCaps caps;
  fs::path out_dir;  // the workspace
  fs::path shim_path;
  FuzzOptions fuzz;

  /// Throws Error on a negative budget, workers < 1 or a missing repo.
  void validate() const;
};

/// A stage was asked to run before the one producing its inputs.
class StageOrderError : public Error {
 public:
  StageOrderError(const std::string& stage, const std::string& needs, const fs::path& missing);
  std::string stage, needs;
};

/// Where one warning stands after indexing.
struct Target {
  Warning warning;
  std::optional<FunctionRef> function;
  std::string function_name;
  std::string reason;  // set when there is no function
};

/// Per-warning fuzz stage record (fuzz.json).
struct FuzzRecord {
  std::optional<std::string> failure;  // "unfuzzable: ...", "link"
  double budget = 0;
  double build_seconds = 0;
  bool has_verdict = false;
};

fs::path warning_dir(const RunConfig& cfg, const std::string& id);

/// Records the build into <out>/compile_db.json.
void cmd_capture(const RunConfig& cfg);
/// Preprocesses and indexes every unit, ingests the warnings and finds
/// their enclosing functions: units.json, warnings.json, targets.json.
void cmd_index(const RunConfig& cfg);
/// Slices every target into <out>/w/<id>/.
void cmd_slice(const RunConfig& cfg, const std::set<std::string>& only = {});
/// Generates harnesses and fuzzes every compiled slice. `budget_override`
/// replaces cfg.budget_seconds (used for retries).
void cmd_fuzz(const RunConfig& cfg, const std::set<std::string>& only = {},
              std::optional<double> budget_override = std::nullopt);
/// Classifies from stored artifacts and writes report.json / report.txt.
ReportTable cmd_classify(const RunConfig& cfg);
/// All of the above; returns the CLI exit status (0, or 2 with NC rows).
int cmd_run(const RunConfig& cfg, ReportTable* table = nullptr);

int exit_status(const ReportTable& t);

std::vector<Target> load_targets(const RunConfig& cfg);

/// Rebuilds the repository index from <out>/units.json.
RepoIndex load_index(const RunConfig& cfg);

/// The compiler shim: SLICEFUZZ_SHIM, then each of `dirs`, then PATH.
std::optional<fs::path> locate_shim(const std::vector<fs::path>& dirs = {});

}  // namespace slicefuzz
