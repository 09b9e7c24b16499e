#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/fuzz_orchestrator.hpp"
#include "slicefuzz/warnings.hpp"

namespace slicefuzz {

enum class State { C, PFP, NR, NC };
std::string to_string(State s);
std::optional<State> parse_state(std::string_view s);

struct Classification {
  State state = State::NC;
  std::string reason;
  /// possible, budget-relative, globals, harness-suspect, off-target-crash,
  /// engine-oom, engine-timeout
  std::vector<std::string> flags;
  nlohmann::json evidence = nlohmann::json::object();

  bool has_flag(std::string_view f) const;
};

/// Everything classification looks at. Built from stage artifacts.
struct Outcome {
  Warning warning;
  /// Set when the pipeline stopped before or outside slicing/fuzzing:
  /// "no enclosing function", "excluded: ...", "unfuzzable: ...", "link", "runtime".
  std::optional<std::string> failure;
  bool slice_compiled = false;
  std::string slice_reason;
  bool reads_globals = false;
  std::optional<FuzzVerdict> verdict;
};

/// NC, then C, then PFP, then NR. Throws Error when a compiled, linked
/// outcome carries no verdict (a caller bug, not an outcome).
Classification classify(const Outcome& o);
Classification classify(const Warning& w, const Slice& slice, const std::optional<FuzzVerdict>& v,
                        const std::optional<std::string>& failure = std::nullopt);

struct ReportRow {
  Warning warning;
  Classification classification;
  std::string function;  // enclosing function, when known
  std::uint64_t hits = 0;
  double wall_time = 0;
  int rounds = 0;
  std::size_t retained_loc = 0;
  double slice_seconds = 0;    // build_slice wall time
  double compile_seconds = 0;  // compiler and linker share of it
};

struct Counts {
  std::size_t total = 0, pfp = 0, c = 0, nr = 0, nc = 0;
  bool operator==(const Counts&) const = default;
};

struct ReportTable {
  std::string repository;
  std::map<std::string, Counts> by_tool;  // tool name -> counts
  Counts overall;
  std::vector<ReportRow> rows;  // sorted by (file, line, category, tool)
};

ReportTable summarize(const std::string& repository, std::vector<ReportRow> rows);

nlohmann::json report_to_json(const ReportTable& t);
ReportTable report_from_json(const nlohmann::json& j);
std::string report_to_text(const ReportTable& t);

// ---------------------------------------------------------------------------
// Persistence across versions

struct PersistenceOptions {
  bool require_new_pfp = false;  // also demand a PFP classification in the new run
};

struct PersistenceMatch {
  ReportRow old_row;
  std::optional<Warning> matched;
  /// Empty when matched; otherwise line_deleted, line_modified,
  /// function_removed or not_flagged.
  std::string reason;
  std::optional<int> tracked_line;  // where the old line sits in the new version
};

/// Tracks every old PFP row into the new version by the normalized text of
/// its line inside the same-named enclosing function.
std::vector<PersistenceMatch> match_persistent(const ReportTable& old_report, const fs::path& old_root,
                                               const std::vector<Warning>& new_warnings, const fs::path& new_root,
                                               const PersistenceOptions& options = {},
                                               const ReportTable* new_report = nullptr);

nlohmann::json persistence_to_json(const std::vector<PersistenceMatch>& matches);

/// Longest common subsequence alignment: result[i] is the index in `b`
/// matched to a[i], if any.
std::vector<std::optional<std::size_t>> lcs_align(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace slicefuzz
