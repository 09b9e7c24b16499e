#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/slicer.hpp"

namespace slicefuzz {

struct FuzzOptions {
  double budget_seconds = 300;
  std::uint64_t seed = 1;
  double grace_seconds = 10;  // engine teardown allowance beyond the budget
  int rss_limit_mb = 2048;
  int per_input_timeout = 10;
  int attribution_frames = 3;  // K topmost project frames
  std::string clang = "clang";
  std::string gcov = "gcov";
  std::string addr2line = "addr2line";
  std::vector<std::string> extra_cflags;  // appended to every compile, e.g. -DSLICEFUZZ_TRACE
};

struct BuildResult {
  bool ok = false;
  fs::path binary;
  std::string log;
  double seconds = 0;
};

/// Recompiles the slice files and the harness with sanitizer and coverage
/// instrumentation and links them with the engine runtime into
/// <slice workdir>/fuzz/fuzzer. Throws Error when the slice did not compile.
BuildResult link_executable(const Slice& slice, const fs::path& harness, const CompilationDatabase& db,
                            const RepoIndex& idx, const FuzzOptions& options = {});

/// How the engine run ended.
enum class EngineEvent { not_run, completed, crash, oom, timeout, leak, start_failure, killed };
std::string to_string(EngineEvent e);

struct RunArtifacts {
  fs::path workdir;  // <slice workdir>/fuzz
  fs::path binary;
  fs::path corpus_dir;
  fs::path crashes_dir;
  std::string log;
  EngineEvent event = EngineEvent::not_run;
  double wall_time = 0;
  double budget = 0;
  std::uint64_t seed = 0;
  std::uint64_t executions = 0;
  std::vector<fs::path> crash_inputs;  // crash-* artifacts only
  std::vector<fs::path> other_inputs;  // oom-*, timeout-*, leak-*
};

/// Runs the engine for at most `budget` seconds (killed at budget + grace).
/// A zero budget returns at once without launching anything. `seed_corpus`
/// entries are copied into the run's corpus first.
RunArtifacts run_fuzz(const fs::path& binary, double budget, std::uint64_t seed, const FuzzOptions& options = {},
                      const std::vector<fs::path>& seed_corpus = {});

struct CrashFrame {
  std::string function;
  std::optional<SourceLocation> location;  // original coordinates; external for non-project code
  bool harness = false;
  std::string raw;  // emitted file:line or module+offset
};

struct CrashReport {
  std::string kind;  // heap-buffer-overflow, stack-buffer-overflow, SEGV, ...
  std::vector<CrashFrame> frames;
  fs::path witness;
  std::vector<std::uint8_t> witness_input;
  bool replayed = false;

  std::vector<SourceLocation> project_frames() const;
  bool only_harness_frames() const;
};

struct FuzzVerdict {
  std::string warning_id;
  bool executed_target_line = false;
  std::uint64_t target_line_hits = 0;
  std::vector<CrashReport> crashes;
  bool crash_at_target = false;
  bool harness_suspect = false;
  bool off_target_crash = false;
  double wall_time = 0;
  double budget = 0;
  std::uint64_t seed = 0;
  std::map<std::pair<std::string, int>, std::uint64_t> covered_lines;
  std::uint64_t external_hits = 0;  // hits on lines with no project origin
  std::uint64_t executions = 0;
  EngineEvent event = EngineEvent::not_run;
  std::string coverage_source;  // "run", "replay" or "none"
};

/// Reads coverage, replays crash artifacts and maps everything back to
/// original source coordinates.
FuzzVerdict collect_verdict(const RunArtifacts& run, const Warning& w, const Slice& slice,
                            const FuzzOptions& options = {});

/// True iff one of the topmost K project frames is the warning location.
bool attribute_crash(const CrashReport& report, const Warning& w, int k = 3);

/// Parses a sanitizer report printed with symbolization off.
struct RawFrame {
  int index = 0;
  std::string module;
  std::uint64_t offset = 0;
};
std::string parse_crash_kind(std::string_view log);
std::vector<RawFrame> parse_raw_frames(std::string_view log);

/// Value for -coverage-version matching the installed gcov ("B14*" for 11.4).
std::optional<std::string> gcov_coverage_version(const std::string& gcov = "gcov");

/// Per-file line counts from gcov's JSON intermediate format.
std::map<fs::path, std::map<int, std::uint64_t>> read_gcov_counts(const fs::path& object_dir,
                                                                   const std::string& gcov = "gcov");

nlohmann::json verdict_to_json(const FuzzVerdict& v);
FuzzVerdict verdict_from_json(const nlohmann::json& j);

}  // namespace slicefuzz
