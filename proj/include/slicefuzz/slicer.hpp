#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/build_capture.hpp"
#include "slicefuzz/code_index.hpp"
#include "slicefuzz/warnings.hpp"

namespace slicefuzz {

/// Why a span is in a minimized file.
struct Provenance {
  std::string reason;  // root, bfs, reference, declaration, external, pragma, diagnostic, transplant, synthesized
  int round = 1;       // first compile round that included it
  std::string demanded_by;  // symbol named by the diagnostic, when reason is diagnostic-driven

  bool operator==(const Provenance&) const = default;
};

struct RetainedSpan {
  std::size_t source_unit = 0;  // unit the text comes from (differs from the file's unit for transplants)
  std::optional<std::size_t> item;  // none for synthesized declarations
  ItemKind kind = ItemKind::declaration;
  std::vector<std::string> symbols;  // defined or declared names
  bool external = false;
  Provenance provenance;
  int emitted_start = 0, emitted_end = 0;  // 1-based lines in the emitted file
};

struct MinimizedFile {
  std::size_t origin_unit = 0;
  std::vector<RetainedSpan> retained;  // in emission order
  fs::path emitted_path;
  std::string text;
  /// emitted_line_map[i] is the origin of emitted line i+1 (none for generated lines).
  std::vector<std::optional<SourceLocation>> emitted_line_map;

  std::set<std::string> defined_functions() const;
  std::set<std::string> declared_names() const;
};

/// Everything demanded of one unit so far. Grows monotonically across rounds.
struct UnitPlan {
  std::map<std::string, Provenance> roots;
  std::map<std::size_t, Provenance> demanded_items;     // same-unit items named by diagnostics
  std::map<std::string, Provenance> demanded_decls;     // names that need a declaration here
  struct Transplant {
    std::size_t unit, item;
    Provenance provenance;
  };
  std::vector<Transplant> transplants;  // newest first
  struct Synthesized {
    std::string symbol, text;
    Provenance provenance;
  };
  std::vector<Synthesized> synthesized;
  /// Function whose storage/inline specifiers are blanked (the slice root).
  std::optional<std::string> exported_root;
};

/// File-level breadth-first minimization of `unit` around `roots`.
/// Throws Error when a root is not defined in the unit.
MinimizedFile minimize_file(const RepoIndex& idx, std::size_t unit, const std::set<std::string>& roots);
MinimizedFile minimize_file(const RepoIndex& idx, std::size_t unit, const UnitPlan& plan);

/// Declaration of a function definition item: its head with storage and
/// inline specifiers blanked, whitespace collapsed, plus ';'.
std::string prototype_text(const FileIndex& fi, const TopItem& item);

/// Name the emitted root function gets; differs from the original only for main.
std::string exported_root_name(const std::string& name);

struct CompileResult {
  bool ok = false;
  bool toolchain_failure = false;  // the compiler could not be run at all
  bool link_phase = false;         // every file compiled; the link probe failed
  std::string log;
  std::vector<fs::path> objects;
  double seconds = 0;
};

struct CompileCache {
  std::map<fs::path, std::string> stamps;  // object -> hash of (text, command)
};

/// Compiles each emitted file with its origin's recorded flags, then links
/// the objects with a stub main using the root link group's options.
/// `files` must already be written to their emitted paths.
CompileResult attempt_compile(const std::vector<MinimizedFile>& files, const RepoIndex& idx,
                              const CompilationDatabase& db, const fs::path& objects_dir,
                              CompileCache* cache = nullptr);

struct MissingRef {
  std::string name;
  std::string file;  // emitted source or object path named with the diagnostic; may be empty
  bool operator==(const MissingRef&) const = default;
};

std::vector<std::string> extract_missing_refs(std::string_view log);
std::vector<MissingRef> extract_missing_refs_sited(std::string_view log);

struct SliceCaps {
  int max_rounds = 25;
  std::size_t max_definitions = 10000;
};

struct RoundRecord {
  int round = 0;
  std::vector<std::string> retained_symbols;  // sorted "unit:symbol"
  std::vector<std::string> missing_refs;
  bool compiled = false;
};

struct Slice {
  Warning warning;
  FunctionRef root;
  std::string root_name;    // as written in the source
  std::string root_symbol;  // as emitted (main is renamed)
  std::vector<MinimizedFile> files;
  std::vector<fs::path> objects;
  std::vector<std::string> link_args;
  std::string compiler;
  int rounds = 0;
  bool compiled = false;
  std::string reason;  // not_compiled reason
  std::vector<std::string> unresolved;
  std::vector<std::string> reads_globals;  // mutable project globals in retained code
  std::size_t retained_loc = 0;            // distinct project lines retained
  std::size_t project_loc = 0;             // distinct project lines in all units
  std::size_t project_functions = 0;
  double build_seconds = 0;    // whole slicing loop
  double compile_seconds = 0;  // compiler and linker time only
  std::vector<RoundRecord> history;
  std::string last_log;
  fs::path workdir;

  std::string status() const { return compiled ? "compiled" : "not_compiled"; }
};

/// Algorithm driver: minimize, compile, read diagnostics, resolve, repeat.
/// Writes files/, objects/, logs/ and slice.json under `workdir`.
Slice build_slice(const Warning& w, const FunctionRef& root, const RepoIndex& idx, const CompilationDatabase& db,
                  const fs::path& workdir, const SliceCaps& caps = {});

nlohmann::json slice_to_json(const Slice& s);
/// Restores what later stages need (files with line maps, objects, status).
Slice slice_from_json(const nlohmann::json& j);
void save_slice(const Slice& s);
Slice load_slice(const fs::path& workdir);

}  // namespace slicefuzz
