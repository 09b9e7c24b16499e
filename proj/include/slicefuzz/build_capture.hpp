#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/util.hpp"

namespace slicefuzz {

/// One compiled C translation unit, replayable out of tree.
struct CompileRecord {
  fs::path directory;             // absolute working directory of the compile
  fs::path source;                // absolute path of the translation unit
  std::vector<std::string> args;  // full argv; args[0] is the real compiler
  fs::path output;                // absolute object path
  std::string link_group;

  bool operator==(const CompileRecord&) const = default;
};

struct LinkCommand {
  fs::path directory;
  std::vector<std::string> args;
};

struct CompilationDatabase {
  fs::path repo_root;
  std::vector<CompileRecord> records;
  std::map<std::string, LinkCommand> links;
  nlohmann::json toolchain = nlohmann::json::object();

  const LinkCommand* link_for(const CompileRecord& record) const;
};

/// Group name used for objects that no observed link step consumed.
inline constexpr const char* kUnlinkedGroup = "unlinked";

nlohmann::json to_json(const CompilationDatabase& db);
CompilationDatabase database_from_json(const nlohmann::json& j);
void save_database(const CompilationDatabase& db, const fs::path& path);
CompilationDatabase load_database(const fs::path& path);

struct CaptureOptions {
  fs::path workspace;   // receives compile_db.json, logs/ and the shim directory
  fs::path shim_path;   // the compiler-wrapper executable
  /// Compiler names the shim answers to on PATH.
  std::vector<std::string> compiler_names = {"cc", "gcc", "clang", "c99", "c11", "gcc-11", "gcc-12", "clang-14"};
  bool verify_replay = true;
  std::optional<double> timeout_seconds;
};

/// Builds `repo_root` with `build_cmd` (run through /bin/sh) with the shim
/// first on PATH and turns the recorded invocations into a database.
/// Throws Error on build failure (with the build log) or when no compile
/// step was observed.
CompilationDatabase capture_build(const fs::path& repo_root, const std::string& build_cmd, const CaptureOptions& options);

/// One shim log entry: what the build system asked the compiler to do.
struct Invocation {
  fs::path cwd;
  std::vector<std::string> argv;  // argv[0] is the real compiler path
  int status = 0;
};

/// Turns raw invocations into records and link commands. Exposed for tests.
CompilationDatabase analyze_invocations(const std::vector<Invocation>& invocations, const fs::path& repo_root,
                                        const fs::path& workspace);

/// Appends one invocation to the capture log; used by the shim. The write
/// is serialized with an advisory lock so parallel builds interleave safely.
void append_invocation(const fs::path& log_path, const Invocation& invocation);
std::vector<Invocation> read_invocations(const fs::path& log_path);

/// Original coordinates of one preprocessed line.
struct SourceLocation {
  std::string file;  // repository-relative for project files, as spelled otherwise
  int line = 0;
  bool external = false;  // system header, builtin or command-line origin

  bool operator==(const SourceLocation&) const = default;
  auto operator<=>(const SourceLocation&) const = default;
};

struct PreprocessedUnit {
  std::size_t id = 0;  // index into the unit list, stable across reloads
  CompileRecord origin;
  fs::path pp_path;  // preprocessor output with line markers
  bool ok = false;
  std::string error;  // preprocessor log when !ok
  /// Marker-stripped text; this is what indexing and slicing consume.
  std::string text;
  /// line_map[i] is the origin of text line i+1.
  std::vector<SourceLocation> line_map;
  std::string source_file;  // repository-relative path of origin.source
};

using UnitPtr = std::shared_ptr<const PreprocessedUnit>;

/// Preprocesses every record with its own arguments (fanning out across
/// `workers` threads). Units whose preprocessing fails come back with
/// ok == false.
std::vector<UnitPtr> preprocess_sources(const CompilationDatabase& db, const fs::path& workspace, int workers = 1);

/// Splits preprocessor output into marker-free text and a line map.
/// `directory` resolves relative marker paths; files under `repo_root` are
/// project files.
void strip_line_markers(std::string_view pp_text, const fs::path& directory, const fs::path& repo_root,
                        std::string& text, std::vector<SourceLocation>& line_map);

/// Builds a unit from already-preprocessed text (tests, raw-source parsing).
/// Every line maps to itself in `file`.
UnitPtr make_identity_unit(std::string text, std::string file, std::size_t id = 0);

/// Origin of `pp_line` (1-based, marker-stripped coordinates). Throws
/// std::out_of_range when the line is outside the unit.
SourceLocation map_line(const PreprocessedUnit& unit, int pp_line);

nlohmann::json units_to_json(const std::vector<UnitPtr>& units);
/// Reloads units from their metadata; the stripped text and line maps are
/// recomputed from the preprocessor output files.
std::vector<UnitPtr> units_from_json(const nlohmann::json& j, const fs::path& repo_root);

/// The record's options minus the source, output, mode (-c/-E/-S) and
/// dependency-file flags; what remains selects language, include paths,
/// defines and code generation. With `drop_forced_includes`, -include and
/// -imacros are removed too (for compiling already-preprocessed text).
std::vector<std::string> essential_flags(const CompileRecord& record, bool drop_forced_includes = false);

/// Library and linker options of a link command: its argv minus the
/// compiler, the output and every input file.
std::vector<std::string> link_options(const LinkCommand& link);

/// Workspace root: SLICEFUZZ_WORKDIR when set, else `fallback`.
fs::path resolve_workspace(const std::optional<fs::path>& fallback);

}  // namespace slicefuzz
