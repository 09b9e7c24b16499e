#include "slicefuzz/build_capture.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <tuple>
#include <regex>
#include <set>

#include "slicefuzz/parallel.hpp"
#include "slicefuzz/process.hpp"

namespace slicefuzz {

namespace {

// Options whose value is the following argument.
const std::set<std::string, std::less<>> kSeparateValue = {
    "-o",        "-I",          "-D",        "-U",       "-include",   "-imacros", "-isystem", "-iquote",
    "-idirafter", "-iprefix",   "-iwithprefix", "-MF",   "-MT",        "-MQ",      "-x",       "-L",
    "-l",        "-Xlinker",    "-Xassembler", "-Xpreprocessor", "-Xclang", "-target", "-arch", "-T",
    "-u",        "-z",          "-aux-info", "--param",  "-isysroot",  "--sysroot", "-e",      "-G"};

bool is_c_source(std::string_view arg) { return ends_with(arg, ".c"); }

bool is_input_file(std::string_view arg) {
  return ends_with(arg, ".c") || ends_with(arg, ".o") || ends_with(arg, ".a") || ends_with(arg, ".so") ||
         ends_with(arg, ".s") || ends_with(arg, ".S") || ends_with(arg, ".lo") || ends_with(arg, ".i");
}

enum class Mode { compile, link, preprocess, other };

struct ParsedInvocation {
  Mode mode = Mode::other;
  std::vector<std::size_t> c_sources;    // argv indices
  std::vector<std::size_t> other_inputs;  // argv indices
  std::optional<std::size_t> output_index;  // argv index of the -o value
  std::string output;
};

ParsedInvocation parse_invocation(const std::vector<std::string>& argv) {
  ParsedInvocation p;
  bool has_c = false, has_E = false, has_S = false, has_M = false;
  bool language_c = false;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "-c") {
      has_c = true;
    } else if (a == "-E") {
      has_E = true;
    } else if (a == "-S") {
      has_S = true;
    } else if (a == "-M" || a == "-MM") {
      has_M = true;
    } else if (a == "-o" && i + 1 < argv.size()) {
      p.output_index = i + 1;
      p.output = argv[i + 1];
      ++i;
    } else if (starts_with(a, "-o") && a.size() > 2) {
      p.output = a.substr(2);
    } else if (a == "-x" && i + 1 < argv.size()) {
      language_c = argv[i + 1] == "c";
      ++i;
    } else if (kSeparateValue.count(a) && i + 1 < argv.size()) {
      ++i;
    } else if (!a.empty() && a[0] == '-') {
      continue;
    } else if (is_c_source(a) || (language_c && !is_input_file(a))) {
      p.c_sources.push_back(i);
    } else if (is_input_file(a)) {
      p.other_inputs.push_back(i);
    }
  }
  bool has_inputs = !p.c_sources.empty() || !p.other_inputs.empty();
  if (!has_inputs || has_S) {
    p.mode = Mode::other;
  } else if (has_E || has_M) {
    p.mode = Mode::preprocess;
  } else if (has_c) {
    p.mode = Mode::compile;
  } else {
    p.mode = Mode::link;
  }
  return p;
}

std::string first_line(std::string_view s) {
  auto nl = s.find('\n');
  return std::string(trim(s.substr(0, nl)));
}

}  // namespace

const LinkCommand* CompilationDatabase::link_for(const CompileRecord& record) const {
  auto it = links.find(record.link_group);
  return it == links.end() ? nullptr : &it->second;
}

std::vector<std::string> essential_flags(const CompileRecord& record, bool drop_forced_includes) {
  std::vector<std::string> out;
  const auto& argv = record.args;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "-c" || a == "-E" || a == "-S" || a == "-MD" || a == "-MMD" || a == "-MP" || a == "-M" || a == "-MM") {
      continue;
    }
    if ((a == "-o" || a == "-MF" || a == "-MT" || a == "-MQ") && i + 1 < argv.size()) {
      ++i;
      continue;
    }
    if (starts_with(a, "-o") && a.size() > 2) continue;
    if (starts_with(a, "-MF") || starts_with(a, "-MT") || starts_with(a, "-MQ")) continue;
    if (drop_forced_includes && (a == "-include" || a == "-imacros") && i + 1 < argv.size()) {
      ++i;
      continue;
    }
    if (kSeparateValue.count(a) && i + 1 < argv.size()) {
      out.push_back(a);
      out.push_back(argv[++i]);
      continue;
    }
    if (!a.empty() && a[0] != '-' && (is_c_source(a) || is_input_file(a))) continue;
    out.push_back(a);
  }
  return out;
}

std::vector<std::string> link_options(const LinkCommand& link) {
  std::vector<std::string> out;
  const auto& argv = link.args;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "-o" && i + 1 < argv.size()) {
      ++i;
      continue;
    }
    if (starts_with(a, "-o") && a.size() > 2) continue;
    if (kSeparateValue.count(a) && i + 1 < argv.size()) {
      out.push_back(a);
      out.push_back(argv[++i]);
      continue;
    }
    if (!a.empty() && a[0] != '-' && is_input_file(a)) continue;
    out.push_back(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shim log

void append_invocation(const fs::path& log_path, const Invocation& invocation) {
  nlohmann::json j{{"cwd", invocation.cwd.string()}, {"argv", invocation.argv}, {"status", invocation.status}};
  std::string line = j.dump() + "\n";
  int fd = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open capture log " + log_path.string());
  ::flock(fd, LOCK_EX);
  std::size_t off = 0;
  while (off < line.size()) {
    ssize_t n = ::write(fd, line.data() + off, line.size() - off);
    if (n <= 0) break;
    off += static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
}

std::vector<Invocation> read_invocations(const fs::path& log_path) {
  std::vector<Invocation> out;
  std::error_code ec;
  if (!fs::exists(log_path, ec)) return out;
  for (const auto& line : split_lines(read_file(log_path))) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    Invocation inv;
    inv.cwd = j.at("cwd").get<std::string>();
    inv.argv = j.at("argv").get<std::vector<std::string>>();
    inv.status = j.value("status", 0);
    out.push_back(std::move(inv));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Invocation analysis

CompilationDatabase analyze_invocations(const std::vector<Invocation>& invocations, const fs::path& repo_root,
                                        const fs::path& workspace) {
  CompilationDatabase db;
  db.repo_root = repo_root.lexically_normal();

  struct PendingLink {
    std::string group;
    LinkCommand command;
    std::vector<fs::path> inputs;
  };
  std::vector<PendingLink> pending_links;
  std::set<std::string> compilers;

  for (const auto& inv : invocations) {
    if (inv.status != 0 || inv.argv.empty()) continue;
    auto parsed = parse_invocation(inv.argv);
    if (parsed.mode == Mode::compile) {
      compilers.insert(inv.argv[0]);
      for (std::size_t src_idx : parsed.c_sources) {
        CompileRecord rec;
        rec.directory = inv.cwd;
        rec.source = absolute_normal(inv.argv[src_idx], inv.cwd);
        // Other sources of a multi-source compile are dropped from this record's argv.
        for (std::size_t i = 0; i < inv.argv.size(); ++i) {
          bool other_source = i != src_idx && std::find(parsed.c_sources.begin(), parsed.c_sources.end(), i) !=
                                                  parsed.c_sources.end();
          if (!other_source) rec.args.push_back(inv.argv[i]);
        }
        if (!parsed.output.empty() && parsed.c_sources.size() == 1) {
          rec.output = absolute_normal(parsed.output, inv.cwd);
        } else {
          rec.output = absolute_normal(fs::path(inv.argv[src_idx]).stem().string() + ".o", inv.cwd);
        }
        db.records.push_back(std::move(rec));
      }
    } else if (parsed.mode == Mode::link) {
      compilers.insert(inv.argv[0]);
      PendingLink link;
      fs::path output = absolute_normal(parsed.output.empty() ? "a.out" : parsed.output, inv.cwd);
      link.group = relative_to(output, repo_root);
      link.command.directory = inv.cwd;
      link.command.args = inv.argv;
      for (std::size_t idx : parsed.other_inputs) link.inputs.push_back(absolute_normal(inv.argv[idx], inv.cwd));
      // Compile-and-link in one step: split out a compile record per C source.
      for (std::size_t src_idx : parsed.c_sources) {
        CompileRecord rec;
        rec.directory = inv.cwd;
        rec.source = absolute_normal(inv.argv[src_idx], inv.cwd);
        rec.output = (workspace / "capture_objects" /
                      (fnv1a_hex(rec.source.string() + "|" + link.group) + "_" + rec.source.stem().string() + ".o"))
                         .lexically_normal();
        rec.args.push_back(inv.argv[0]);
        for (std::size_t i = 1; i < inv.argv.size(); ++i) {
          const std::string& a = inv.argv[i];
          if (std::find(parsed.c_sources.begin(), parsed.c_sources.end(), i) != parsed.c_sources.end()) continue;
          if (std::find(parsed.other_inputs.begin(), parsed.other_inputs.end(), i) != parsed.other_inputs.end()) continue;
          if (parsed.output_index && (i == *parsed.output_index || i + 1 == *parsed.output_index)) continue;
          if (starts_with(a, "-o") || starts_with(a, "-l") || starts_with(a, "-L") || starts_with(a, "-Wl,") ||
              a == "-shared" || a == "-static" || a == "-rdynamic") {
            continue;
          }
          rec.args.push_back(a);
        }
        rec.args.push_back("-c");
        rec.args.push_back(rec.source.string());
        rec.args.push_back("-o");
        rec.args.push_back(rec.output.string());
        link.inputs.push_back(rec.output);
        // The link line now consumes the split-out object instead of the source.
        link.command.args[src_idx] = rec.output.string();
        db.records.push_back(std::move(rec));
      }
      pending_links.push_back(std::move(link));
    }
  }

  for (auto& rec : db.records) {
    rec.link_group = kUnlinkedGroup;
    for (const auto& link : pending_links) {
      if (std::find(link.inputs.begin(), link.inputs.end(), rec.output) != link.inputs.end()) {
        rec.link_group = link.group;
        break;
      }
    }
  }
  for (auto& link : pending_links) {
    db.links.emplace(link.group, std::move(link.command));
  }
  bool any_unlinked = std::any_of(db.records.begin(), db.records.end(),
                                  [](const CompileRecord& r) { return r.link_group == kUnlinkedGroup; });
  if (any_unlinked && !db.links.count(kUnlinkedGroup)) {
    LinkCommand synthetic;
    synthetic.directory = repo_root;
    for (const auto& r : db.records) {
      if (r.link_group == kUnlinkedGroup) {
        synthetic.args = {r.args.at(0)};
        break;
      }
    }
    db.links.emplace(kUnlinkedGroup, std::move(synthetic));
  }

  std::sort(db.records.begin(), db.records.end(), [](const CompileRecord& a, const CompileRecord& b) {
    return std::tie(a.source, a.output, a.args) < std::tie(b.source, b.output, b.args);
  });
  db.records.erase(std::unique(db.records.begin(), db.records.end()), db.records.end());

  nlohmann::json tc = nlohmann::json::object();
  for (const auto& c : compilers) tc[c] = "";
  db.toolchain["compilers"] = tc;
  return db;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const CompilationDatabase& db) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : db.records) {
    records.push_back({{"directory", r.directory.string()},
                       {"source", r.source.string()},
                       {"args", r.args},
                       {"output", r.output.string()},
                       {"link_group", r.link_group}});
  }
  nlohmann::json links = nlohmann::json::object();
  nlohmann::json link_dirs = nlohmann::json::object();
  for (const auto& [group, cmd] : db.links) {
    links[group] = cmd.args;
    link_dirs[group] = cmd.directory.string();
  }
  return {{"repo_root", db.repo_root.string()},
          {"records", records},
          {"links", links},
          {"link_dirs", link_dirs},
          {"toolchain", db.toolchain}};
}

CompilationDatabase database_from_json(const nlohmann::json& j) {
  CompilationDatabase db;
  db.repo_root = j.value("repo_root", std::string());
  for (const auto& r : j.at("records")) {
    CompileRecord rec;
    rec.directory = r.at("directory").get<std::string>();
    rec.source = r.at("source").get<std::string>();
    rec.args = r.at("args").get<std::vector<std::string>>();
    rec.output = r.at("output").get<std::string>();
    rec.link_group = r.at("link_group").get<std::string>();
    db.records.push_back(std::move(rec));
  }
  for (const auto& [group, args] : j.at("links").items()) {
    LinkCommand cmd;
    cmd.args = args.get<std::vector<std::string>>();
    if (j.contains("link_dirs") && j["link_dirs"].contains(group)) cmd.directory = j["link_dirs"][group].get<std::string>();
    db.links.emplace(group, std::move(cmd));
  }
  db.toolchain = j.value("toolchain", nlohmann::json::object());
  for (const auto& rec : db.records) {
    if (!db.links.count(rec.link_group)) {
      throw Error("compilation database: record " + rec.source.string() + " names unknown link group " + rec.link_group);
    }
  }
  return db;
}

void save_database(const CompilationDatabase& db, const fs::path& path) { write_file(path, to_json(db).dump(2) + "\n"); }

CompilationDatabase load_database(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error("compilation database not found at " + path.string());
  return database_from_json(nlohmann::json::parse(read_file(path)));
}

// ---------------------------------------------------------------------------
// Capture

CompilationDatabase capture_build(const fs::path& repo_root_in, const std::string& build_cmd,
                                  const CaptureOptions& options) {
  fs::path repo_root = absolute_normal(repo_root_in);
  fs::path workspace = absolute_normal(options.workspace);
  if (!fs::is_directory(repo_root)) throw Error("repository root " + repo_root.string() + " is not a directory");
  if (options.shim_path.empty() || !fs::exists(options.shim_path)) {
    throw Error("compiler shim not found at '" + options.shim_path.string() + "'");
  }
  fs::create_directories(workspace / "logs");
  fs::path shim_dir = workspace / "shim" / "bin";
  fs::remove_all(shim_dir);
  fs::create_directories(shim_dir);
  fs::path shim = fs::canonical(options.shim_path);
  for (const auto& name : options.compiler_names) fs::create_symlink(shim, shim_dir / name);

  fs::path log_path = workspace / "logs" / "capture.jsonl";
  fs::remove(log_path);

  const char* path_env = std::getenv("PATH");
  std::string orig_path = path_env ? path_env : "/usr/bin:/bin";
  ProcessOptions popts;
  popts.cwd = repo_root;
  popts.timeout_seconds = options.timeout_seconds;
  popts.env["PATH"] = shim_dir.string() + ":" + orig_path;
  popts.env["SLICEFUZZ_ORIG_PATH"] = orig_path;
  popts.env["SLICEFUZZ_CAPTURE_LOG"] = log_path.string();
  popts.env["LC_ALL"] = "C";
  auto build = run_process({"/bin/sh", "-c", build_cmd}, popts);
  write_file(workspace / "logs" / "build.log", build.output);
  if (!build.ok()) {
    throw Error("build command failed (exit " + std::to_string(build.exit_code) + "); log:\n" + build.output);
  }

  auto invocations = read_invocations(log_path);
  auto db = analyze_invocations(invocations, repo_root, workspace);
  if (db.records.empty()) {
    throw Error("zero compile steps observed while running '" + build_cmd +
                "' (no C compilation went through the compiler wrapper)");
  }

  // Split-out objects of compile-and-link steps do not exist yet; replay creates them.
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    const auto& rec = db.records[i];
    if (!options.verify_replay && is_within(rec.output, workspace)) {
      fs::create_directories(rec.output.parent_path());
    }
    if (!options.verify_replay) continue;
    fs::path replay_out = is_within(rec.output, workspace)
                              ? rec.output
                              : workspace / "replay" / (std::to_string(i) + ".o");
    fs::create_directories(replay_out.parent_path());
    std::vector<std::string> argv{rec.args.at(0)};
    auto flags = essential_flags(rec);
    argv.insert(argv.end(), flags.begin(), flags.end());
    argv.insert(argv.end(), {"-c", rec.source.string(), "-o", replay_out.string()});
    ProcessOptions ropts;
    ropts.cwd = rec.directory;
    ropts.env["LC_ALL"] = "C";
    auto replay = run_process(argv, ropts);
    if (!replay.ok()) {
      throw Error("replaying the recorded compile of " + rec.source.string() + " failed:\n" + replay.output);
    }
  }
  fs::remove_all(workspace / "replay");

  nlohmann::json compilers = nlohmann::json::object();
  for (const auto& [exe, _] : db.toolchain["compilers"].items()) {
    auto v = run_process({exe, "--version"});
    compilers[exe] = first_line(v.output);
  }
  db.toolchain["compilers"] = compilers;
  save_database(db, workspace / "compile_db.json");
  return db;
}

// ---------------------------------------------------------------------------
// Preprocessing and line maps

void strip_line_markers(std::string_view pp_text, const fs::path& directory, const fs::path& repo_root,
                        std::string& text, std::vector<SourceLocation>& line_map) {
  static const std::regex kMarker(R"(^#(?:line)?\s+(\d+)(?:\s+\"((?:[^\"\\]|\\.)*)\")?(.*)$)");
  text.clear();
  line_map.clear();
  std::string current_file;
  bool current_external = true;
  int next_line = 1;
  std::map<std::string, std::pair<std::string, bool>> resolved;  // spelled -> (display, external)

  auto resolve = [&](const std::string& spelled, bool system_flag) -> std::pair<std::string, bool> {
    auto key = spelled + (system_flag ? "\x01" : "");
    if (auto it = resolved.find(key); it != resolved.end()) return it->second;
    std::pair<std::string, bool> out{spelled, true};
    if (!spelled.empty() && spelled.front() != '<' && !system_flag) {
      fs::path abs = absolute_normal(spelled, directory);
      if (!repo_root.empty() && is_within(abs, repo_root)) out = {relative_to(abs, repo_root), false};
    }
    resolved.emplace(key, out);
    return out;
  };

  std::size_t pos = 0;
  while (pos < pp_text.size()) {
    auto nl = pp_text.find('\n', pos);
    std::string_view line = pp_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? pp_text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.size() > 1 && line[0] == '#' && (line[1] == ' ' || starts_with(line, "#line"))) {
      std::smatch m;
      std::string l(line);
      if (std::regex_match(l, m, kMarker)) {
        next_line = std::stoi(m[1].str());
        if (m[2].matched) {
          std::string spelled;
          std::string raw = m[2].str();
          for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 1 < raw.size()) ++i;
            spelled.push_back(raw[i]);
          }
          bool system_flag = m[3].str().find(" 3") != std::string::npos;
          auto [display, external] = resolve(spelled, system_flag);
          current_file = display;
          current_external = external;
        }
        continue;
      }
    }
    text.append(line);
    text.push_back('\n');
    line_map.push_back({current_file, next_line, current_external});
    ++next_line;
  }
}

std::vector<UnitPtr> preprocess_sources(const CompilationDatabase& db, const fs::path& workspace_in, int workers) {
  fs::path workspace = absolute_normal(workspace_in);
  fs::create_directories(workspace / "pp");
  std::vector<UnitPtr> units(db.records.size());
  parallel_for(db.records.size(), workers, [&](std::size_t i) {
    const auto& rec = db.records[i];
    auto unit = std::make_shared<PreprocessedUnit>();
    unit->id = i;
    unit->origin = rec;
    unit->source_file = relative_to(rec.source, db.repo_root);
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%03zu_", i);
    unit->pp_path = workspace / "pp" / (prefix + rec.source.stem().string() + ".i");
    std::vector<std::string> argv{rec.args.at(0)};
    auto flags = essential_flags(rec);
    argv.insert(argv.end(), flags.begin(), flags.end());
    argv.insert(argv.end(), {"-E", rec.source.string(), "-o", unit->pp_path.string()});
    ProcessOptions opts;
    opts.cwd = rec.directory;
    opts.env["LC_ALL"] = "C";
    auto r = run_process(argv, opts);
    if (!r.ok()) {
      unit->ok = false;
      unit->error = r.output.empty() ? "preprocessor failed" : r.output;
    } else {
      unit->ok = true;
      strip_line_markers(read_file(unit->pp_path), rec.directory, db.repo_root, unit->text, unit->line_map);
    }
    units[i] = std::move(unit);
  });
  return units;
}

UnitPtr make_identity_unit(std::string text, std::string file, std::size_t id) {
  auto unit = std::make_shared<PreprocessedUnit>();
  unit->id = id;
  unit->ok = true;
  unit->source_file = file;
  unit->origin.source = file;
  unit->text = std::move(text);
  if (!unit->text.empty() && unit->text.back() != '\n') unit->text.push_back('\n');
  int n = static_cast<int>(std::count(unit->text.begin(), unit->text.end(), '\n'));
  for (int i = 1; i <= n; ++i) unit->line_map.push_back({file, i, false});
  return unit;
}

SourceLocation map_line(const PreprocessedUnit& unit, int pp_line) {
  if (pp_line < 1 || static_cast<std::size_t>(pp_line) > unit.line_map.size()) {
    throw std::out_of_range("preprocessed line " + std::to_string(pp_line) + " outside unit " + unit.source_file +
                            " (" + std::to_string(unit.line_map.size()) + " lines)");
  }
  return unit.line_map[static_cast<std::size_t>(pp_line - 1)];
}

nlohmann::json units_to_json(const std::vector<UnitPtr>& units) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& u : units) {
    arr.push_back({{"id", u->id},
                   {"source_file", u->source_file},
                   {"pp_path", u->pp_path.string()},
                   {"ok", u->ok},
                   {"error", u->error},
                   {"record",
                    {{"directory", u->origin.directory.string()},
                     {"source", u->origin.source.string()},
                     {"args", u->origin.args},
                     {"output", u->origin.output.string()},
                     {"link_group", u->origin.link_group}}}});
  }
  return arr;
}

std::vector<UnitPtr> units_from_json(const nlohmann::json& j, const fs::path& repo_root) {
  std::vector<UnitPtr> units;
  for (const auto& e : j) {
    auto unit = std::make_shared<PreprocessedUnit>();
    unit->id = e.at("id").get<std::size_t>();
    unit->source_file = e.at("source_file").get<std::string>();
    unit->pp_path = e.at("pp_path").get<std::string>();
    unit->ok = e.at("ok").get<bool>();
    unit->error = e.value("error", std::string());
    const auto& r = e.at("record");
    unit->origin.directory = r.at("directory").get<std::string>();
    unit->origin.source = r.at("source").get<std::string>();
    unit->origin.args = r.at("args").get<std::vector<std::string>>();
    unit->origin.output = r.at("output").get<std::string>();
    unit->origin.link_group = r.at("link_group").get<std::string>();
    if (unit->ok) {
      strip_line_markers(read_file(unit->pp_path), unit->origin.directory, repo_root, unit->text, unit->line_map);
    }
    units.push_back(std::move(unit));
  }
  return units;
}

fs::path resolve_workspace(const std::optional<fs::path>& fallback) {
  if (const char* env = std::getenv("SLICEFUZZ_WORKDIR"); env && *env) return absolute_normal(env);
  if (fallback) return absolute_normal(*fallback);
  return absolute_normal("slicefuzz-work");
}

}  // namespace slicefuzz
