#include "slicefuzz/pipeline.hpp"

#include <cstdlib>

#include "slicefuzz/code_index.hpp"
#include "slicefuzz/harness_gen.hpp"
#include "slicefuzz/parallel.hpp"
#include "slicefuzz/process.hpp"

namespace slicefuzz {

void RunConfig::validate() const {
  if (budget_seconds < 0) throw Error("budget must be >= 0 (got " + std::to_string(budget_seconds) + ")");
  if (workers < 1) throw Error("workers must be >= 1 (got " + std::to_string(workers) + ")");
  if (out_dir.empty()) throw Error("no output directory given");
  if (!repo_root.empty() && !fs::is_directory(repo_root)) throw Error("repository not found: " + repo_root.string());
}

StageOrderError::StageOrderError(const std::string& stage_, const std::string& needs_, const fs::path& missing)
    : Error(stage_ + ": missing " + missing.string() + "; run the '" + needs_ + "' stage first"),
      stage(stage_),
      needs(needs_) {}

namespace {

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

void write_json(const fs::path& p, const nlohmann::json& j) { write_file(p, j.dump(2) + "\n"); }

fs::path require(const RunConfig& cfg, const std::string& stage, const std::string& needs, const fs::path& rel) {
  fs::path p = cfg.out_dir / rel;
  if (!fs::exists(p)) throw StageOrderError(stage, needs, p);
  return p;
}

fs::path repo_of(const RunConfig& cfg) {
  if (!cfg.repo_root.empty()) return absolute_normal(cfg.repo_root);
  return load_database(cfg.out_dir / "compile_db.json").repo_root;
}

nlohmann::json target_to_json(const Target& t) {
  nlohmann::json j{{"warning", t.warning}};
  if (t.function) {
    j["function"] = {{"unit", t.function->unit}, {"function", t.function->function}, {"name", t.function_name}};
  } else {
    j["reason"] = t.reason;
  }
  return j;
}

Target target_from_json(const nlohmann::json& j) {
  Target t;
  t.warning = j.at("warning").get<Warning>();
  if (j.contains("function")) {
    const auto& f = j.at("function");
    t.function = FunctionRef{f.at("unit").get<std::size_t>(), f.at("function").get<std::size_t>()};
    t.function_name = f.at("name").get<std::string>();
  } else {
    t.reason = j.value("reason", std::string());
  }
  return t;
}

nlohmann::json fuzz_record_json(const FuzzRecord& r) {
  nlohmann::json j{{"budget", r.budget}, {"build_seconds", r.build_seconds}, {"verdict", r.has_verdict}};
  if (r.failure) j["failure"] = *r.failure;
  return j;
}

FuzzRecord fuzz_record_from(const nlohmann::json& j) {
  FuzzRecord r;
  r.budget = j.value("budget", 0.0);
  r.build_seconds = j.value("build_seconds", 0.0);
  r.has_verdict = j.value("verdict", false);
  if (j.contains("failure")) r.failure = j.at("failure").get<std::string>();
  return r;
}

bool selected(const std::set<std::string>& only, const std::string& id) { return only.empty() || only.count(id); }

}  // namespace

fs::path warning_dir(const RunConfig& cfg, const std::string& id) { return cfg.out_dir / "w" / id; }

void cmd_capture(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.repo_root.empty()) throw Error("capture needs --repo");
  CaptureOptions o;
  o.workspace = cfg.out_dir;
  o.shim_path = cfg.shim_path;
  fs::create_directories(cfg.out_dir);
  capture_build(absolute_normal(cfg.repo_root), cfg.build_cmd, o);
}

RepoIndex load_index(const RunConfig& cfg) {
  fs::path p = require(cfg, "index", "index", "units.json");
  fs::path root = repo_of(cfg);
  return build_repo_index(units_from_json(read_json(p), root), root, cfg.workers);
}

void cmd_index(const RunConfig& cfg) {
  cfg.validate();
  fs::path dbp = require(cfg, "index", "capture", "compile_db.json");
  if (cfg.warnings_path.empty()) throw Error("index needs --warnings");
  CompilationDatabase db = load_database(dbp);
  fs::path root = db.repo_root;

  auto units = preprocess_sources(db, cfg.out_dir, cfg.workers);
  write_json(cfg.out_dir / "units.json", units_to_json(units));
  RepoIndex idx = build_repo_index(units, root, cfg.workers);

  ReportFormat fmt = cfg.warnings_format.value_or(
      cfg.warnings_path.extension() == ".csv" ? ReportFormat::csv : ReportFormat::jsonl);
  IngestResult ing = load_warnings(cfg.warnings_path, fmt, root);
  SeverityPolicy policy = cfg.severity_policy.empty() ? SeverityPolicy::defaults() : SeverityPolicy::parse(cfg.severity_policy);
  auto kept = filter_by_severity(ing.warnings, policy);
  auto dd = dedupe_warnings(kept);

  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : ing.diagnostics) diags.push_back({{"record", d.record}, {"message", d.message}});
  write_json(cfg.out_dir / "warnings.json", {{"loaded", ing.warnings.size()},
                                             {"after_severity", kept.size()},
                                             {"warnings", dd.warnings},
                                             {"duplicates", dd.dropped_to_retained},
                                             {"diagnostics", diags}});

  nlohmann::json targets = nlohmann::json::array();
  for (const auto& w : dd.warnings) {
    Target t;
    t.warning = w;
    auto enc = enclosing_function(idx, w.file, w.line);
    if (enc.function) {
      t.function = enc.function;
      t.function_name = idx.function(*enc.function).name;
    } else {
      t.reason = enc.reason;
    }
    targets.push_back(target_to_json(t));
  }
  write_json(cfg.out_dir / "targets.json", targets);
}

std::vector<Target> load_targets(const RunConfig& cfg) {
  std::vector<Target> out;
  for (const auto& j : read_json(require(cfg, "slice", "index", "targets.json"))) out.push_back(target_from_json(j));
  return out;
}

void cmd_slice(const RunConfig& cfg, const std::set<std::string>& only) {
  cfg.validate();
  auto targets = load_targets(cfg);
  CompilationDatabase db = load_database(require(cfg, "slice", "capture", "compile_db.json"));
  RepoIndex idx = load_index(cfg);
  parallel_for(targets.size(), cfg.workers, [&](std::size_t i) {
    const Target& t = targets[i];
    if (!t.function || !selected(only, t.warning.id)) return;
    fs::path wd = warning_dir(cfg, t.warning.id);
    fs::remove_all(wd);
    fs::create_directories(wd);
    try {
      build_slice(t.warning, *t.function, idx, db, wd, cfg.caps);
    } catch (const Error& e) {
      write_file(wd / "slice_error.txt", std::string(e.what()) + "\n");
    }
  });
}

void cmd_fuzz(const RunConfig& cfg, const std::set<std::string>& only, std::optional<double> budget_override) {
  cfg.validate();
  auto targets = load_targets(cfg);
  for (const auto& t : targets) {
    if (!t.function || !selected(only, t.warning.id)) continue;
    fs::path wd = warning_dir(cfg, t.warning.id);
    if (!fs::exists(wd / "slice.json") && !fs::exists(wd / "slice_error.txt"))
      throw StageOrderError("fuzz", "slice", wd / "slice.json");
  }
  CompilationDatabase db = load_database(require(cfg, "fuzz", "capture", "compile_db.json"));
  RepoIndex idx = load_index(cfg);
  double budget = budget_override.value_or(cfg.budget_seconds);
  if (budget < 0) throw Error("budget must be >= 0");

  parallel_for(targets.size(), cfg.workers, [&](std::size_t i) {
    const Target& t = targets[i];
    if (!t.function || !selected(only, t.warning.id)) return;
    fs::path wd = warning_dir(cfg, t.warning.id);
    fs::remove(wd / "verdict.json");
    fs::remove(wd / "fuzz.json");
    if (!fs::exists(wd / "slice.json")) return;
    Slice s = load_slice(wd);
    if (!s.compiled) return;

    FuzzRecord rec;
    rec.budget = budget;
    auto plan = plan_arguments(idx.function(s.root), idx, !s.reads_globals.empty());
    if (auto* u = std::get_if<Unfuzzable>(&plan)) {
      rec.failure = "unfuzzable: " + u->reason;
      write_json(wd / "fuzz.json", fuzz_record_json(rec));
      return;
    }
    const auto& spec = std::get<HarnessSpec>(plan);
    write_json(wd / "harness_spec.json", spec_to_json(spec));
    fs::path harness = write_harness(spec, s, idx);
    BuildResult br = link_executable(s, harness, db, idx, cfg.fuzz);
    rec.build_seconds = br.seconds;
    if (!br.ok) {
      write_file(wd / "fuzz_build.log", br.log);
      rec.failure = "link";
      write_json(wd / "fuzz.json", fuzz_record_json(rec));
      return;
    }
    RunArtifacts run = run_fuzz(br.binary, budget, cfg.seed, cfg.fuzz);
    FuzzVerdict v = collect_verdict(run, t.warning, s, cfg.fuzz);
    write_json(wd / "verdict.json", verdict_to_json(v));
    rec.has_verdict = true;
    write_json(wd / "fuzz.json", fuzz_record_json(rec));
  });
}

ReportTable cmd_classify(const RunConfig& cfg) {
  cfg.validate();
  auto targets = load_targets(cfg);
  std::vector<ReportRow> rows;
  for (const auto& t : targets) {
    ReportRow row;
    row.warning = t.warning;
    row.function = t.function_name;
    Outcome o;
    o.warning = t.warning;
    if (!t.function) {
      o.failure = t.reason;
    } else {
      fs::path wd = warning_dir(cfg, t.warning.id);
      if (fs::exists(wd / "slice_error.txt")) {
        o.failure = "slice error: " + std::string(trim(read_file(wd / "slice_error.txt")));
      } else {
        if (!fs::exists(wd / "slice.json")) throw StageOrderError("classify", "slice", wd / "slice.json");
        Slice s = load_slice(wd);
        o.slice_compiled = s.compiled;
        o.slice_reason = s.reason;
        o.reads_globals = !s.reads_globals.empty();
        row.rounds = s.rounds;
        row.retained_loc = s.retained_loc;
        row.slice_seconds = s.build_seconds;
        row.compile_seconds = s.compile_seconds;
        if (s.compiled) {
          if (!fs::exists(wd / "fuzz.json")) throw StageOrderError("classify", "fuzz", wd / "fuzz.json");
          FuzzRecord fr = fuzz_record_from(read_json(wd / "fuzz.json"));
          o.failure = fr.failure;
          if (fr.has_verdict) {
            FuzzVerdict v = verdict_from_json(read_json(wd / "verdict.json"));
            row.hits = v.target_line_hits;
            row.wall_time = v.wall_time;
            o.verdict = std::move(v);
          }
        }
      }
    }
    row.classification = classify(o);
    rows.push_back(std::move(row));
  }
  ReportTable table = summarize(repo_of(cfg).filename().string(), std::move(rows));
  write_json(cfg.out_dir / "report.json", report_to_json(table));
  write_file(cfg.out_dir / "report.txt", report_to_text(table));
  return table;
}

std::optional<fs::path> locate_shim(const std::vector<fs::path>& dirs) {
  if (const char* env = std::getenv("SLICEFUZZ_SHIM"); env && *env) return fs::path(env);
  for (const auto& d : dirs) {
    fs::path p = d / "slicefuzz-cc-shim";
    if (fs::is_regular_file(p)) return p;
  }
  return find_executable("slicefuzz-cc-shim");
}

int exit_status(const ReportTable& t) { return t.overall.nc > 0 ? 2 : 0; }

int cmd_run(const RunConfig& cfg, ReportTable* table) {
  cfg.validate();
  cmd_capture(cfg);
  cmd_index(cfg);
  cmd_slice(cfg);
  cmd_fuzz(cfg);
  ReportTable t = cmd_classify(cfg);
  if (table) *table = t;
  return exit_status(t);
}

}  // namespace slicefuzz
