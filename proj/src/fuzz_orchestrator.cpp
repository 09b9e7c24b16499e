#include "slicefuzz/fuzz_orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <regex>
#include <sstream>

#include "slicefuzz/process.hpp"

namespace slicefuzz {

namespace {

std::vector<std::string> instrument_flags(const FuzzOptions& options) {
  std::vector<std::string> flags{"-O0", "-g", "-gdwarf-4", "-fno-omit-frame-pointer", "-fsanitize=address",
                                 "-fsanitize=fuzzer-no-link", "--coverage"};
  if (auto v = gcov_coverage_version(options.gcov)) {
    flags.insert(flags.end(), {"-Xclang", "-coverage-version=" + *v});
  }
  return flags;
}

std::string first_line(std::string_view s) {
  auto nl = s.find('\n');
  return std::string(s.substr(0, nl));
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::string s = read_file(p);
  return {s.begin(), s.end()};
}

const MinimizedFile* file_for(const Slice& slice, const fs::path& emitted) {
  std::error_code ec;
  for (const auto& f : slice.files) {
    if (f.emitted_path == emitted || fs::equivalent(f.emitted_path, emitted, ec)) return &f;
  }
  return nullptr;
}

std::optional<SourceLocation> map_emitted(const Slice& slice, const fs::path& emitted, int line) {
  const MinimizedFile* f = file_for(slice, emitted);
  if (!f || line < 1 || line > static_cast<int>(f->emitted_line_map.size())) return std::nullopt;
  return f->emitted_line_map[line - 1];
}

}  // namespace

std::string to_string(EngineEvent e) {
  switch (e) {
    case EngineEvent::not_run: return "not_run";
    case EngineEvent::completed: return "completed";
    case EngineEvent::crash: return "crash";
    case EngineEvent::oom: return "oom";
    case EngineEvent::timeout: return "timeout";
    case EngineEvent::leak: return "leak";
    case EngineEvent::start_failure: return "start_failure";
    case EngineEvent::killed: return "killed";
  }
  return "not_run";
}

std::optional<std::string> gcov_coverage_version(const std::string& gcov) {
  static std::map<std::string, std::optional<std::string>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(gcov); it != cache.end()) return it->second;
  std::optional<std::string> out;
  auto r = run_process({gcov, "--version"});
  std::smatch m;
  std::string line = first_line(r.output);
  static const std::regex kVersion(R"((\d+)\.(\d+)(?:\.\d+)?\s*$)");
  if (r.ok() && std::regex_search(line, m, kVersion)) {
    int major = std::stoi(m[1].str()), minor = std::stoi(m[2].str());
    // gcov's own encoding: major >= 10 shifts the first letter.
    std::string v;
    v += static_cast<char>('A' + major / 10);
    v += static_cast<char>('0' + major % 10);
    v += static_cast<char>('0' + minor);
    v += '*';
    out = v;
  }
  cache[gcov] = out;
  return out;
}

// ---------------------------------------------------------------------------
// Building

BuildResult link_executable(const Slice& slice, const fs::path& harness, const CompilationDatabase& db,
                            const RepoIndex& idx, const FuzzOptions& options) {
  if (!slice.compiled) throw Error("link_executable: slice for " + slice.warning.id + " is not compiled");
  auto t0 = std::chrono::steady_clock::now();
  BuildResult br;
  fs::path dir = slice.workdir / "fuzz";
  fs::path objdir = dir / "obj";
  fs::create_directories(objdir);
  auto inst = instrument_flags(options);
  std::vector<std::string> objects;

  auto compile = [&](const CompileRecord& rec, const fs::path& src, const fs::path& obj) {
    std::vector<std::string> argv{options.clang};
    auto flags = essential_flags(rec, true);
    argv.insert(argv.end(), flags.begin(), flags.end());
    argv.insert(argv.end(), inst.begin(), inst.end());
    argv.insert(argv.end(), options.extra_cflags.begin(), options.extra_cflags.end());
    argv.insert(argv.end(), {"-w", "-c", src.string(), "-o", obj.string()});
    ProcessOptions po;
    po.cwd = rec.directory;
    po.env["LC_ALL"] = "C";
    auto r = run_process(argv, po);
    br.log += "$ " + join_command(argv) + "\n" + r.output;
    if (!r.ok()) return false;
    objects.push_back(obj.string());
    return true;
  };

  for (const auto& f : slice.files) {
    const auto& rec = idx.unit(f.origin_unit).unit->origin;
    fs::path obj = objdir / ("u" + std::to_string(f.origin_unit) + "_" + rec.source.stem().string() + ".o");
    if (!compile(rec, f.emitted_path, obj)) {
      br.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return br;
    }
  }
  const auto& root_rec = idx.unit(slice.root.unit).unit->origin;
  if (!compile(root_rec, harness, objdir / "harness.o")) {
    br.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return br;
  }

  br.binary = dir / "fuzzer";
  std::vector<std::string> argv{options.clang};
  argv.insert(argv.end(), objects.begin(), objects.end());
  if (auto it = db.links.find(root_rec.link_group); it != db.links.end()) {
    auto lo = link_options(it->second);
    argv.insert(argv.end(), lo.begin(), lo.end());
  }
  argv.insert(argv.end(), {"-fsanitize=address,fuzzer", "--coverage", "-o", br.binary.string()});
  ProcessOptions po;
  po.cwd = root_rec.directory;
  po.env["LC_ALL"] = "C";
  auto r = run_process(argv, po);
  br.log += "$ " + join_command(argv) + "\n" + r.output;
  br.ok = r.ok();
  write_file(dir / "build.log", br.log);
  br.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return br;
}

// ---------------------------------------------------------------------------
// Running

RunArtifacts run_fuzz(const fs::path& binary, double budget, std::uint64_t seed, const FuzzOptions& options,
                      const std::vector<fs::path>& seed_corpus) {
  RunArtifacts ra;
  ra.binary = binary;
  ra.workdir = binary.parent_path();
  ra.corpus_dir = ra.workdir / "corpus";
  ra.crashes_dir = ra.workdir / "crashes";
  ra.budget = budget;
  ra.seed = seed;
  // Seeds are read before the corpus is reset: they may come from it.
  std::vector<std::pair<std::string, std::string>> seeds;
  for (const auto& p : seed_corpus) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file()) seeds.emplace_back(e.path().filename().string(), read_file(e.path()));
      }
    } else if (fs::is_regular_file(p)) {
      seeds.emplace_back(p.filename().string(), read_file(p));
    }
  }
  fs::remove_all(ra.crashes_dir);
  fs::remove_all(ra.corpus_dir);
  fs::create_directories(ra.crashes_dir);
  fs::create_directories(ra.corpus_dir);
  for (const auto& [name, bytes] : seeds) write_file(ra.corpus_dir / name, bytes);
  if (fs::exists(ra.workdir / "obj")) {
    for (const auto& e : fs::recursive_directory_iterator(ra.workdir / "obj")) {
      if (e.path().extension() == ".gcda") fs::remove(e.path());
    }
  }
  if (budget <= 0) {
    ra.event = EngineEvent::not_run;
    return ra;
  }
  if (!fs::exists(binary)) {
    ra.event = EngineEvent::start_failure;
    ra.log = "fuzzer binary missing: " + binary.string();
    return ra;
  }
  int secs = std::max(1, static_cast<int>(budget));
  std::vector<std::string> argv{binary.string(),
                                "-max_total_time=" + std::to_string(secs),
                                "-seed=" + std::to_string(seed),
                                "-rss_limit_mb=" + std::to_string(options.rss_limit_mb),
                                "-malloc_limit_mb=" + std::to_string(options.rss_limit_mb),
                                "-timeout=" + std::to_string(options.per_input_timeout),
                                "-detect_leaks=0",
                                "-artifact_prefix=" + (ra.crashes_dir.string() + "/"),
                                "-print_final_stats=1",
                                "-close_fd_mask=1",
                                ra.corpus_dir.string()};
  ProcessOptions po;
  po.cwd = ra.workdir;
  po.timeout_seconds = budget + options.grace_seconds;
  po.env["ASAN_OPTIONS"] = "symbolize=0:detect_leaks=0:abort_on_error=0";
  auto r = run_process(argv, po);
  ra.wall_time = r.seconds;
  ra.log = r.output;
  write_file(ra.workdir / "fuzz.log", ra.log);

  for (const auto& e : fs::directory_iterator(ra.crashes_dir)) {
    std::string name = e.path().filename().string();
    if (starts_with(name, "crash-")) ra.crash_inputs.push_back(e.path());
    else ra.other_inputs.push_back(e.path());
  }
  std::sort(ra.crash_inputs.begin(), ra.crash_inputs.end());
  std::sort(ra.other_inputs.begin(), ra.other_inputs.end());

  static const std::regex kExec(R"(stat::number_of_executed_units:\s*(\d+))");
  static const std::regex kStatus(R"(^#(\d+)\s)");
  std::smatch m;
  std::uint64_t execs = 0;
  for (const auto& line : split_lines(ra.log)) {
    if (std::regex_search(line, m, kExec)) execs = std::max<std::uint64_t>(execs, std::stoull(m[1].str()));
    else if (std::regex_search(line, m, kStatus)) execs = std::max<std::uint64_t>(execs, std::stoull(m[1].str()));
  }
  ra.executions = execs;

  if (r.spawn_failed) {
    ra.event = EngineEvent::start_failure;
  } else if (r.timed_out) {
    ra.event = EngineEvent::killed;
  } else if (!ra.crash_inputs.empty()) {
    ra.event = EngineEvent::crash;
  } else if (ra.log.find("ERROR: libFuzzer: out-of-memory") != std::string::npos) {
    ra.event = EngineEvent::oom;
  } else if (ra.log.find("ERROR: libFuzzer: timeout") != std::string::npos) {
    ra.event = EngineEvent::timeout;
  } else if (ra.log.find("ERROR: LeakSanitizer") != std::string::npos) {
    ra.event = EngineEvent::leak;
  } else if (r.exit_code == 0) {
    ra.event = EngineEvent::completed;
  } else if (ra.executions == 0 && ra.log.find("INFO: Seed:") == std::string::npos) {
    ra.event = EngineEvent::start_failure;
  } else {
    ra.event = EngineEvent::completed;
  }
  return ra;
}

// ---------------------------------------------------------------------------
// Crash reports

std::string parse_crash_kind(std::string_view log) {
  static const std::regex kAsan(R"(ERROR: AddressSanitizer: ([A-Za-z][\w-]*))");
  static const std::regex kFuzzer(R"(ERROR: libFuzzer: ([A-Za-z][\w-]*))");
  std::string s(log);
  std::smatch m;
  if (std::regex_search(s, m, kAsan)) {
    std::string kind = m[1].str();
    if (kind == "requested") return "allocation-size-too-big";
    return kind;
  }
  if (std::regex_search(s, m, kFuzzer)) return m[1].str();
  return "unknown";
}

std::vector<RawFrame> parse_raw_frames(std::string_view log) {
  // Only the first stack (the faulting access), stopping at a blank line.
  static const std::regex kFrame(R"(^\s*#(\d+)\s+0x[0-9a-f]+\s+(?:in\s+\S+\s+)?\(([^()+]+)\+0x([0-9a-f]+)\))");
  std::vector<RawFrame> out;
  bool started = false;
  for (const auto& line : split_lines(log)) {
    std::smatch m;
    if (std::regex_search(line, m, kFrame)) {
      int index = std::stoi(m[1].str());
      if (started && index == 0) break;
      started = true;
      out.push_back({index, m[2].str(), std::stoull(m[3].str(), nullptr, 16)});
    } else if (started && trim(line).empty()) {
      break;
    }
  }
  return out;
}

std::vector<SourceLocation> CrashReport::project_frames() const {
  std::vector<SourceLocation> out;
  for (const auto& f : frames) {
    if (f.location && !f.location->external && !f.harness) out.push_back(*f.location);
  }
  return out;
}

bool CrashReport::only_harness_frames() const {
  bool any_harness = false;
  for (const auto& f : frames) {
    if (f.harness) any_harness = true;
    if (f.location && !f.location->external && !f.harness) return false;
  }
  return any_harness;
}

bool attribute_crash(const CrashReport& report, const Warning& w, int k) {
  int seen = 0;
  for (const auto& loc : report.project_frames()) {
    if (seen++ >= k) break;
    if (loc.file == w.file && loc.line == w.line) return true;
  }
  return false;
}

namespace {

CrashReport replay_crash(const fs::path& binary, const fs::path& input, const Slice& slice,
                         const FuzzOptions& options) {
  CrashReport rep;
  rep.witness = input;
  rep.witness_input = read_bytes(input);
  ProcessOptions po;
  po.cwd = binary.parent_path();
  po.timeout_seconds = options.per_input_timeout + options.grace_seconds;
  po.env["ASAN_OPTIONS"] = "symbolize=0:detect_leaks=0";
  auto r = run_process({binary.string(), "-runs=1", input.string()}, po);
  rep.replayed = !r.spawn_failed && !r.ok();
  rep.kind = parse_crash_kind(r.output);
  auto raw = parse_raw_frames(r.output);

  // Batch symbolization of frames that live in the fuzzer binary.
  std::vector<std::string> argv{options.addr2line, "-e", binary.string(), "-f"};
  std::vector<std::size_t> which;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::error_code ec;
    if (!fs::equivalent(raw[i].module, binary, ec)) continue;
    std::uint64_t off = raw[i].offset - (raw[i].index > 0 ? 1 : 0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(off));
    argv.push_back(buf);
    which.push_back(i);
  }
  std::vector<CrashFrame> frames(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "+0x%llx", static_cast<unsigned long long>(raw[i].offset));
    frames[i].raw = raw[i].module + buf;
  }
  if (!which.empty()) {
    auto sym = run_process(argv);
    auto lines = split_lines(sym.output);
    fs::path harness = (binary.parent_path().parent_path() / "harness.c");
    for (std::size_t j = 0; j < which.size() && 2 * j + 1 < lines.size(); ++j) {
      CrashFrame& f = frames[which[j]];
      f.function = lines[2 * j];
      const std::string& where = lines[2 * j + 1];
      f.raw = where;
      auto colon = where.rfind(':');
      if (colon == std::string::npos || where.compare(0, 2, "??") == 0) continue;
      std::string file = where.substr(0, colon);
      std::string ln = where.substr(colon + 1);
      if (auto sp = ln.find(' '); sp != std::string::npos) ln.resize(sp);
      int line = 0;
      try {
        line = std::stoi(ln);
      } catch (const std::exception&) {
        continue;
      }
      std::error_code ec;
      if (fs::equivalent(file, harness, ec)) {
        f.harness = true;
        continue;
      }
      if (auto loc = map_emitted(slice, file, line)) {
        f.location = loc;
      } else if (file_for(slice, file)) {
        f.location = SourceLocation{file, line, true};
      }
    }
  }
  rep.frames = std::move(frames);
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------
// Coverage

std::map<fs::path, std::map<int, std::uint64_t>> read_gcov_counts(const fs::path& object_dir, const std::string& gcov) {
  std::map<fs::path, std::map<int, std::uint64_t>> out;
  if (!fs::exists(object_dir)) return out;
  std::vector<std::string> argv{gcov, "--json-format", "-t"};
  for (const auto& e : fs::directory_iterator(object_dir)) {
    if (e.path().extension() == ".gcda") argv.push_back(e.path().string());
  }
  if (argv.size() == 3) return out;
  ProcessOptions po;
  po.cwd = object_dir;
  auto r = run_process(argv, po);
  // gcov prints one JSON document per input file, not always newline separated.
  std::istringstream docs(r.output.substr(std::min(r.output.find('{'), r.output.size())));
  while (docs >> std::ws && docs.peek() == '{') {
    nlohmann::json j;
    try {
      docs >> j;
    } catch (const nlohmann::json::exception&) {
      break;
    }
    for (const auto& f : j.value("files", nlohmann::json::array())) {
      fs::path file = f.value("file", std::string());
      auto& counts = out[file];
      for (const auto& l : f.value("lines", nlohmann::json::array())) {
        int n = l.value("line_number", 0);
        std::uint64_t c = l.value("count", std::uint64_t{0});
        counts[n] = std::max(counts[n], c);
      }
    }
  }
  return out;
}

FuzzVerdict collect_verdict(const RunArtifacts& run, const Warning& w, const Slice& slice,
                            const FuzzOptions& options) {
  FuzzVerdict v;
  v.warning_id = w.id;
  v.wall_time = run.wall_time;
  v.budget = run.budget;
  v.seed = run.seed;
  v.executions = run.executions;
  v.event = run.event;
  v.coverage_source = "none";
  if (run.event == EngineEvent::not_run || run.event == EngineEvent::start_failure) return v;

  fs::path objdir = run.workdir / "obj";
  auto has_gcda = [&] {
    for (const auto& e : fs::directory_iterator(objdir)) {
      if (e.path().extension() == ".gcda") return true;
    }
    return false;
  };
  if (has_gcda()) {
    v.coverage_source = "run";
  } else if (!fs::is_empty(run.corpus_dir)) {
    // Crashing runs die before the coverage dump: replay the kept corpus.
    ProcessOptions po;
    po.cwd = run.workdir;
    po.timeout_seconds = std::max(30.0, run.budget) + options.grace_seconds;
    po.env["ASAN_OPTIONS"] = "symbolize=0:detect_leaks=0";
    run_process({run.binary.string(), "-runs=0", "-timeout=" + std::to_string(options.per_input_timeout),
                 run.corpus_dir.string()},
                po);
    if (has_gcda()) v.coverage_source = "replay";
  }

  for (const auto& [file, counts] : read_gcov_counts(objdir, options.gcov)) {
    fs::path abs = file.is_absolute() ? file : (run.workdir / "obj" / file);
    const MinimizedFile* mf = file_for(slice, abs);
    for (const auto& [line, count] : counts) {
      std::optional<SourceLocation> loc;
      if (mf && line >= 1 && line <= static_cast<int>(mf->emitted_line_map.size())) loc = mf->emitted_line_map[line - 1];
      if (loc && !loc->external) {
        v.covered_lines[{loc->file, loc->line}] += count;
      } else {
        v.external_hits += count;
      }
    }
  }

  for (const auto& input : run.crash_inputs) {
    v.crashes.push_back(replay_crash(run.binary, input, slice, options));
  }
  for (const auto& c : v.crashes) {
    if (attribute_crash(c, w, options.attribution_frames)) v.crash_at_target = true;
    else if (c.only_harness_frames()) v.harness_suspect = true;
    else v.off_target_crash = true;
  }

  if (auto it = v.covered_lines.find({w.file, w.line}); it != v.covered_lines.end()) v.target_line_hits = it->second;
  if (v.crash_at_target && v.target_line_hits == 0) {
    // The crashing execution itself reached the line.
    v.target_line_hits = v.crashes.size();
    v.covered_lines[{w.file, w.line}] = v.target_line_hits;
  }
  v.executed_target_line = v.target_line_hits > 0;
  return v;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json verdict_to_json(const FuzzVerdict& v) {
  nlohmann::json crashes = nlohmann::json::array();
  for (const auto& c : v.crashes) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : c.frames) {
      nlohmann::json jf{{"function", f.function}, {"raw", f.raw}, {"harness", f.harness}};
      if (f.location) {
        jf["file"] = f.location->file;
        jf["line"] = f.location->line;
        jf["external"] = f.location->external;
      }
      frames.push_back(std::move(jf));
    }
    std::string hex;
    for (auto b : c.witness_input) {
      char buf[3];
      std::snprintf(buf, sizeof buf, "%02x", b);
      hex += buf;
    }
    crashes.push_back({{"kind", c.kind},
                       {"frames", frames},
                       {"witness", c.witness.string()},
                       {"witness_hex", hex},
                       {"replayed", c.replayed}});
  }
  nlohmann::json covered = nlohmann::json::array();
  for (const auto& [k, n] : v.covered_lines) covered.push_back({k.first, k.second, n});
  return {{"warning_id", v.warning_id},
          {"executed", v.executed_target_line},
          {"hits", v.target_line_hits},
          {"crashes", crashes},
          {"crash_at_target", v.crash_at_target},
          {"harness_suspect", v.harness_suspect},
          {"off_target_crash", v.off_target_crash},
          {"wall_time", v.wall_time},
          {"budget", v.budget},
          {"seed", v.seed},
          {"executions", v.executions},
          {"event", to_string(v.event)},
          {"coverage_source", v.coverage_source},
          {"external_hits", v.external_hits},
          {"covered_lines", covered}};
}

FuzzVerdict verdict_from_json(const nlohmann::json& j) {
  static const std::map<std::string, EngineEvent> events = {
      {"not_run", EngineEvent::not_run},   {"completed", EngineEvent::completed},
      {"crash", EngineEvent::crash},       {"oom", EngineEvent::oom},
      {"timeout", EngineEvent::timeout},   {"leak", EngineEvent::leak},
      {"start_failure", EngineEvent::start_failure}, {"killed", EngineEvent::killed}};
  FuzzVerdict v;
  v.warning_id = j.value("warning_id", std::string());
  v.executed_target_line = j.value("executed", false);
  v.target_line_hits = j.value("hits", std::uint64_t{0});
  v.crash_at_target = j.value("crash_at_target", false);
  v.harness_suspect = j.value("harness_suspect", false);
  v.off_target_crash = j.value("off_target_crash", false);
  v.wall_time = j.value("wall_time", 0.0);
  v.budget = j.value("budget", 0.0);
  v.seed = j.value("seed", std::uint64_t{0});
  v.executions = j.value("executions", std::uint64_t{0});
  v.event = events.at(j.value("event", std::string("not_run")));
  v.coverage_source = j.value("coverage_source", std::string("none"));
  v.external_hits = j.value("external_hits", std::uint64_t{0});
  for (const auto& c : j.value("covered_lines", nlohmann::json::array())) {
    v.covered_lines[{c.at(0).get<std::string>(), c.at(1).get<int>()}] = c.at(2).get<std::uint64_t>();
  }
  for (const auto& jc : j.value("crashes", nlohmann::json::array())) {
    CrashReport c;
    c.kind = jc.value("kind", std::string());
    c.witness = jc.value("witness", std::string());
    c.replayed = jc.value("replayed", false);
    std::string hex = jc.value("witness_hex", std::string());
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
      c.witness_input.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
    for (const auto& jf : jc.value("frames", nlohmann::json::array())) {
      CrashFrame f;
      f.function = jf.value("function", std::string());
      f.raw = jf.value("raw", std::string());
      f.harness = jf.value("harness", false);
      if (jf.contains("file")) {
        f.location = SourceLocation{jf.at("file").get<std::string>(), jf.at("line").get<int>(), jf.value("external", false)};
      }
      c.frames.push_back(std::move(f));
    }
    v.crashes.push_back(std::move(c));
  }
  return v;
}

}  // namespace slicefuzz
