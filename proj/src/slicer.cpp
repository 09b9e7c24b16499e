#include "slicefuzz/slicer.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <regex>

#include "slicefuzz/process.hpp"

namespace slicefuzz {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string provenance_comment(const Provenance& p) {
  std::string s = "/* [" + p.reason + " r" + std::to_string(p.round);
  if (!p.demanded_by.empty()) s += ": " + p.demanded_by;
  return s + "] */";
}

struct Emitter {
  std::string text;
  std::vector<std::optional<SourceLocation>> map;

  int next_line() const { return static_cast<int>(map.size()) + 1; }

  void generated(std::string_view line) {
    text.append(line);
    text.push_back('\n');
    map.emplace_back(std::nullopt);
  }

  // Emits `body` whose first line is pp line `first_line` of `unit`.
  void mapped(std::string_view body, const PreprocessedUnit& unit, int first_line) {
    int k = 0;
    std::size_t pos = 0;
    while (true) {
      auto nl = body.find('\n', pos);
      std::string_view line = body.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      text.append(line);
      text.push_back('\n');
      std::optional<SourceLocation> loc;
      try {
        loc = map_line(unit, first_line + k);
      } catch (const std::out_of_range&) {
      }
      map.push_back(loc);
      ++k;
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
  }
};

// Item text with byte ranges replaced by spaces (same length keeps columns).
std::string blank_ranges(std::string_view unit_text, const TopItem& item) {
  std::string out(unit_text.substr(item.begin, item.end - item.begin));
  for (auto [b, e] : item.specifier_ranges) {
    if (b < item.begin || e > item.end) continue;
    std::fill(out.begin() + static_cast<long>(b - item.begin), out.begin() + static_cast<long>(e - item.begin), ' ');
  }
  return out;
}

}  // namespace

std::string prototype_text(const FileIndex& fi, const TopItem& item) {
  TopItem head = item;
  head.end = item.body_begin;
  return normalize_whitespace(blank_ranges(fi.unit->text, head)) + ";";
}

std::string exported_root_name(const std::string& name) { return name == "main" ? "slicefuzz_root_main" : name; }

std::set<std::string> MinimizedFile::defined_functions() const {
  std::set<std::string> out;
  for (const auto& r : retained) {
    if (r.kind == ItemKind::function_def && !r.external) out.insert(r.symbols.begin(), r.symbols.end());
  }
  return out;
}

std::set<std::string> MinimizedFile::declared_names() const {
  std::set<std::string> out;
  for (const auto& r : retained) {
    if (r.kind == ItemKind::declaration || !r.item) out.insert(r.symbols.begin(), r.symbols.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// minimize_file

MinimizedFile minimize_file(const RepoIndex& idx, std::size_t unit, const std::set<std::string>& roots) {
  UnitPlan plan;
  for (const auto& r : roots) plan.roots.emplace(r, Provenance{"root", 1, ""});
  return minimize_file(idx, unit, plan);
}

MinimizedFile minimize_file(const RepoIndex& idx, std::size_t unit, const UnitPlan& plan) {
  const FileIndex& fi = idx.unit(unit);
  std::map<std::string, std::vector<std::size_t>> definers, declarers, mentioners;
  for (std::size_t i = 0; i < fi.items.size(); ++i) {
    const TopItem& item = fi.items[i];
    if (item.external) continue;
    for (const auto& d : item.defines) definers[d].push_back(i);
    for (const auto& d : item.declares) declarers[d].push_back(i);
    if (item.kind == ItemKind::raw_block) {
      for (const auto& r : item.refs) mentioners[r].push_back(i);
    }
  }

  std::map<std::size_t, Provenance> kept;
  std::deque<std::size_t> work;
  auto keep = [&](std::size_t i, const Provenance& p) {
    if (kept.emplace(i, p).second) work.push_back(i);
  };
  auto need = [&](const std::string& name, const Provenance& via) {
    if (auto it = mentioners.find(name); it != mentioners.end()) {
      for (std::size_t i : it->second) keep(i, {"reference", via.round, ""});
    }
    if (auto it = definers.find(name); it != definers.end()) {
      for (std::size_t i : it->second) keep(i, via);
      if (auto d = declarers.find(name); d != declarers.end()) {
        for (std::size_t i : d->second) keep(i, {"declaration", via.round, ""});
      }
      return;
    }
    auto d = declarers.find(name);
    if (d == declarers.end()) return;
    if (!idx.has_definition(name)) {
      for (std::size_t i : d->second) keep(i, {"declaration", via.round, ""});
    } else if (auto dd = plan.demanded_decls.find(name); dd != plan.demanded_decls.end()) {
      for (std::size_t i : d->second) keep(i, dd->second);
    }
  };

  for (const auto& [name, prov] : plan.roots) {
    if (!definers.count(name)) {
      throw Error("minimize_file: root '" + name + "' is not defined in " + fi.unit->source_file);
    }
    need(name, prov);
  }
  for (const auto& [item, prov] : plan.demanded_items) keep(item, prov);
  for (const auto& [name, prov] : plan.demanded_decls) {
    if (auto d = declarers.find(name); d != declarers.end()) {
      for (std::size_t i : d->second) keep(i, prov);
    }
  }
  while (!work.empty()) {
    std::size_t i = work.front();
    work.pop_front();
    Provenance parent = kept.at(i);
    for (const auto& ref : fi.items[i].refs) {
      bool is_fn = false;
      if (auto it = definers.find(ref); it != definers.end()) {
        is_fn = std::any_of(it->second.begin(), it->second.end(),
                            [&](std::size_t k) { return fi.items[k].kind == ItemKind::function_def; });
      }
      need(ref, {is_fn ? "bfs" : "reference", parent.round, ""});
    }
  }

  // Where transplanted and synthesized declarations go: before the first
  // retained project function or variable definition.
  std::optional<std::size_t> insert_at;
  for (const auto& [i, p] : kept) {
    auto k = fi.items[i].kind;
    if (k == ItemKind::function_def || k == ItemKind::global_var) {
      insert_at = i;
      break;
    }
  }

  MinimizedFile mf;
  mf.origin_unit = unit;
  Emitter em;
  em.generated("/* slicefuzz: minimized from " + fi.unit->source_file + " */");

  auto emit_inserts = [&] {
    for (const auto& t : plan.transplants) {
      const FileIndex& src = idx.unit(t.unit);
      const TopItem& item = src.items.at(t.item);
      RetainedSpan span;
      span.source_unit = t.unit;
      span.item = t.item;
      span.kind = item.kind;
      span.symbols = item.defines;
      span.provenance = t.provenance;
      em.generated(provenance_comment(t.provenance));
      span.emitted_start = em.next_line();
      em.mapped(src.item_text(item), *src.unit, item.start_line);
      span.emitted_end = em.next_line() - 1;
      mf.retained.push_back(std::move(span));
    }
    for (const auto& s : plan.synthesized) {
      RetainedSpan span;
      span.source_unit = unit;
      span.kind = ItemKind::declaration;
      span.symbols = {s.symbol};
      span.provenance = s.provenance;
      em.generated(provenance_comment(s.provenance));
      span.emitted_start = em.next_line();
      em.generated(s.text);
      span.emitted_end = span.emitted_start;
      mf.retained.push_back(std::move(span));
    }
  };

  for (std::size_t i = 0; i < fi.items.size(); ++i) {
    const TopItem& item = fi.items[i];
    if (insert_at && *insert_at == i) emit_inserts();
    if (item.external) {
      RetainedSpan span;
      span.source_unit = unit;
      span.item = i;
      span.kind = item.kind;
      span.symbols = item.kind == ItemKind::declaration ? item.declares : item.defines;
      span.external = true;
      span.provenance = {"external", 1, ""};
      // One comment per run of system-header items.
      if (i == 0 || !fi.items[i - 1].external) em.generated(provenance_comment(span.provenance));
      span.emitted_start = em.next_line();
      em.mapped(fi.item_text(item), *fi.unit, item.start_line);
      span.emitted_end = em.next_line() - 1;
      mf.retained.push_back(std::move(span));
      continue;
    }
    Provenance prov;
    if (auto it = kept.find(i); it != kept.end()) {
      prov = it->second;
    } else if (item.kind == ItemKind::macro_residue) {
      prov = {"pragma", 1, ""};
    } else {
      continue;
    }
    RetainedSpan span;
    span.source_unit = unit;
    span.item = i;
    span.kind = item.kind;
    span.symbols = item.kind == ItemKind::declaration ? item.declares : item.defines;
    span.provenance = prov;
    em.generated(provenance_comment(prov));
    span.emitted_start = em.next_line();
    bool is_root = plan.exported_root && item.kind == ItemKind::function_def &&
                   std::find(item.defines.begin(), item.defines.end(), *plan.exported_root) != item.defines.end();
    if (is_root) {
      std::string body = blank_ranges(fi.unit->text, item);
      std::string exported = exported_root_name(*plan.exported_root);
      if (exported != *plan.exported_root && item.name_offset >= item.begin) {
        body.replace(item.name_offset - item.begin, plan.exported_root->size(), exported);
      }
      em.mapped(body, *fi.unit, item.start_line);
    } else {
      em.mapped(fi.item_text(item), *fi.unit, item.start_line);
    }
    span.emitted_end = em.next_line() - 1;
    mf.retained.push_back(std::move(span));
  }
  if (!insert_at) emit_inserts();

  mf.text = std::move(em.text);
  mf.emitted_line_map = std::move(em.map);
  return mf;
}

// ---------------------------------------------------------------------------
// Compilation

CompileResult attempt_compile(const std::vector<MinimizedFile>& files, const RepoIndex& idx,
                              const CompilationDatabase& db, const fs::path& objects_dir, CompileCache* cache) {
  if (files.empty()) throw Error("attempt_compile: empty file list");
  auto t0 = Clock::now();
  CompileResult result;
  fs::create_directories(objects_dir);
  bool failed = false;
  bool defines_main = false;

  for (const auto& f : files) {
    const auto& rec = idx.unit(f.origin_unit).unit->origin;
    if (rec.args.empty()) throw Error("attempt_compile: unit " + std::to_string(f.origin_unit) + " has no compile record");
    // A renamed root main no longer defines main.
    if (f.defined_functions().count("main") && f.text.find(exported_root_name("main") + "(") == std::string::npos)
      defines_main = true;
    fs::path obj = objects_dir / ("u" + std::to_string(f.origin_unit) + "_" + rec.source.stem().string() + ".o");
    std::vector<std::string> argv{rec.args[0]};
    auto flags = essential_flags(rec, true);
    argv.insert(argv.end(), flags.begin(), flags.end());
    argv.insert(argv.end(), {"-Werror=implicit-function-declaration", "-c", f.emitted_path.string(), "-o", obj.string()});
    std::string stamp = fnv1a_hex(f.text + "\x1f" + join_command(argv));
    if (cache) {
      auto it = cache->stamps.find(obj);
      if (it != cache->stamps.end() && it->second == stamp && fs::exists(obj)) {
        result.objects.push_back(obj);
        continue;
      }
      cache->stamps.erase(obj);
    }
    ProcessOptions opts;
    opts.cwd = rec.directory;
    opts.env["LC_ALL"] = "C";
    auto r = run_process(argv, opts);
    if (r.spawn_failed) {
      result.toolchain_failure = true;
      result.log += "cannot run compiler '" + rec.args[0] + "': " + r.output;
      result.seconds = seconds_since(t0);
      return result;
    }
    result.log += r.output;
    if (!r.ok()) {
      failed = true;
      continue;
    }
    if (cache) cache->stamps[obj] = stamp;
    result.objects.push_back(obj);
  }
  if (failed) {
    result.seconds = seconds_since(t0);
    return result;
  }

  // Link probe: surfaces undefined references and duplicate definitions.
  const auto& root_rec = idx.unit(files.front().origin_unit).unit->origin;
  std::vector<std::string> link_argv;
  fs::path link_dir = objects_dir;
  if (auto it = db.links.find(root_rec.link_group); it != db.links.end() && !it->second.args.empty()) {
    link_argv.push_back(it->second.args[0]);
    if (!it->second.directory.empty()) link_dir = it->second.directory;
  } else {
    link_argv.push_back(root_rec.args[0]);
  }
  for (const auto& o : result.objects) link_argv.push_back(o.string());
  if (!defines_main) {
    fs::path stub = objects_dir / "stub_main.c";
    if (!fs::exists(stub)) write_file(stub, "int main(void) { return 0; }\n");
    link_argv.push_back(stub.string());
  }
  if (auto it = db.links.find(root_rec.link_group); it != db.links.end()) {
    auto opts = link_options(it->second);
    link_argv.insert(link_argv.end(), opts.begin(), opts.end());
  }
  link_argv.insert(link_argv.end(), {"-o", (objects_dir / "link_probe").string()});
  ProcessOptions opts;
  opts.cwd = link_dir;
  opts.env["LC_ALL"] = "C";
  auto r = run_process(link_argv, opts);
  result.seconds = seconds_since(t0);
  if (r.spawn_failed) {
    result.toolchain_failure = true;
    result.log += "cannot run linker driver '" + link_argv[0] + "'";
    return result;
  }
  if (!r.ok()) {
    result.link_phase = true;
    result.log += r.output;
    return result;
  }
  result.ok = true;
  return result;
}

// ---------------------------------------------------------------------------
// Diagnostics

std::vector<MissingRef> extract_missing_refs_sited(std::string_view log) {
  static const std::vector<std::regex> kErrorPatterns = {
      std::regex(R"(implicit declaration of function '([A-Za-z_]\w*)')"),
      std::regex(R"(call to undeclared function '([A-Za-z_]\w*)')"),
      std::regex(R"(use of undeclared identifier '([A-Za-z_]\w*)')"),
      std::regex(R"('([A-Za-z_]\w*)' undeclared)"),
      std::regex(R"(unknown type name '([A-Za-z_]\w*)')"),
      std::regex(R"(incomplete (?:definition of )?type '((?:struct|union|enum) [A-Za-z_]\w*)')"),
      std::regex(R"(undefined type '((?:struct|union|enum) [A-Za-z_]\w*)')"),
  };
  static const std::vector<std::regex> kLinkPatterns = {
      std::regex(R"(undefined reference to [`']([A-Za-z_][\w.$]*)')"),
      std::regex(R"(undefined symbol: ([A-Za-z_][\w.$]*))"),
  };
  static const std::regex kCompileSite(R"(^(.+?):\d+:\d+: )");
  static const std::regex kLdObject(R"(ld: (\S+\.o): in function)");
  static const std::regex kLldRef(R"(>>> referenced by .*\((\S+\.o):)");

  std::vector<MissingRef> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string current_object;
  auto add = [&](std::string name, std::string file) {
    if (seen.insert({name, file}).second) out.push_back({std::move(name), std::move(file)});
  };
  for (const auto& raw_line : split_lines(log)) {
    std::string line = raw_line;
    std::smatch m;
    if (std::regex_search(line, m, kLdObject)) current_object = m[1].str();
    bool is_error = line.find("error:") != std::string::npos;
    if (is_error) {
      for (const auto& re : kErrorPatterns) {
        if (std::regex_search(line, m, re)) {
          std::string name = m[1].str();
          std::smatch site;
          std::string file = std::regex_search(line, site, kCompileSite) ? site[1].str() : std::string();
          add(name, file);
          break;
        }
      }
    }
    for (const auto& re : kLinkPatterns) {
      if (std::regex_search(line, m, re)) {
        add(m[1].str(), current_object);
        break;
      }
    }
    if (std::regex_search(line, m, kLldRef) && !out.empty() && out.back().file.empty()) {
      // lld names the referencing object on the line after the symbol.
      auto name = out.back().name;
      seen.erase({name, ""});
      out.back().file = m[1].str();
      seen.insert({name, out.back().file});
    }
  }
  return out;
}

std::vector<std::string> extract_missing_refs(std::string_view log) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& r : extract_missing_refs_sited(log)) {
    if (seen.insert(r.name).second) out.push_back(r.name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// build_slice

namespace {

std::optional<std::size_t> unit_from_path(const std::string& path) {
  static const std::regex kUnit(R"((?:^|/)u(\d+)[/_])");
  std::smatch m;
  std::string p = path;
  std::optional<std::size_t> found;
  for (auto it = std::sregex_iterator(p.begin(), p.end(), kUnit); it != std::sregex_iterator(); ++it) {
    found = static_cast<std::size_t>(std::stoul((*it)[1].str()));
  }
  return found;
}

}  // namespace

Slice build_slice(const Warning& w, const FunctionRef& root, const RepoIndex& idx, const CompilationDatabase& db,
                  const fs::path& workdir, const SliceCaps& caps) {
  auto t0 = Clock::now();
  Slice s;
  s.warning = w;
  s.root = root;
  s.workdir = workdir;
  const FunctionDecl& fn = idx.function(root);
  s.root_name = fn.name;
  s.root_symbol = exported_root_name(fn.name);
  const auto& root_unit = *idx.unit(root.unit).unit;
  s.compiler = root_unit.origin.args.empty() ? "cc" : root_unit.origin.args[0];
  if (auto it = db.links.find(root_unit.origin.link_group); it != db.links.end()) {
    s.link_args = link_options(it->second);
  }

  {
    std::set<std::pair<std::string, int>> lines;
    std::set<std::pair<std::string, std::string>> functions;
    for (const auto& fi : idx.units()) {
      for (const auto& loc : fi.unit->line_map) {
        if (!loc.external) lines.emplace(loc.file, loc.line);
      }
      for (const auto& f : fi.functions) {
        if (f.is_definition) {
          auto loc = map_line(*fi.unit, f.start_line);
          functions.emplace(loc.file, f.name);
        }
      }
    }
    s.project_loc = lines.size();
    s.project_functions = functions.size();
  }

  fs::remove_all(workdir / "files");
  fs::remove_all(workdir / "objects");
  fs::remove_all(workdir / "logs");
  fs::create_directories(workdir / "files");
  fs::create_directories(workdir / "logs");

  std::map<std::size_t, UnitPlan> plans;
  plans[root.unit].roots.emplace(fn.name, Provenance{"root", 1, ""});
  plans[root.unit].exported_root = fn.name;
  CompileCache cache;
  std::set<std::string> unresolved;

  for (int round = 1;; ++round) {
    if (round > caps.max_rounds) {
      s.reason = "cap";
      break;
    }
    std::vector<std::size_t> order{root.unit};
    for (const auto& [u, _] : plans) {
      if (u != root.unit) order.push_back(u);
    }
    std::vector<MinimizedFile> files;
    std::size_t definitions = 0;
    RoundRecord rec;
    rec.round = round;
    for (std::size_t u : order) {
      MinimizedFile mf = minimize_file(idx, u, plans.at(u));
      const auto& unit = *idx.unit(u).unit;
      mf.emitted_path = workdir / "files" / ("u" + std::to_string(u)) / unit.origin.source.filename();
      write_file(mf.emitted_path, mf.text);
      for (const auto& span : mf.retained) {
        if (span.external) continue;
        if (span.kind != ItemKind::declaration) ++definitions;
        for (const auto& sym : span.symbols) rec.retained_symbols.push_back(std::to_string(u) + ":" + sym);
      }
      files.push_back(std::move(mf));
    }
    std::sort(rec.retained_symbols.begin(), rec.retained_symbols.end());
    rec.retained_symbols.erase(std::unique(rec.retained_symbols.begin(), rec.retained_symbols.end()),
                               rec.retained_symbols.end());
    s.files = files;
    if (definitions > caps.max_definitions) {
      s.reason = "cap";
      s.history.push_back(std::move(rec));
      break;
    }

    auto cr = attempt_compile(files, idx, db, workdir / "objects", &cache);
    s.compile_seconds += cr.seconds;
    s.rounds = round;
    s.last_log = cr.log;
    write_file(workdir / "logs" / ("round" + std::to_string(round) + ".log"), cr.log);
    if (cr.toolchain_failure) {
      s.reason = "toolchain: " + std::string(trim(cr.log)).substr(0, 200);
      s.history.push_back(std::move(rec));
      break;
    }
    if (cr.ok) {
      s.compiled = true;
      s.objects = cr.objects;
      rec.compiled = true;
      s.history.push_back(std::move(rec));
      break;
    }

    auto refs = extract_missing_refs_sited(cr.log);
    for (const auto& r : refs) rec.missing_refs.push_back(r.name);
    s.history.push_back(rec);
    if (refs.empty()) {
      s.reason = cr.link_phase ? "link" : "unrecognized compile failure";
      break;
    }

    bool progress = false;
    Provenance demanded{"diagnostic", round + 1, ""};
    for (const auto& ref : refs) {
      std::size_t U = root.unit;
      if (auto u = unit_from_path(ref.file); u && plans.count(*u)) U = *u;
      demanded.demanded_by = ref.name;
      auto sites = locate_symbol(idx, ref.name, U);
      if (sites.empty()) {
        unresolved.insert(ref.name);
        continue;
      }
      const DefinitionSite& site = sites.front();
      UnitPlan& here = plans[U];
      const FileIndex& ufi = idx.unit(U);
      bool has_declarer = std::any_of(ufi.items.begin(), ufi.items.end(), [&](const TopItem& it) {
        return !it.external && std::find(it.declares.begin(), it.declares.end(), ref.name) != it.declares.end();
      });
      auto declare_here = [&](const FileIndex& def_fi, const TopItem& def_item) {
        if (has_declarer) return here.demanded_decls.emplace(ref.name, demanded).second;
        bool exists = std::any_of(here.synthesized.begin(), here.synthesized.end(),
                                  [&](const UnitPlan::Synthesized& x) { return x.symbol == ref.name; });
        if (exists) return false;
        std::string text;
        if (def_item.kind == ItemKind::function_def) {
          text = prototype_text(def_fi, def_item);
        } else if (auto it = def_item.extern_decl.find(ref.name); it != def_item.extern_decl.end()) {
          text = it->second;
        } else {
          return false;
        }
        here.synthesized.push_back({ref.name, text, {"synthesized", round + 1, ref.name}});
        return true;
      };

      if (site.unit == U) {
        bool retained = false;
        for (const auto& f : files) {
          if (f.origin_unit != U) continue;
          for (const auto& span : f.retained) {
            if (span.source_unit == U && span.item == site.item) retained = true;
          }
        }
        if (!retained) {
          progress |= here.demanded_items.emplace(site.item, demanded).second;
        } else if (site.kind != SiteKind::type) {
          progress |= declare_here(ufi, ufi.items.at(site.item));
        }
      } else if (site.kind == SiteKind::type) {
        bool exists = std::any_of(here.transplants.begin(), here.transplants.end(), [&](const UnitPlan::Transplant& t) {
          return t.unit == site.unit && t.item == site.item;
        });
        if (!exists) {
          here.transplants.insert(here.transplants.begin(), {site.unit, site.item, {"transplant", round + 1, ref.name}});
          progress = true;
        }
      } else {
        progress |= plans[site.unit].roots.emplace(ref.name, demanded).second;
        const FileIndex& vfi = idx.unit(site.unit);
        progress |= declare_here(vfi, vfi.items.at(site.item));
      }
    }
    if (!progress) {
      s.reason = unresolved.empty() ? "stalled" : "unresolved";
      break;
    }
  }
  s.unresolved.assign(unresolved.begin(), unresolved.end());

  std::set<std::string> globals;
  std::set<std::pair<std::string, int>> lines;
  for (const auto& f : s.files) {
    for (const auto& span : f.retained) {
      if (span.kind != ItemKind::global_var || !span.item) continue;
      const TopItem& item = idx.unit(span.source_unit).items.at(*span.item);
      if (!item.non_const_global) continue;
      for (const auto& [name, _] : item.extern_decl) globals.insert(name);
    }
    for (const auto& loc : f.emitted_line_map) {
      if (loc && !loc->external) lines.emplace(loc->file, loc->line);
    }
  }
  s.reads_globals.assign(globals.begin(), globals.end());
  s.retained_loc = lines.size();
  s.build_seconds = seconds_since(t0);
  save_slice(s);
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json slice_to_json(const Slice& s) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : s.files) {
    nlohmann::json retained = nlohmann::json::array();
    for (const auto& r : f.retained) {
      nlohmann::json j{{"source_unit", r.source_unit},
                       {"kind", to_string(r.kind)},
                       {"symbols", r.symbols},
                       {"provenance", r.provenance.reason},
                       {"round", r.provenance.round},
                       {"emitted_start", r.emitted_start},
                       {"emitted_end", r.emitted_end}};
      if (r.item) j["item"] = *r.item;
      if (r.external) j["external"] = true;
      if (!r.provenance.demanded_by.empty()) j["demanded_by"] = r.provenance.demanded_by;
      retained.push_back(std::move(j));
    }
    nlohmann::json line_map = nlohmann::json::array();
    for (std::size_t i = 0; i < f.emitted_line_map.size(); ++i) {
      const auto& loc = f.emitted_line_map[i];
      if (loc && !loc->external) line_map.push_back({i + 1, loc->file, loc->line});
    }
    files.push_back({{"unit", f.origin_unit},
                     {"emitted", relative_to(f.emitted_path, s.workdir)},
                     {"lines", f.emitted_line_map.size()},
                     {"retained", retained},
                     {"line_map", line_map}});
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : s.history) {
    history.push_back({{"round", h.round},
                       {"retained_symbols", h.retained_symbols},
                       {"missing_refs", h.missing_refs},
                       {"compiled", h.compiled}});
  }
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : s.objects) objects.push_back(relative_to(o, s.workdir));
  return {{"warning", s.warning},
          {"root", {{"unit", s.root.unit}, {"function", s.root.function}, {"name", s.root_name}, {"symbol", s.root_symbol}}},
          {"status", s.status()},
          {"reason", s.reason},
          {"rounds", s.rounds},
          {"unresolved", s.unresolved},
          {"reads_globals", s.reads_globals},
          {"files", files},
          {"objects", objects},
          {"link_args", s.link_args},
          {"compiler", s.compiler},
          {"retained_loc", s.retained_loc},
          {"project_loc", s.project_loc},
          {"project_functions", s.project_functions},
          {"build_seconds", s.build_seconds},
          {"compile_seconds", s.compile_seconds},
          {"history", history}};
}

Slice slice_from_json(const nlohmann::json& j) {
  Slice s;
  s.warning = j.at("warning").get<Warning>();
  const auto& root = j.at("root");
  s.root.unit = root.at("unit").get<std::size_t>();
  s.root.function = root.at("function").get<std::size_t>();
  s.root_name = root.at("name").get<std::string>();
  s.root_symbol = root.at("symbol").get<std::string>();
  s.compiled = j.at("status").get<std::string>() == "compiled";
  s.reason = j.value("reason", std::string());
  s.rounds = j.value("rounds", 0);
  s.unresolved = j.value("unresolved", std::vector<std::string>{});
  s.reads_globals = j.value("reads_globals", std::vector<std::string>{});
  s.link_args = j.value("link_args", std::vector<std::string>{});
  s.compiler = j.value("compiler", std::string());
  s.retained_loc = j.value("retained_loc", std::size_t{0});
  s.project_loc = j.value("project_loc", std::size_t{0});
  s.project_functions = j.value("project_functions", std::size_t{0});
  s.build_seconds = j.value("build_seconds", 0.0);
  s.compile_seconds = j.value("compile_seconds", 0.0);
  for (const auto& f : j.at("files")) {
    MinimizedFile mf;
    mf.origin_unit = f.at("unit").get<std::size_t>();
    mf.emitted_path = f.at("emitted").get<std::string>();
    mf.emitted_line_map.assign(f.at("lines").get<std::size_t>(), std::nullopt);
    for (const auto& e : f.at("line_map")) {
      auto line = e.at(0).get<std::size_t>();
      if (line >= 1 && line <= mf.emitted_line_map.size()) {
        mf.emitted_line_map[line - 1] = SourceLocation{e.at(1).get<std::string>(), e.at(2).get<int>(), false};
      }
    }
    for (const auto& r : f.at("retained")) {
      RetainedSpan span;
      span.source_unit = r.at("source_unit").get<std::size_t>();
      if (r.contains("item")) span.item = r.at("item").get<std::size_t>();
      static const std::map<std::string, ItemKind> kinds = {
          {"function_def", ItemKind::function_def}, {"declaration", ItemKind::declaration},
          {"type_def", ItemKind::type_def},         {"global_var", ItemKind::global_var},
          {"raw_block", ItemKind::raw_block},       {"macro_residue", ItemKind::macro_residue}};
      span.kind = kinds.at(r.at("kind").get<std::string>());
      span.symbols = r.at("symbols").get<std::vector<std::string>>();
      span.provenance = {r.at("provenance").get<std::string>(), r.at("round").get<int>(), r.value("demanded_by", "")};
      span.emitted_start = r.at("emitted_start").get<int>();
      span.emitted_end = r.at("emitted_end").get<int>();
      span.external = r.value("external", false);
      mf.retained.push_back(std::move(span));
    }
    s.files.push_back(std::move(mf));
  }
  for (const auto& o : j.value("objects", nlohmann::json::array())) s.objects.push_back(o.get<std::string>());
  for (const auto& h : j.value("history", nlohmann::json::array())) {
    RoundRecord r;
    r.round = h.at("round").get<int>();
    r.retained_symbols = h.at("retained_symbols").get<std::vector<std::string>>();
    r.missing_refs = h.at("missing_refs").get<std::vector<std::string>>();
    r.compiled = h.at("compiled").get<bool>();
    s.history.push_back(std::move(r));
  }
  return s;
}

void save_slice(const Slice& s) { write_file(s.workdir / "slice.json", slice_to_json(s).dump(2) + "\n"); }

Slice load_slice(const fs::path& workdir) {
  fs::path p = workdir / "slice.json";
  if (!fs::exists(p)) throw Error("no slice at " + p.string());
  Slice s = slice_from_json(nlohmann::json::parse(read_file(p)));
  s.workdir = workdir;
  for (auto& f : s.files) {
    f.emitted_path = workdir / f.emitted_path;
    if (fs::exists(f.emitted_path)) f.text = read_file(f.emitted_path);
  }
  for (auto& o : s.objects) o = workdir / o;
  return s;
}

}  // namespace slicefuzz
