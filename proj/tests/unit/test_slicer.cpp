#include <doctest.h>

#include <set>

#include "slicefuzz/slicer.hpp"
#include "support.hpp"

using namespace slicefuzz;
using sftest::TempDir;

namespace {

const sftest::SlicedFixture& sliced(const std::string& role_or_fn) {
  for (const auto& s : sftest::corpus_slices()) {
    if (s.fixture.role == role_or_fn || s.fixture.function == role_or_fn) return s;
  }
  throw Error("no fixture " + role_or_fn);
}

std::size_t unit_of(const RepoIndex& idx, const std::string& file) {
  for (std::size_t u = 0; u < idx.units().size(); ++u) {
    if (idx.unit(u).unit->source_file == file) return u;
  }
  throw Error("no unit " + file);
}

RepoIndex single_unit_index(const std::string& text) {
  std::vector<FileIndex> units{index_unit(make_identity_unit(text, "one.c"))};
  return RepoIndex(std::move(units), "/nonexistent");
}

const FunctionDecl* definition(const RepoIndex& idx, std::size_t unit, const std::string& name) {
  return idx.unit(unit).find_definition(name);
}

}  // namespace

TEST_CASE("minimizing driver.c around glue_strings keeps only glue_strings") {
  const auto& c = sftest::corpus();
  auto mf = minimize_file(c.idx, unit_of(c.idx, "src/driver.c"), std::set<std::string>{"glue_strings"});
  CHECK(mf.defined_functions() == std::set<std::string>{"glue_strings"});
  for (const auto& r : mf.retained) {
    if (r.kind == ItemKind::function_def) CHECK(r.provenance.reason == "root");
  }
}

TEST_CASE("all functions as roots retain the whole unit") {
  const auto& c = sftest::corpus();
  std::size_t u = unit_of(c.idx, "src/driver.c");
  std::set<std::string> all;
  for (const auto& f : c.idx.unit(u).functions) {
    if (f.is_definition) all.insert(f.name);
  }
  auto mf = minimize_file(c.idx, u, all);
  CHECK(mf.defined_functions() == all);
  std::set<std::size_t> kept;
  for (const auto& r : mf.retained) {
    if (r.item) kept.insert(*r.item);
  }
  const auto& items = c.idx.unit(u).items;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (kept.count(i)) continue;
    // Only prototypes of functions defined in other units wait for a
    // diagnostic before they are emitted.
    CHECK_MESSAGE(items[i].kind == ItemKind::declaration, "item " << i << " dropped");
    for (const auto& name : items[i].declares) {
      CHECK(c.idx.has_definition(name));
      CHECK_FALSE(c.idx.unit(u).find_definition(name));
    }
  }
}

TEST_CASE("call chains inside one unit are closed over") {
  auto idx = single_unit_index(
      "static int c(int x) { return x; }\n"
      "static int b(int x) { return c(x) + 1; }\n"
      "int a(int x) { return b(x) * 2; }\n"
      "int unrelated(void) { return 0; }\n");
  auto mf = minimize_file(idx, 0, std::set<std::string>{"a"});
  CHECK(mf.defined_functions() == std::set<std::string>{"a", "b", "c"});
  CHECK_THROWS_AS(minimize_file(idx, 0, std::set<std::string>{"missing"}), Error);
}

TEST_CASE("the minimized driver.c alone fails on OPENSSL_malloc") {
  const auto& c = sftest::corpus();
  TempDir dir("compile");
  auto mf = minimize_file(c.idx, unit_of(c.idx, "src/driver.c"), std::set<std::string>{"glue_strings"});
  mf.emitted_path = dir / "driver.c";
  write_file(mf.emitted_path, mf.text);
  auto r = attempt_compile({mf}, c.idx, c.db, dir / "obj");
  CHECK_FALSE(r.ok);
  CHECK(r.log.find("OPENSSL_malloc") != std::string::npos);
  CHECK(extract_missing_refs(r.log) == std::vector<std::string>{"OPENSSL_malloc"});
}

TEST_CASE("a self-contained function compiles; no files is an error") {
  const auto& c = sftest::corpus();
  TempDir dir("compile");
  auto mf = minimize_file(c.idx, unit_of(c.idx, "juliet/cwe121_01_memcpy.c"), std::set<std::string>{"cwe121_01_bad"});
  mf.emitted_path = dir / "f.c";
  write_file(mf.emitted_path, mf.text);
  auto r = attempt_compile({mf}, c.idx, c.db, dir / "obj");
  CHECK_MESSAGE(r.ok, r.log);
  CHECK(r.objects.size() == 1);
  CHECK_THROWS_AS(attempt_compile({}, c.idx, c.db, dir / "obj"), Error);
}

TEST_CASE("missing reference extraction") {
  std::string listing =
      "driver.c:12:19: error: implicit declaration of function 'OPENSSL_malloc' is invalid\n"
      "  if (!(ret = p = OPENSSL_malloc(len + 1)))\n";
  CHECK(extract_missing_refs(listing) == std::vector<std::string>{"OPENSSL_malloc"});
  CHECK(extract_missing_refs("a.c:3:5: warning: unused variable 'x' [-Wunused-variable]\n").empty());
  CHECK(extract_missing_refs("").empty());
  std::string mixed =
      "a.c:1:1: error: use of undeclared identifier 'g_slack'\n"
      "a.c:2:1: error: unknown type name 'EVP_CTX'\n"
      "a.c:3:1: error: use of undeclared identifier 'g_slack'\n"
      "/usr/bin/ld: a.o: in function `f':\na.c:(.text+0x1): undefined reference to `helper'\n";
  CHECK(extract_missing_refs(mixed) == std::vector<std::string>{"g_slack", "EVP_CTX", "helper"});
  auto sited = extract_missing_refs_sited(mixed);
  REQUIRE(sited.size() == 3);
  CHECK(sited[0].file == "a.c");
}

TEST_CASE("unknown type diagnostics from a real compile") {
  TempDir dir("diag");
  write_file(dir / "t.c", "int use(EVP_CTX *ctx) { return ctx != 0; }\n");
  auto [rc, out] = sftest::sh("cd " + dir.path().string() + " && LC_ALL=C clang -c t.c -o t.o 2>&1");
  CHECK(rc != 0);
  CHECK(extract_missing_refs(out) == std::vector<std::string>{"EVP_CTX"});
}

TEST_CASE("glue_strings slice: two rounds, two files, allocator closure") {
  const auto& s = sliced("glue").slice;
  CHECK(s.compiled);
  CHECK(s.rounds == 2);
  REQUIRE(s.files.size() == 2);
  const auto& c = sftest::corpus();
  std::map<std::string, std::set<std::string>> defs;
  for (const auto& f : s.files) defs[c.idx.unit(f.origin_unit).unit->source_file] = f.defined_functions();
  CHECK(defs.at("src/driver.c") == std::set<std::string>{"glue_strings"});
  CHECK(defs.at("src/alloc.c") == std::set<std::string>{"CRYPTO_malloc", "OPENSSL_malloc"});
  CHECK(s.unresolved.empty());
  CHECK(s.root_symbol == "glue_strings");
}

TEST_CASE("a self-contained warning slices in one round and one file") {
  const auto& s = sliced("cwe121_01_bad").slice;
  CHECK(s.compiled);
  CHECK(s.rounds == 1);
  CHECK(s.files.size() == 1);
}

TEST_CASE("a callee with no definition anywhere is unresolved") {
  const auto& s = sliced("unresolvable").slice;
  CHECK_FALSE(s.compiled);
  CHECK(s.reason == "unresolved");
  CHECK(s.unresolved == std::vector<std::string>{"asm_checksum"});
}

TEST_CASE("globals read by the root are reported") {
  const auto& s = sliced("globals").slice;
  CHECK(s.compiled);
  CHECK(s.reads_globals == std::vector<std::string>{"g_slack"});
}

TEST_CASE("round cap stops the loop") {
  const auto& c = sftest::corpus();
  TempDir dir("cap");
  const auto& g = sliced("glue");
  SliceCaps caps;
  caps.max_rounds = 1;
  auto s = build_slice(g.warning, g.slice.root, c.idx, c.db, dir / "w", caps);
  CHECK_FALSE(s.compiled);
  CHECK(s.reason == "cap");
  caps = SliceCaps{};
  caps.max_definitions = 1;
  auto t = build_slice(g.warning, g.slice.root, c.idx, c.db, dir / "w2", caps);
  CHECK_FALSE(t.compiled);
  CHECK(t.reason == "cap");
}

TEST_CASE("main is renamed in the slice") {
  TempDir dir("main");
  auto repo = sftest::capture_repo(sftest::source_dir() / "tests/fixtures/dupsym", dir.path());
  Warning w;
  w.file = "main_a.c";
  w.line = 10;
  w.category = "x";
  w.id = "wmain";
  auto s = build_slice(w, sftest::function_ref(repo.idx, "main_a.c", 10), repo.idx, repo.db, dir / "w");
  CHECK(s.root_name == "main");
  CHECK(s.root_symbol == exported_root_name("main"));
  CHECK(s.root_symbol != "main");
  CHECK_MESSAGE(s.compiled, s.last_log);
  std::set<std::string> defined;
  for (const auto& f : s.files) {
    auto d = f.defined_functions();
    defined.insert(d.begin(), d.end());
  }
  CHECK(defined == std::set<std::string>{"main", "use_scale", "scale"});
}

TEST_CASE("slices survive a save and load") {
  const auto& s = sliced("glue").slice;
  auto back = load_slice(s.workdir);
  CHECK(back.compiled == s.compiled);
  CHECK(back.rounds == s.rounds);
  REQUIRE(back.files.size() == s.files.size());
  for (std::size_t i = 0; i < s.files.size(); ++i) {
    CHECK(back.files[i].text == s.files[i].text);
    // Only project lines are persisted.
    auto project = s.files[i].emitted_line_map;
    for (auto& loc : project) {
      if (loc && loc->external) loc.reset();
    }
    CHECK(back.files[i].emitted_line_map == project);
    CHECK(back.files[i].retained.size() == s.files[i].retained.size());
  }
  CHECK(back.objects == s.objects);
}

// ---------------------------------------------------------------------------
// Properties over every corpus slice

TEST_CASE("slice invariants: smaller, rooted, closed") {
  const auto& c = sftest::corpus();
  for (const auto& sf : sftest::corpus_slices()) {
    const Slice& s = sf.slice;
    if (!s.compiled) {
      CHECK(sf.fixture.role == "unresolvable");
      continue;
    }
    INFO(sf.fixture.function);
    // (a) fewer lines than the project
    CHECK(s.retained_loc < s.project_loc);
    // (b) the root is defined in its own unit's file
    bool rooted = false;
    for (const auto& f : s.files) {
      if (f.origin_unit == s.root.unit && f.defined_functions().count(s.root_symbol)) rooted = true;
    }
    CHECK(rooted);
    // (c) every callee of a retained function is retained, declared, or unresolved
    std::set<std::string> defined;
    for (const auto& f : s.files) {
      auto d = f.defined_functions();
      defined.insert(d.begin(), d.end());
    }
    for (const auto& f : s.files) {
      auto declared = f.declared_names();
      for (const auto& span : f.retained) {
        if (span.external) declared.insert(span.symbols.begin(), span.symbols.end());
      }
      for (const auto& span : f.retained) {
        if (span.kind != ItemKind::function_def || !span.item || span.external) continue;
        const auto& fi = c.idx.unit(span.source_unit);
        for (const auto& name : span.symbols) {
          const FunctionDecl* fn = fi.find_definition(name);
          REQUIRE(fn);
          for (const auto& callee : callees_of(*fn, fi).called) {
            bool ok = defined.count(callee) || declared.count(callee) ||
                      std::find(s.unresolved.begin(), s.unresolved.end(), callee) != s.unresolved.end();
            CHECK_MESSAGE(ok, name << " calls " << callee);
          }
        }
      }
    }
    CHECK(s.unresolved.empty());
  }
}

TEST_CASE("every retained span carries provenance and functions are justified") {
  const auto& c = sftest::corpus();
  static const std::set<std::string> reasons = {"root",     "bfs",        "reference",  "declaration", "external",
                                                "pragma",   "diagnostic", "transplant", "synthesized"};
  for (const auto& sf : sftest::corpus_slices()) {
    const Slice& s = sf.slice;
    INFO(sf.fixture.function);
    // Reachability from the root over retained definitions.
    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& f : s.files) {
      for (const auto& span : f.retained) {
        CHECK(reasons.count(span.provenance.reason));
        CHECK(span.provenance.round >= 1);
        CHECK(span.provenance.round <= std::max(s.rounds, 1));
        CHECK(span.emitted_start >= 1);
        CHECK(span.emitted_start <= span.emitted_end);
        if (span.kind != ItemKind::function_def || !span.item || span.external) continue;
        const auto& fi = c.idx.unit(span.source_unit);
        for (const auto& name : span.symbols) {
          auto cl = callees_of(*fi.find_definition(name), fi);
          auto& e = edges[name];
          e.insert(e.end(), cl.called.begin(), cl.called.end());
          e.insert(e.end(), cl.referenced_not_called.begin(), cl.referenced_not_called.end());
        }
      }
    }
    std::set<std::string> reach{s.root_name};
    std::vector<std::string> todo{s.root_name};
    while (!todo.empty()) {
      auto n = todo.back();
      todo.pop_back();
      for (const auto& m : edges[n]) {
        if (reach.insert(m).second) todo.push_back(m);
      }
    }
    for (const auto& f : s.files) {
      for (const auto& span : f.retained) {
        if (span.kind != ItemKind::function_def || span.external) continue;
        for (const auto& name : span.symbols) {
          bool justified = reach.count(name) || span.provenance.reason == "diagnostic" ||
                           !span.provenance.demanded_by.empty();
          CHECK_MESSAGE(justified, name << " retained without a path from the root");
        }
      }
    }
  }
}

TEST_CASE("emitted lines map back to the preprocessed text they came from") {
  const auto& c = sftest::corpus();
  for (const auto& sf : sftest::corpus_slices()) {
    for (const auto& f : sf.slice.files) {
      auto emitted = split_lines(f.text);
      REQUIRE(emitted.size() == f.emitted_line_map.size());
      for (const auto& span : f.retained) {
        if (!span.item || span.kind != ItemKind::function_def || span.external) continue;
        const auto& unit = *c.idx.unit(span.source_unit).unit;
        // original (file, line) -> pp line of that unit
        std::map<std::pair<std::string, int>, int> inverse;
        for (std::size_t i = 0; i < unit.line_map.size(); ++i) {
          if (!unit.line_map[i].external) inverse[{unit.line_map[i].file, unit.line_map[i].line}] = static_cast<int>(i + 1);
        }
        auto pp = split_lines(unit.text);
        bool root_span = std::find(span.symbols.begin(), span.symbols.end(), sf.slice.root_name) != span.symbols.end();
        for (int l = span.emitted_start; l <= span.emitted_end; ++l) {
          const auto& loc = f.emitted_line_map[l - 1];
          REQUIRE(loc);
          auto it = inverse.find({loc->file, loc->line});
          REQUIRE(it != inverse.end());
          if (root_span && l == span.emitted_start) continue;  // specifiers blanked
          CHECK(emitted[l - 1] == pp[it->second - 1]);
        }
      }
    }
  }
}

TEST_CASE("slicing is deterministic and grows monotonically") {
  const auto& c = sftest::corpus();
  TempDir dir("det");
  for (const char* role : {"glue", "globals", "cwe122_22_bad"}) {
    const auto& sf = sliced(role);
    auto again = build_slice(sf.warning, sf.slice.root, c.idx, c.db, dir / role);
    CHECK(again.rounds == sf.slice.rounds);
    REQUIRE(again.files.size() == sf.slice.files.size());
    for (std::size_t i = 0; i < again.files.size(); ++i) CHECK(again.files[i].text == sf.slice.files[i].text);
  }
  for (const auto& sf : sftest::corpus_slices()) {
    const auto& h = sf.slice.history;
    for (std::size_t i = 1; i < h.size(); ++i) {
      std::set<std::string> prev(h[i - 1].retained_symbols.begin(), h[i - 1].retained_symbols.end());
      std::set<std::string> cur(h[i].retained_symbols.begin(), h[i].retained_symbols.end());
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    }
  }
}

TEST_CASE("emitted files carry provenance comments") {
  const auto& s = sliced("glue").slice;
  bool diag = false;
  for (const auto& f : s.files) diag |= f.text.find("[diagnostic r2: OPENSSL_malloc]") != std::string::npos;
  CHECK(diag);
  CHECK(s.files[0].text.find("[root r1]") != std::string::npos);
}
