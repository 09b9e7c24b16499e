#include <doctest.h>

#include <regex>
#include <set>

#include "slicefuzz/build_capture.hpp"
#include "slicefuzz/process.hpp"
#include "support.hpp"

using namespace slicefuzz;
using sftest::TempDir;

namespace {

CaptureOptions options_for(const fs::path& ws) {
  CaptureOptions o;
  o.workspace = ws;
  o.shim_path = sftest::shim_path();
  return o;
}

// Independent reading of GNU line markers: origin of every non-marker line.
std::vector<std::pair<std::string, int>> scan_markers(const std::string& pp) {
  static const std::regex marker(R"re(^# (\d+) "((?:[^"\\]|\\.)*)"((?: \d)*)\s*$)re");
  std::vector<std::pair<std::string, int>> out;
  std::string file;
  int next = 1;
  for (const auto& line : split_lines(pp)) {
    std::smatch m;
    if (std::regex_match(line, m, marker)) {
      next = std::stoi(m[1]);
      file = m[2];
      continue;
    }
    out.emplace_back(file, next++);
  }
  return out;
}

std::string strip_literals(const std::string& line) {
  static const std::regex lit(R"re("(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')re");
  return std::regex_replace(line, lit, "\"\"");
}

}  // namespace

TEST_CASE("two-file makefile project gives two records and one link group") {
  TempDir dir("capture");
  fs::path repo = dir / "repo";
  fs::create_directories(repo / "include");
  fs::copy_file(sftest::corpus_source() / "src/driver.c", repo / "driver.c");
  fs::copy_file(sftest::corpus_source() / "src/alloc.c", repo / "alloc.c");
  fs::copy_file(sftest::corpus_source() / "include/alloc.h", repo / "include/alloc.h");
  write_file(repo / "Makefile",
             "libglue.so: driver.o alloc.o\n\tclang -shared -o $@ driver.o alloc.o\n"
             "%.o: %.c\n\tclang -fPIC -Iinclude -c $< -o $@\n");
  auto db = capture_build(repo, "make", options_for(dir / "ws"));
  REQUIRE(db.records.size() == 2);
  CHECK(db.links.size() == 1);
  std::set<std::string> sources;
  for (const auto& r : db.records) {
    sources.insert(r.source.filename().string());
    CHECK(r.link_group == db.records[0].link_group);
    CHECK(db.links.count(r.link_group) == 1);
  }
  CHECK(sources == std::set<std::string>{"alloc.c", "driver.c"});
}

TEST_CASE("a tree without a build system fails with zero compile steps") {
  TempDir dir("capture");
  fs::create_directories(dir / "repo");
  write_file(dir / "repo/a.c", "int a;\n");
  try {
    capture_build(dir / "repo", "true", options_for(dir / "ws"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("zero compile steps") != std::string::npos);
  }
}

TEST_CASE("failing build reports its log") {
  TempDir dir("capture");
  fs::create_directories(dir / "repo");
  write_file(dir / "repo/a.c", "int a(void) { return b; }\n");
  CHECK_THROWS_WITH_AS(capture_build(dir / "repo", "clang -c a.c -o a.o", options_for(dir / "ws")),
                       doctest::Contains("undeclared identifier"), Error);
}

TEST_CASE("recapturing an unchanged tree gives the same database") {
  const auto& c = sftest::corpus();
  auto first = to_json(c.db).dump(2);
  auto again = capture_build(c.repo, "make clean && make", options_for(c.workspace));
  CHECK(to_json(again).dump(2) == first);
  CHECK(to_json(load_database(c.workspace / "compile_db.json")).dump(2) == first);
}

TEST_CASE("corpus database shape") {
  const auto& c = sftest::corpus();
  std::size_t c_files = 0;
  for (auto dir : {"src", "juliet"}) {
    for (const auto& e : fs::directory_iterator(c.repo / dir)) c_files += e.path().extension() == ".c";
  }
  CHECK(c.db.records.size() == c_files);
  CHECK(c.db.links.size() == 1);
  for (const auto& r : c.db.records) {
    CHECK(c.db.links.count(r.link_group) == 1);
    CHECK(r.args.size() > 1);
    CHECK(fs::path(r.args[0]).is_absolute());
  }
  auto round = database_from_json(to_json(c.db));
  CHECK(round.records == c.db.records);
}

TEST_CASE("replaying every record compiles") {
  const auto& c = sftest::corpus();
  TempDir out("replay");
  int i = 0;
  for (const auto& r : c.db.records) {
    std::vector<std::string> argv{r.args[0]};
    auto flags = essential_flags(r);
    argv.insert(argv.end(), flags.begin(), flags.end());
    argv.insert(argv.end(), {"-c", r.source.string(), "-o", (out / (std::to_string(i++) + ".o")).string()});
    ProcessOptions po;
    po.cwd = r.directory;
    auto res = run_process(argv, po);
    CHECK_MESSAGE(res.ok(), r.source.string() << "\n" << res.output);
  }
}

TEST_CASE("essential flags drop mode, output and dependency options") {
  CompileRecord r;
  r.directory = "/tmp";
  r.source = "/tmp/a.c";
  r.output = "/tmp/a.o";
  r.args = {"/usr/bin/clang", "-O2", "-MD", "-MF", "a.d", "-DX=1", "-I", "inc", "-include", "cfg.h", "-c", "a.c", "-o", "a.o"};
  auto f = essential_flags(r);
  CHECK(f == std::vector<std::string>{"-O2", "-DX=1", "-I", "inc", "-include", "cfg.h"});
  auto g = essential_flags(r, true);
  CHECK(g == std::vector<std::string>{"-O2", "-DX=1", "-I", "inc"});
}

TEST_CASE("preprocessing strips only the comment") {
  TempDir dir("pp");
  fs::path repo = dir / "repo";
  fs::create_directories(repo);
  std::string code =
      "int sum(const int *v, int n)\n"
      "{\n"
      "    int s = 0;\n"
      "    for (int i = 0; i < n; i++)\n"
      "        s += v[i];\n"
      "    return s;\n"
      "}\n";
  write_file(repo / "sum.c", "/* Copyright notice\n * spanning lines\n */\n" + code);
  auto db = capture_build(repo, "clang -c sum.c -o sum.o", options_for(dir / "ws"));
  auto units = preprocess_sources(db, dir / "ws");
  REQUIRE(units.size() == 1);
  REQUIRE(units[0]->ok);
  auto lines = split_lines(units[0]->text);
  auto orig = split_lines(code);
  int matched = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& loc = units[0]->line_map[i];
    if (loc.file != "sum.c" || loc.line < 4) continue;
    CHECK(lines[i] == orig[loc.line - 4]);
    ++matched;
  }
  CHECK(matched == static_cast<int>(orig.size()));
  CHECK(units[0]->text.find("Copyright") == std::string::npos);
}

TEST_CASE("conditional compilation keeps one branch") {
  TempDir dir("pp");
  fs::path repo = dir / "repo";
  fs::create_directories(repo);
  write_file(repo / "plat.c",
             "#ifdef LINUX\nint on_linux(void) { return 1; }\n#else\nint elsewhere(void) { return 0; }\n#endif\n");
  auto db = capture_build(repo, "clang -DLINUX -c plat.c -o plat.o", options_for(dir / "ws"));
  auto units = preprocess_sources(db, dir / "ws");
  REQUIRE(units.size() == 1);
  CHECK(units[0]->text.find("on_linux") != std::string::npos);
  CHECK(units[0]->text.find("elsewhere") == std::string::npos);
  CHECK(units[0]->text.find("#ifdef") == std::string::npos);
}

TEST_CASE("line maps agree with an independent marker scan") {
  const auto& c = sftest::corpus();
  for (const auto& u : c.units) {
    REQUIRE(u->ok);
    auto oracle = scan_markers(read_file(u->pp_path));
    REQUIRE(oracle.size() == u->line_map.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      auto loc = map_line(*u, static_cast<int>(i + 1));
      CHECK(loc.line == oracle[i].second);
      fs::path of(oracle[i].first);
      if (!loc.external) {
        CHECK(absolute_normal(of, u->origin.directory) == absolute_normal(c.db.repo_root / loc.file));
      }
    }
    CHECK_THROWS_AS(map_line(*u, 0), std::out_of_range);
    CHECK_THROWS_AS(map_line(*u, static_cast<int>(u->line_map.size()) + 1), std::out_of_range);
  }
}

TEST_CASE("identity unit maps each line to itself") {
  auto u = make_identity_unit("int a;\nint b;\nint c;\n", "x.c");
  for (int i = 1; i <= 3; ++i) {
    auto loc = map_line(*u, i);
    CHECK(loc.file == "x.c");
    CHECK(loc.line == i);
  }
  CHECK_THROWS_AS(map_line(*u, 4), std::out_of_range);
}

TEST_CASE("preprocessed corpus has no comments or conditionals") {
  const auto& c = sftest::corpus();
  for (const auto& u : c.units) {
    for (const auto& line : split_lines(read_file(u->pp_path))) {
      auto t = std::string(trim(line));
      for (auto d : {"#if", "#ifdef", "#ifndef", "#else", "#elif", "#endif"}) CHECK_FALSE(starts_with(t, d));
      auto bare = strip_literals(line);
      CHECK(bare.find("/*") == std::string::npos);
      CHECK(bare.find("//") == std::string::npos);
    }
  }
}

TEST_CASE("line maps are total and injective on project lines") {
  const auto& c = sftest::corpus();
  for (const auto& u : c.units) {
    std::set<std::pair<std::string, int>> seen;
    for (const auto& loc : u->line_map) {
      if (loc.external) continue;
      CHECK(fs::exists(c.db.repo_root / loc.file));
      auto lines = split_lines(read_file(c.db.repo_root / loc.file));
      CHECK(loc.line >= 1);
      CHECK(loc.line <= static_cast<int>(lines.size()));
      CHECK_MESSAGE(seen.insert({loc.file, loc.line}).second, loc.file << ":" << loc.line);
    }
  }
}

TEST_CASE("units reload from their metadata") {
  const auto& c = sftest::corpus();
  auto reloaded = units_from_json(units_to_json(c.units), c.db.repo_root);
  REQUIRE(reloaded.size() == c.units.size());
  for (std::size_t i = 0; i < reloaded.size(); ++i) {
    CHECK(reloaded[i]->text == c.units[i]->text);
    CHECK(reloaded[i]->line_map == c.units[i]->line_map);
    CHECK(reloaded[i]->source_file == c.units[i]->source_file);
  }
}

TEST_CASE("workspace comes from the environment when set") {
  ::setenv("SLICEFUZZ_WORKDIR", "/tmp/sf-env-ws", 1);
  CHECK(resolve_workspace(fs::path("/elsewhere")) == fs::path("/tmp/sf-env-ws"));
  ::unsetenv("SLICEFUZZ_WORKDIR");
  CHECK(resolve_workspace(fs::path("/elsewhere")) == fs::path("/elsewhere"));
}
