#include <doctest.h>

#include <regex>
#include <set>

#include "slicefuzz/code_index.hpp"
#include "support.hpp"

using namespace slicefuzz;
using sftest::TempDir;

namespace {

const FileIndex& unit_for(const RepoIndex& idx, const std::string& file) {
  for (const auto& fi : idx.units()) {
    if (fi.unit->source_file == file) return fi;
  }
  throw Error("no unit for " + file);
}

std::optional<FunctionRef> ref_named(const RepoIndex& idx, const std::string& file, const std::string& name) {
  for (std::size_t u = 0; u < idx.units().size(); ++u) {
    const auto& fi = idx.unit(u);
    if (fi.unit->source_file != file) continue;
    for (std::size_t f = 0; f < fi.functions.size(); ++f) {
      if (fi.functions[f].is_definition && fi.functions[f].name == name) return FunctionRef{u, f};
    }
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("glue_strings spans lines 3 to 19") {
  const auto& c = sftest::corpus();
  const auto& fi = unit_for(c.idx, "src/driver.c");
  auto ref = ref_named(c.idx, "src/driver.c", "glue_strings");
  REQUIRE(ref);
  auto span = original_span(c.idx, *ref);
  REQUIRE(span);
  CHECK(span->first.file == "src/driver.c");
  CHECK(span->first.line == 3);
  CHECK(span->second.line == 19);
  int defs = 0;
  for (const auto& f : fi.functions) defs += f.is_definition && f.name == "glue_strings";
  CHECK(defs == 1);
}

TEST_CASE("empty unit gives an empty index") {
  auto fi = index_unit(make_identity_unit("", "empty.c"));
  CHECK(fi.items.empty());
  CHECK(fi.functions.empty());
  CHECK(fi.records.empty());
}

TEST_CASE("top-level assembly becomes a raw block between indexed functions") {
  const auto& c = sftest::corpus();
  const auto& fi = unit_for(c.idx, "src/asm_region.c");
  std::vector<std::pair<int, int>> raw;
  for (const auto& item : fi.items) {
    if (item.kind != ItemKind::raw_block) continue;
    raw.emplace_back(map_line(*fi.unit, item.start_line).line, map_line(*fi.unit, item.end_line).line);
  }
  // Hand annotation: the __asm__ statement occupies lines 12-14.
  REQUIRE(raw.size() == 1);
  CHECK(raw[0] == std::pair{12, 14});
  CHECK(fi.find_definition("before_region"));
  CHECK(fi.find_definition("after_region"));

  auto inside = enclosing_function(c.idx, "src/asm_region.c", 13);
  CHECK_FALSE(inside.function);
  CHECK_FALSE(inside.diagnostic.empty());
}

TEST_CASE("enclosing function lookups") {
  const auto& c = sftest::corpus();
  auto e = enclosing_function(c.idx, "src/driver.c", 16);
  REQUIRE(e.function);
  CHECK(c.idx.function(*e.function).name == "glue_strings");

  auto between = enclosing_function(c.idx, "src/driver.c", 20);
  CHECK_FALSE(between.function);
  CHECK(between.reason == "no enclosing function");

  auto header = enclosing_function(c.idx, "include/alloc.h", 3);
  CHECK_FALSE(header.function);
}

TEST_CASE("warnings in files no unit compiles are excluded") {
  const auto& c = sftest::corpus();
  auto e = enclosing_function(c.idx, "src/not_built.c", 3);
  CHECK_FALSE(e.function);
  CHECK(e.reason.rfind("excluded", 0) == 0);
}

TEST_CASE("callees of glue_strings") {
  const auto& c = sftest::corpus();
  auto ref = ref_named(c.idx, "src/driver.c", "glue_strings");
  REQUIRE(ref);
  auto cl = callees_of(c.idx.function(*ref), c.idx.unit(ref->unit));
  CHECK(cl.called == std::vector<std::string>{"strlen", "OPENSSL_malloc", "strcpy"});
}

TEST_CASE("callees of a leaf and of a recursive function") {
  auto fi = index_unit(make_identity_unit(
      "int leaf(int x) { return x + 1; }\n"
      "int fact(int n) { return n <= 1 ? 1 : n * fact(n - 1); }\n"
      "int twice(int (*f)(int), int x) { return f(f(x)); }\n"
      "int use(void) { return twice(leaf, 2); }\n",
      "r.c"));
  REQUIRE(fi.find_definition("leaf"));
  CHECK(callees_of(*fi.find_definition("leaf"), fi).called.empty());
  CHECK(callees_of(*fi.find_definition("fact"), fi).called == std::vector<std::string>{"fact"});
  auto use = callees_of(*fi.find_definition("use"), fi);
  CHECK(use.called == std::vector<std::string>{"twice"});
  CHECK(use.referenced_not_called == std::vector<std::string>{"leaf"});
}

TEST_CASE("locate_symbol prefers the defining unit for OPENSSL_malloc") {
  const auto& c = sftest::corpus();
  auto ref = ref_named(c.idx, "src/driver.c", "glue_strings");
  REQUIRE(ref);
  auto sites = locate_symbol(c.idx, "OPENSSL_malloc", ref->unit);
  REQUIRE_FALSE(sites.empty());
  CHECK(c.idx.unit(sites[0].unit).unit->source_file == "src/alloc.c");
  CHECK(sites[0].kind == SiteKind::function);
  CHECK(locate_symbol(c.idx, "strcpy", ref->unit).empty());
}

TEST_CASE("static functions resolve only from their own unit") {
  const auto& c = sftest::corpus();
  auto ref = ref_named(c.idx, "juliet/cwe122_22_slot.c", "cwe122_22_bad");
  REQUIRE(ref);
  CHECK(locate_symbol(c.idx, "slot_of_bad", ref->unit).size() == 1);
  auto other = ref_named(c.idx, "src/driver.c", "glue_strings");
  CHECK(locate_symbol(c.idx, "slot_of_bad", other->unit).empty());
}

TEST_CASE("a symbol defined in two units yields both sites in a stable order") {
  TempDir dir("dupsym");
  auto repo = sftest::capture_repo(sftest::source_dir() / "tests/fixtures/dupsym", dir.path());
  auto from = ref_named(repo.idx, "main_a.c", "use_scale");
  REQUIRE(from);
  auto sites = locate_symbol(repo.idx, "scale", from->unit);
  REQUIRE(sites.size() == 2);
  // Same link group first.
  CHECK(repo.idx.unit(sites[0].unit).unit->source_file == "scale_a.c");
  CHECK(repo.idx.unit(sites[1].unit).unit->source_file == "scale_b.c");
  auto again = locate_symbol(repo.idx, "scale", from->unit);
  CHECK(again[0].unit == sites[0].unit);
  CHECK(again[1].unit == sites[1].unit);
}

TEST_CASE("index finds exactly the hand-listed functions") {
  const auto& c = sftest::corpus();
  auto oracle = nlohmann::json::parse(read_file(sftest::corpus_source() / "functions.json"));
  for (const auto& [file, spans] : oracle.items()) {
    std::set<std::tuple<std::string, int, int>> want, got;
    for (const auto& s : spans) want.emplace(s.at("name"), s.at("start"), s.at("end"));
    for (std::size_t u = 0; u < c.idx.units().size(); ++u) {
      const auto& fi = c.idx.unit(u);
      if (fi.unit->source_file != file) continue;
      for (std::size_t f = 0; f < fi.functions.size(); ++f) {
        if (!fi.functions[f].is_definition) continue;
        auto span = original_span(c.idx, {u, f});
        REQUIRE(span);
        got.emplace(fi.functions[f].name, span->first.line, span->second.line);
      }
    }
    CHECK_MESSAGE(got == want, file);
  }
}

TEST_CASE("every line of every definition maps back to it") {
  const auto& c = sftest::corpus();
  for (std::size_t u = 0; u < c.idx.units().size(); ++u) {
    const auto& fi = c.idx.unit(u);
    for (std::size_t f = 0; f < fi.functions.size(); ++f) {
      const auto& fn = fi.functions[f];
      if (!fn.is_definition) continue;
      for (int l = fn.start_line; l <= fn.end_line; ++l) {
        auto loc = map_line(*fi.unit, l);
        if (loc.external) continue;
        auto e = enclosing_function(c.idx, loc.file, loc.line);
        REQUIRE(e.function);
        CHECK(c.idx.function(*e.function).name == fn.name);
        CHECK(c.idx.unit(e.function->unit).unit->source_file == fi.unit->source_file);
      }
    }
  }
}

TEST_CASE("callees are identifiers present in the body and spans do not overlap") {
  const auto& c = sftest::corpus();
  for (const auto& fi : c.idx.units()) {
    std::vector<std::pair<int, int>> spans;
    for (const auto& fn : fi.functions) {
      if (!fn.is_definition) continue;
      spans.emplace_back(fn.start_line, fn.end_line);
      CHECK(fn.start_line <= fn.end_line);
      std::set<std::string> idents;
      const auto& item = fi.items.at(fn.item);
      for (const auto& t : lex_c(fi.item_text(item))) {
        if (t.kind == TokKind::ident) idents.emplace(t.text);
      }
      auto cl = callees_of(fn, fi);
      for (const auto& name : cl.called) CHECK(idents.count(name));
      for (const auto& name : cl.referenced_not_called) CHECK(idents.count(name));
      std::set<std::string> uniq(cl.called.begin(), cl.called.end());
      CHECK(uniq.size() == cl.called.size());
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) CHECK(spans[i - 1].second < spans[i].first);
  }
}

TEST_CASE("repository index is rebuildable from its units") {
  const auto& c = sftest::corpus();
  auto again = build_repo_index(c.units, c.db.repo_root, 1);
  CHECK(index_to_json(again) == index_to_json(c.idx));
  std::set<std::tuple<std::string, std::size_t, int, int>> sites;
  for (const auto& [sym, site] : c.idx.by_symbol()) {
    CHECK(sites.emplace(sym, site.unit, site.start_line, site.end_line).second);
  }
}

TEST_CASE("struct pair fields resolve to int and char") {
  const auto& c = sftest::corpus();
  const auto& fi = unit_for(c.idx, "juliet/cwe121_11_struct_pair.c");
  REQUIRE(fi.records.count("struct pair"));
  const auto& rec = fi.records.at("struct pair");
  REQUIRE(rec.fields.size() == 2);
  CHECK(rec.fields[0].name == "a");
  CHECK(rec.fields[0].type->kind == SemanticCType::Kind::signed_int);
  CHECK(rec.fields[0].type->width == 32);
  CHECK(rec.fields[1].name == "b");
  CHECK(rec.fields[1].type->kind == SemanticCType::Kind::char_t);
  CHECK(rec.fields[1].type->width == 8);
}

TEST_CASE("types of glue_strings parameters") {
  const auto& c = sftest::corpus();
  auto ref = ref_named(c.idx, "src/driver.c", "glue_strings");
  const auto& fn = c.idx.function(*ref);
  REQUIRE(fn.params.size() == 1);
  const auto& t = *fn.params[0].type;
  CHECK(t.kind == SemanticCType::Kind::pointer);
  REQUIRE(t.pointee);
  CHECK(t.pointee->kind == SemanticCType::Kind::pointer);
  CHECK(t.pointee->pointee->kind == SemanticCType::Kind::char_t);
  CHECK(t.pointee->pointee->is_const);
  CHECK(fn.return_type->kind == SemanticCType::Kind::pointer);
}

TEST_CASE("lexer skips comments and keeps directives whole") {
  auto toks = lex_c("int a; /* c */ // d\n#define X \\\n  1\nchar *s = \"/*\";\n");
  std::vector<std::string> texts;
  for (const auto& t : toks) texts.emplace_back(t.text);
  CHECK(texts == std::vector<std::string>{"int", "a", ";", "#define X \\\n  1", "char", "*", "s", "=", "\"/*\"", ";"});
  CHECK(toks[3].kind == TokKind::directive);
  CHECK(toks[4].line == 4);
}
