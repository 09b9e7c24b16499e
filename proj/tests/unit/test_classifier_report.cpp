#include <doctest.h>

#include <random>
#include <set>

#include "slicefuzz/classifier_report.hpp"
#include "slicefuzz/harness_gen.hpp"
#include "support.hpp"

using namespace slicefuzz;
using sftest::TempDir;

namespace {

// Independent statement of the four states, one predicate each.
bool is_nc(const Outcome& o) {
  return o.failure || !o.slice_compiled || o.verdict->event == EngineEvent::start_failure;
}
bool is_c(const Outcome& o) { return !is_nc(o) && o.verdict->crash_at_target; }
bool is_pfp(const Outcome& o) { return !is_nc(o) && !o.verdict->crash_at_target && o.verdict->target_line_hits > 0; }
bool is_nr(const Outcome& o) { return !is_nc(o) && !o.verdict->crash_at_target && o.verdict->target_line_hits == 0; }

Outcome random_outcome(std::mt19937& rng) {
  auto coin = [&](int p) { return static_cast<int>(rng() % 100) < p; };
  Outcome o;
  o.warning.file = "src/f" + std::to_string(rng() % 3) + ".c";
  o.warning.line = 1 + static_cast<int>(rng() % 50);
  o.warning.category = coin(50) ? "memcpy" : "strcpy";
  o.warning.tool = coin(50) ? Tool::ratslike : Tool::inferlike;
  o.warning.id = warning_id(o.warning.tool, o.warning.file, o.warning.line, o.warning.category);
  if (coin(10)) o.failure = coin(50) ? "no enclosing function" : "link";
  o.slice_compiled = coin(85);
  if (!o.slice_compiled) o.slice_reason = coin(50) ? "unresolved" : "cap";
  o.reads_globals = coin(20);
  FuzzVerdict v;
  static const EngineEvent events[] = {EngineEvent::completed, EngineEvent::crash, EngineEvent::oom,
                                       EngineEvent::timeout, EngineEvent::start_failure, EngineEvent::not_run};
  v.event = events[rng() % 6];
  v.budget = 1 + rng() % 300;
  v.executions = v.event == EngineEvent::not_run ? 0 : rng() % 100000;
  v.target_line_hits = coin(50) ? 0 : 1 + rng() % 1000;
  v.executed_target_line = v.target_line_hits > 0;
  if (coin(30)) {
    CrashReport cr;
    cr.kind = "heap-buffer-overflow";
    CrashFrame f;
    bool at_line = coin(50);
    f.location = SourceLocation{o.warning.file, at_line ? o.warning.line : o.warning.line + 1, false};
    cr.frames.push_back(f);
    v.crashes.push_back(cr);
    v.crash_at_target = at_line;
    if (at_line && !v.target_line_hits) {
      v.target_line_hits = 1;
      v.executed_target_line = true;
    }
    v.off_target_crash = !at_line;
  }
  v.harness_suspect = coin(5);
  if (!o.failure || coin(50)) o.verdict = v;
  if (o.slice_compiled && !o.failure && !o.verdict) o.verdict = v;
  return o;
}

ReportRow row(const std::string& file, int line, State st, Tool tool = Tool::ratslike) {
  ReportRow r;
  r.warning.file = file;
  r.warning.line = line;
  r.warning.category = "memcpy";
  r.warning.tool = tool;
  r.warning.severity = "High";
  r.warning.id = warning_id(tool, file, line, "memcpy");
  r.classification.state = st;
  r.classification.reason = to_string(st);
  return r;
}

ReportTable all_pfp(const std::vector<Warning>& ws) {
  std::vector<ReportRow> rows;
  for (const auto& w : ws) {
    ReportRow r;
    r.warning = w;
    r.classification.state = State::PFP;
    rows.push_back(r);
  }
  return summarize("v", rows);
}

std::vector<Warning> load(const fs::path& p) { return load_warnings(p, ReportFormat::jsonl).warnings; }

std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask >> i & 1) sub.push_back(a[i]);
    }
    std::size_t j = 0;
    for (const auto& x : b) {
      if (j < sub.size() && sub[j] == x) ++j;
    }
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

int rank(State s) { return s == State::NR ? 0 : s == State::PFP ? 1 : 2; }

}  // namespace

TEST_CASE("classification is exhaustive and exclusive") {
  std::mt19937 rng(2024);
  for (int i = 0; i < 5000; ++i) {
    Outcome o = random_outcome(rng);
    int holds = is_nc(o) + is_c(o) + is_pfp(o) + is_nr(o);
    REQUIRE(holds == 1);
    auto c = classify(o);
    State want = is_nc(o) ? State::NC : is_c(o) ? State::C : is_pfp(o) ? State::PFP : State::NR;
    CHECK(c.state == want);
    CHECK_FALSE(c.reason.empty());
    if (c.state == State::PFP) {
      CHECK(c.has_flag("possible"));
      CHECK(c.has_flag("budget-relative"));
      CHECK(c.has_flag("globals") == o.reads_globals);
      CHECK(c.reason.find("no crash within") != std::string::npos);
    }
    if (c.state == State::C) CHECK(c.reason.find("at warning line") != std::string::npos);
    // Idempotent.
    auto again = classify(o);
    CHECK(again.state == c.state);
    CHECK(again.reason == c.reason);
    CHECK(again.flags == c.flags);
  }
}

TEST_CASE("classification examples") {
  Outcome o;
  o.warning.file = "src/driver.c";
  o.warning.line = 16;
  o.slice_compiled = true;
  CHECK_THROWS_AS(classify(o), Error);

  FuzzVerdict v;
  v.event = EngineEvent::completed;
  v.budget = 300;
  v.executions = 1000;
  v.target_line_hits = 72300000;  // a five-minute run on one warning line
  v.executed_target_line = true;
  o.verdict = v;
  auto c = classify(o);
  CHECK(c.state == State::PFP);
  CHECK(c.reason == "possible false positive: line executed, no crash within 300 s");
  CHECK(c.evidence.at("hits") == 72300000);

  o.verdict->target_line_hits = 0;
  o.verdict->executed_target_line = false;
  CHECK(classify(o).state == State::NR);
  CHECK(classify(o).reason == "warning line not reached");

  o.verdict->event = EngineEvent::oom;
  CHECK(classify(o).has_flag("engine-oom"));

  Outcome nc;
  nc.failure = "unfuzzable: variadic target";
  CHECK(classify(nc).state == State::NC);
  CHECK(classify(nc).reason == "unfuzzable: variadic target");
  nc.failure.reset();
  nc.slice_reason = "unresolved";
  CHECK(classify(nc).reason == "unresolved");
}

TEST_CASE("summaries count every row once") {
  std::vector<ReportRow> rows{row("b.c", 2, State::PFP), row("a.c", 9, State::C, Tool::inferlike),
                              row("a.c", 3, State::NR), row("a.c", 3, State::NC, Tool::inferlike),
                              row("c.c", 1, State::PFP)};
  auto t = summarize("repo", rows);
  CHECK(t.overall == Counts{5, 2, 1, 1, 1});
  Counts sum;
  for (const auto& [tool, c] : t.by_tool) {
    sum.total += c.total;
    sum.pfp += c.pfp;
    sum.c += c.c;
    sum.nr += c.nr;
    sum.nc += c.nc;
    CHECK(c.total == c.pfp + c.c + c.nr + c.nc);
  }
  CHECK(sum == t.overall);
  CHECK(t.by_tool.at("ratslike").total == 3);
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const auto& a = t.rows[i - 1].warning;
    const auto& b = t.rows[i].warning;
    CHECK(std::tie(a.file, a.line) <= std::tie(b.file, b.line));
  }
  CHECK(t.rows.front().warning.file == "a.c");
  CHECK(t.rows.front().warning.line == 3);

  auto back = report_from_json(report_to_json(t));
  CHECK(report_to_json(back) == report_to_json(t));
  CHECK(report_to_json(summarize("repo", back.rows)) == report_to_json(t));
  auto text = report_to_text(t);
  CHECK(text.find("PFP") != std::string::npos);
  CHECK(text.find("b.c:2") != std::string::npos);
}

TEST_CASE("an empty report") {
  auto t = summarize("empty", {});
  CHECK(t.overall == Counts{});
  CHECK(t.rows.empty());
  CHECK(report_from_json(report_to_json(t)).rows.empty());
  CHECK_FALSE(report_to_text(t).empty());
}

TEST_CASE("lcs alignment agrees with brute force") {
  std::mt19937 rng(5);
  for (int iter = 0; iter < 400; ++iter) {
    std::vector<std::string> a(rng() % 7), b(rng() % 7);
    for (auto& x : a) x = std::string(1, static_cast<char>('a' + rng() % 3));
    for (auto& x : b) x = std::string(1, static_cast<char>('a' + rng() % 3));
    auto al = lcs_align(a, b);
    REQUIRE(al.size() == a.size());
    std::size_t matched = 0;
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!al[i]) continue;
      ++matched;
      CHECK(a[i] == b[*al[i]]);
      if (last) CHECK(*al[i] > *last);
      last = al[i];
    }
    CHECK(matched == brute_lcs(a, b));
  }
}

TEST_CASE("persistence across identical versions matches everything") {
  fs::path v1 = sftest::corpus_source() / "persistence" / "v1";
  auto ws = load(v1 / "warnings.jsonl");
  auto old = all_pfp(ws);
  auto m = match_persistent(old, v1, ws, v1);
  REQUIRE(m.size() == ws.size());
  for (const auto& x : m) {
    CHECK(x.matched);
    CHECK(x.reason.empty());
    CHECK(x.tracked_line == x.old_row.warning.line);
  }
}

TEST_CASE("persistence from v1 to v2") {
  fs::path v1 = sftest::corpus_source() / "persistence" / "v1";
  fs::path v2 = sftest::corpus_source() / "persistence" / "v2";
  auto old_ws = load(v1 / "warnings.jsonl");
  auto new_ws = load(v2 / "warnings.jsonl");
  auto old = all_pfp(old_ws);
  // Non-PFP rows are never tracked.
  auto rows = old.rows;
  rows.push_back(row("src/text.c", 5, State::C));
  auto m = match_persistent(summarize("v1", rows), v1, new_ws, v2);
  REQUIRE(m.size() == old_ws.size());
  // Hand annotation of the edit: text.c:19 strncpy bound changed, text.c:29
  // memset removed; the other four lines only moved.
  std::map<std::pair<std::string, int>, std::string> want{
      {{"src/text.c", 10}, ""}, {{"src/text.c", 19}, "line_modified"}, {{"src/text.c", 29}, "line_deleted"},
      {{"src/text.c", 30}, ""}, {{"src/path.c", 9}, ""},               {{"src/path.c", 11}, ""}};
  std::map<std::pair<std::string, int>, int> moved{{{"src/text.c", 10}, 15},
                                                   {{"src/text.c", 30}, 34},
                                                   {{"src/path.c", 9}, 11},
                                                   {{"src/path.c", 11}, 13}};
  std::size_t matched = 0;
  for (const auto& x : m) {
    auto key = std::pair{x.old_row.warning.file, x.old_row.warning.line};
    INFO(key.first << ":" << key.second);
    REQUIRE(want.count(key));
    CHECK(x.reason == want.at(key));
    if (x.matched) {
      ++matched;
      CHECK(x.matched->line == moved.at(key));
      CHECK(x.tracked_line == moved.at(key));
    }
  }
  CHECK(matched == old_ws.size() - 2);
  auto j = persistence_to_json(m);
  CHECK(j.at("old_pfp") == old_ws.size());
  CHECK(j.at("matched") == old_ws.size() - 2);

  // Demanding PFP in the new run turns a non-PFP match into not_pfp.
  auto new_t = all_pfp(new_ws);
  for (auto& r : new_t.rows) {
    if (r.warning.file == "src/path.c" && r.warning.line == 13) r.classification.state = State::C;
  }
  auto strict = match_persistent(old, v1, new_ws, v2, {true}, &new_t);
  std::size_t strict_matched = 0;
  for (const auto& x : strict) {
    strict_matched += x.matched ? 1 : 0;
    if (x.old_row.warning.file == "src/path.c" && x.old_row.warning.line == 11) CHECK(x.reason == "not_pfp");
  }
  CHECK(strict_matched == old_ws.size() - 3);
}

TEST_CASE("persistence reasons for removed functions and unflagged lines") {
  TempDir dir("persist");
  write_file(dir / "old/a.c",
             "void keep(char *d, const char *s)\n{\n    memcpy(d, s, 8);\n}\n"
             "void gone(char *d)\n{\n    memset(d, 0, 8);\n}\n");
  write_file(dir / "new/a.c", "void keep(char *d, const char *s)\n{\n    memcpy(d, s, 8);\n}\n");
  auto old = summarize("old", {row("a.c", 3, State::PFP), row("a.c", 7, State::PFP)});
  auto m = match_persistent(old, dir / "old", {}, dir / "new");
  REQUIRE(m.size() == 2);
  CHECK(m[0].reason == "not_flagged");
  CHECK(m[0].tracked_line == 3);
  CHECK(m[1].reason == "function_removed");
  CHECK_FALSE(m[1].tracked_line);
}

TEST_CASE("verdicts only ever climb with a longer budget") {
  // NR < PFP < C. The longer run starts from the shorter run's corpus, so
  // every input already tried is tried again.
  const auto& c = sftest::corpus();
  for (const char* fn : {"cwe121_16_bad", "cwe121_13_good"}) {
    INFO(std::string(fn));
    const sftest::SlicedFixture* sf = nullptr;
    for (const auto& s : sftest::corpus_slices()) {
      if (s.fixture.function == fn) sf = &s;
    }
    REQUIRE(sf);
    TempDir dir("mono");
    Slice s = sf->slice;
    s.workdir = dir.path();
    auto plan = plan_arguments(c.idx.function(s.root), c.idx, !s.reads_globals.empty());
    REQUIRE(std::holds_alternative<HarnessSpec>(plan));
    auto harness = write_harness(std::get<HarnessSpec>(plan), s, c.idx);
    auto br = link_executable(s, harness, c.db, c.idx);
    REQUIRE(br.ok);
    int prev = -1;
    fs::path carried = dir / "carried";
    fs::create_directories(carried);
    for (double budget : {0.0, 2.0, 6.0}) {
      auto run = run_fuzz(br.binary, budget, 1, {}, {carried});
      auto v = collect_verdict(run, sf->warning, s);
      auto st = classify(sf->warning, s, v).state;
      REQUIRE(st != State::NC);
      CHECK(rank(st) >= prev);
      prev = rank(st);
      for (const auto& dir_entry : {run.corpus_dir, run.crashes_dir}) {
        for (const auto& e : fs::directory_iterator(dir_entry)) {
          fs::copy_file(e.path(), carried / e.path().filename(), fs::copy_options::overwrite_existing);
        }
      }
    }
  }
}
