#include "slicefuzz/classifier_report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "slicefuzz/code_index.hpp"

namespace slicefuzz {

std::string to_string(State s) {
  switch (s) {
    case State::C: return "C";
    case State::PFP: return "PFP";
    case State::NR: return "NR";
    case State::NC: return "NC";
  }
  return "NC";
}

std::optional<State> parse_state(std::string_view s) {
  if (s == "C") return State::C;
  if (s == "PFP") return State::PFP;
  if (s == "NR") return State::NR;
  if (s == "NC") return State::NC;
  return std::nullopt;
}

bool Classification::has_flag(std::string_view f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

Classification classify(const Outcome& o) {
  Classification c;
  c.evidence["slice_compiled"] = o.slice_compiled;
  if (o.failure) {
    c.state = State::NC;
    c.reason = *o.failure;
    return c;
  }
  if (!o.slice_compiled) {
    c.state = State::NC;
    c.reason = o.slice_reason.empty() ? "not compiled" : o.slice_reason;
    return c;
  }
  if (!o.verdict) throw Error("classify: compiled and linked warning " + o.warning.id + " has no verdict");
  const FuzzVerdict& v = *o.verdict;
  if (v.event == EngineEvent::start_failure) {
    c.state = State::NC;
    c.reason = "runtime";
    return c;
  }
  c.evidence["hits"] = v.target_line_hits;
  c.evidence["crashes"] = v.crashes.size();
  c.evidence["budget"] = v.budget;
  c.evidence["executions"] = v.executions;
  if (v.harness_suspect) c.flags.push_back("harness-suspect");
  if (v.off_target_crash) c.flags.push_back("off-target-crash");
  if (v.event == EngineEvent::oom) c.flags.push_back("engine-oom");
  if (v.event == EngineEvent::timeout) c.flags.push_back("engine-timeout");
  if (v.crash_at_target) {
    c.state = State::C;
    for (const auto& cr : v.crashes) {
      if (attribute_crash(cr, o.warning)) {
        c.reason = cr.kind + " at warning line";
        break;
      }
    }
    if (c.reason.empty()) c.reason = "crash at warning line";
    return c;
  }
  if (v.executed_target_line) {
    c.state = State::PFP;
    char buf[96];
    std::snprintf(buf, sizeof buf, "possible false positive: line executed, no crash within %.0f s", v.budget);
    c.reason = buf;
    c.flags.insert(c.flags.begin(), {"possible", "budget-relative"});
    if (o.reads_globals) c.flags.push_back("globals");
    return c;
  }
  c.state = State::NR;
  c.reason = v.executions == 0 ? "no executions" : "warning line not reached";
  if (o.reads_globals) c.flags.push_back("globals");
  return c;
}

Classification classify(const Warning& w, const Slice& slice, const std::optional<FuzzVerdict>& v,
                        const std::optional<std::string>& failure) {
  Outcome o;
  o.warning = w;
  o.failure = failure;
  o.slice_compiled = slice.compiled;
  o.slice_reason = slice.reason;
  o.reads_globals = !slice.reads_globals.empty();
  o.verdict = v;
  return classify(o);
}

// ---------------------------------------------------------------------------
// Tables

namespace {

void bump(Counts& c, State s) {
  ++c.total;
  switch (s) {
    case State::C: ++c.c; break;
    case State::PFP: ++c.pfp; break;
    case State::NR: ++c.nr; break;
    case State::NC: ++c.nc; break;
  }
}

nlohmann::json counts_json(const Counts& c) {
  return {{"Total", c.total}, {"PFP", c.pfp}, {"C", c.c}, {"NR", c.nr}, {"NC", c.nc}};
}

Counts counts_from(const nlohmann::json& j) {
  Counts c;
  c.total = j.at("Total").get<std::size_t>();
  c.pfp = j.at("PFP").get<std::size_t>();
  c.c = j.at("C").get<std::size_t>();
  c.nr = j.at("NR").get<std::size_t>();
  c.nc = j.at("NC").get<std::size_t>();
  return c;
}

}  // namespace

ReportTable summarize(const std::string& repository, std::vector<ReportRow> rows) {
  ReportTable t;
  t.repository = repository;
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const auto& x = a.warning;
    const auto& y = b.warning;
    return std::tie(x.file, x.line, x.category, x.tool, x.id) < std::tie(y.file, y.line, y.category, y.tool, y.id);
  });
  for (const auto& r : rows) {
    bump(t.by_tool[to_string(r.warning.tool)], r.classification.state);
    bump(t.overall, r.classification.state);
  }
  t.rows = std::move(rows);
  return t;
}

nlohmann::json report_to_json(const ReportTable& t) {
  nlohmann::json tools = nlohmann::json::object();
  for (const auto& [tool, c] : t.by_tool) tools[tool] = counts_json(c);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"warning", r.warning},
                    {"state", to_string(r.classification.state)},
                    {"reason", r.classification.reason},
                    {"flags", r.classification.flags},
                    {"evidence", r.classification.evidence},
                    {"function", r.function},
                    {"hits", r.hits},
                    {"wall_time", r.wall_time},
                    {"rounds", r.rounds},
                    {"retained_loc", r.retained_loc},
                    {"slice_seconds", r.slice_seconds},
                    {"compile_seconds", r.compile_seconds}});
  }
  return {{"repository", t.repository},
          {"note", "PFP means possible false positive: no crash was observed within the fuzzing budget"},
          {"overall", counts_json(t.overall)},
          {"by_tool", tools},
          {"rows", rows}};
}

ReportTable report_from_json(const nlohmann::json& j) {
  ReportTable t;
  t.repository = j.value("repository", std::string());
  t.overall = counts_from(j.at("overall"));
  for (const auto& [tool, c] : j.at("by_tool").items()) t.by_tool[tool] = counts_from(c);
  for (const auto& jr : j.at("rows")) {
    ReportRow r;
    r.warning = jr.at("warning").get<Warning>();
    auto st = parse_state(jr.at("state").get<std::string>());
    if (!st) throw Error("report: unknown state " + jr.at("state").dump());
    r.classification.state = *st;
    r.classification.reason = jr.value("reason", std::string());
    r.classification.flags = jr.value("flags", std::vector<std::string>{});
    r.classification.evidence = jr.value("evidence", nlohmann::json::object());
    r.function = jr.value("function", std::string());
    r.hits = jr.value("hits", std::uint64_t{0});
    r.wall_time = jr.value("wall_time", 0.0);
    r.rounds = jr.value("rounds", 0);
    r.retained_loc = jr.value("retained_loc", std::size_t{0});
    r.slice_seconds = jr.value("slice_seconds", 0.0);
    r.compile_seconds = jr.value("compile_seconds", 0.0);
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::string report_to_text(const ReportTable& t) {
  std::ostringstream out;
  char buf[512];
  out << "Repository: " << (t.repository.empty() ? "(unnamed)" : t.repository) << "\n\n";
  std::snprintf(buf, sizeof buf, "%-12s %7s %7s %7s %7s %7s\n", "tool", "Total", "PFP", "C", "NR", "NC");
  out << buf;
  auto line = [&](const std::string& name, const Counts& c) {
    std::snprintf(buf, sizeof buf, "%-12s %7zu %7zu %7zu %7zu %7zu\n", name.c_str(), c.total, c.pfp, c.c, c.nr, c.nc);
    out << buf;
  };
  for (const auto& [tool, c] : t.by_tool) line(tool, c);
  line("all", t.overall);
  out << "\nPFP = possible false positive: the warning line ran and nothing crashed within the budget.\n\n";
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-4s %s:%d [%s] %s", to_string(r.classification.state).c_str(),
                  r.warning.file.c_str(), r.warning.line, r.warning.category.c_str(), r.function.c_str());
    out << buf;
    std::snprintf(buf, sizeof buf, "  hits=%llu wall=%.1fs rounds=%d loc=%zu compile=%.2fs",
                  static_cast<unsigned long long>(r.hits), r.wall_time, r.rounds, r.retained_loc, r.compile_seconds);
    out << buf;
    if (!r.classification.flags.empty()) {
      out << " flags=";
      for (std::size_t i = 0; i < r.classification.flags.size(); ++i) out << (i ? "," : "") << r.classification.flags[i];
    }
    out << "\n     " << r.classification.reason << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Persistence

std::vector<std::optional<std::size_t>> lcs_align(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::uint32_t>> dp(n + 1, std::vector<std::uint32_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      dp[i][j] = a[i] == b[j] ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);
    }
  }
  std::vector<std::optional<std::size_t>> out(n);
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j]) {
      out[i] = j;
      ++i;
      ++j;
    } else if (dp[i + 1][j] >= dp[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

namespace {

struct RawFunction {
  std::string name;
  int start_line = 0, end_line = 0;
};

// Function definitions found lexically in unpreprocessed source.
std::vector<RawFunction> raw_functions(std::string_view text) {
  auto toks = lex_c(text);
  std::vector<RawFunction> out;
  int depth = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind != TokKind::punct) continue;
    if (t.text == "{") {
      if (depth == 0) {
        // Walk back over attributes to the closing parenthesis of the declarator.
        std::size_t k = i;
        int paren = 0;
        std::optional<std::size_t> close;
        while (k-- > 0) {
          if (toks[k].kind == TokKind::directive) continue;
          if (toks[k].text == ")") {
            close = k;
            break;
          }
          if (toks[k].text == ";" || toks[k].text == "}" || toks[k].text == "=") break;
        }
        if (close) {
          std::size_t k2 = *close + 1;
          while (k2-- > 0) {
            if (toks[k2].text == ")") ++paren;
            else if (toks[k2].text == "(" && --paren == 0) break;
          }
          // For `T name(args) __attribute__((x))` step back over the attribute group.
          while (k2 > 1 && toks[k2 - 1].kind == TokKind::ident &&
                 (toks[k2 - 1].text == "__attribute__" || toks[k2 - 1].text == "__attribute")) {
            std::size_t prev = k2 - 1;
            while (prev-- > 0 && toks[prev].text != ")") {
            }
            if (prev == static_cast<std::size_t>(-1)) break;
            k2 = prev + 1;
            while (k2-- > 0) {
              if (toks[k2].text == ")") ++paren;
              else if (toks[k2].text == "(" && --paren == 0) break;
            }
          }
          if (k2 > 0 && toks[k2 - 1].kind == TokKind::ident && !is_c_keyword(toks[k2 - 1].text)) {
            int end_depth = 0;
            std::size_t e = i;
            for (; e < toks.size(); ++e) {
              if (toks[e].text == "{") ++end_depth;
              else if (toks[e].text == "}" && --end_depth == 0) break;
            }
            if (e < toks.size()) out.push_back({std::string(toks[k2 - 1].text), toks[k2 - 1].line, toks[e].line});
          }
        }
      }
      ++depth;
    } else if (t.text == "}") {
      depth = std::max(0, depth - 1);
    }
  }
  return out;
}

const RawFunction* function_at(const std::vector<RawFunction>& fns, int line) {
  for (const auto& f : fns) {
    if (line >= f.start_line && line <= f.end_line) return &f;
  }
  return nullptr;
}

const RawFunction* function_named(const std::vector<RawFunction>& fns, const std::string& name) {
  for (const auto& f : fns) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<std::string> normalized_lines(const std::vector<std::string>& lines, int from, int to) {
  std::vector<std::string> out;
  for (int l = from; l <= to && l <= static_cast<int>(lines.size()); ++l) out.push_back(normalize_whitespace(lines[l - 1]));
  return out;
}

double token_similarity(const std::string& a, const std::string& b) {
  std::vector<std::string> ta, tb;
  for (const auto& t : lex_c(a)) ta.emplace_back(t.text);
  for (const auto& t : lex_c(b)) tb.emplace_back(t.text);
  if (ta.empty() || tb.empty()) return 0;
  auto al = lcs_align(ta, tb);
  auto common = std::count_if(al.begin(), al.end(), [](const auto& x) { return x.has_value(); });
  return static_cast<double>(common) / static_cast<double>(std::max(ta.size(), tb.size()));
}

struct SourceCache {
  fs::path root;
  std::map<std::string, std::optional<std::pair<std::vector<std::string>, std::vector<RawFunction>>>> files;

  const std::pair<std::vector<std::string>, std::vector<RawFunction>>* get(const std::string& rel) {
    auto it = files.find(rel);
    if (it == files.end()) {
      std::optional<std::pair<std::vector<std::string>, std::vector<RawFunction>>> v;
      fs::path p = root / rel;
      if (fs::is_regular_file(p)) {
        std::string text = read_file(p);
        v.emplace(split_lines(text), raw_functions(text));
      }
      it = files.emplace(rel, std::move(v)).first;
    }
    return it->second ? &*it->second : nullptr;
  }
};

}  // namespace

std::vector<PersistenceMatch> match_persistent(const ReportTable& old_report, const fs::path& old_root,
                                               const std::vector<Warning>& new_warnings, const fs::path& new_root,
                                               const PersistenceOptions& options, const ReportTable* new_report) {
  SourceCache old_src{old_root, {}}, new_src{new_root, {}};
  std::vector<PersistenceMatch> out;
  for (const auto& row : old_report.rows) {
    if (row.classification.state != State::PFP) continue;
    PersistenceMatch m;
    m.old_row = row;
    const Warning& w = row.warning;
    const auto* old_file = old_src.get(w.file);
    const RawFunction* old_fn = old_file ? function_at(old_file->second, w.line) : nullptr;
    const auto* new_file = new_src.get(w.file);
    const RawFunction* new_fn = nullptr;
    if (old_fn && new_file) new_fn = function_named(new_file->second, old_fn->name);
    if (!old_fn || !new_fn) {
      m.reason = "function_removed";
      out.push_back(std::move(m));
      continue;
    }
    auto a = normalized_lines(old_file->first, old_fn->start_line, old_fn->end_line);
    auto b = normalized_lines(new_file->first, new_fn->start_line, new_fn->end_line);
    auto align = lcs_align(a, b);
    std::size_t i = static_cast<std::size_t>(w.line - old_fn->start_line);
    if (i >= align.size() || !align[i]) {
      // The line has no identical counterpart: decide between an edit and a
      // removal by looking at what replaced it between aligned neighbours.
      std::size_t lo = 0, hi = b.size();
      for (std::size_t k = i; k-- > 0;) {
        if (align[k]) {
          lo = *align[k] + 1;
          break;
        }
      }
      for (std::size_t k = i + 1; k < align.size(); ++k) {
        if (align[k]) {
          hi = *align[k];
          break;
        }
      }
      bool modified = false;
      for (std::size_t j = lo; j < hi && i < a.size(); ++j) {
        if (token_similarity(a[i], b[j]) >= 0.5) modified = true;
      }
      m.reason = modified ? "line_modified" : "line_deleted";
      out.push_back(std::move(m));
      continue;
    }
    int tracked = new_fn->start_line + static_cast<int>(*align[i]);
    m.tracked_line = tracked;
    for (const auto& nw : new_warnings) {
      if (nw.file == w.file && nw.line == tracked && nw.tool == w.tool && nw.category == w.category) {
        m.matched = nw;
        break;
      }
    }
    if (!m.matched) {
      m.reason = "not_flagged";
    } else if (options.require_new_pfp && new_report) {
      bool pfp = std::any_of(new_report->rows.begin(), new_report->rows.end(), [&](const ReportRow& r) {
        return r.warning.id == m.matched->id && r.classification.state == State::PFP;
      });
      if (!pfp) {
        m.reason = "not_pfp";
        m.matched.reset();
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

nlohmann::json persistence_to_json(const std::vector<PersistenceMatch>& matches) {
  nlohmann::json rows = nlohmann::json::array();
  std::size_t matched = 0;
  for (const auto& m : matches) {
    nlohmann::json j{{"old", m.old_row.warning}};
    if (m.matched) {
      j["new"] = *m.matched;
      ++matched;
    } else {
      j["reason"] = m.reason;
    }
    if (m.tracked_line) j["tracked_line"] = *m.tracked_line;
    rows.push_back(std::move(j));
  }
  return {{"old_pfp", matches.size()}, {"matched", matched}, {"rows", rows}};
}

}  // namespace slicefuzz
