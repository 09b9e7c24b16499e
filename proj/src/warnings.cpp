#include "slicefuzz/warnings.hpp"

#include <sstream>

namespace slicefuzz {

std::string to_string(Tool tool) {
  switch (tool) {
    case Tool::ratslike: return "ratslike";
    case Tool::inferlike: return "inferlike";
    case Tool::generic: return "generic";
  }
  return "generic";
}

std::optional<Tool> parse_tool(std::string_view name) {
  if (name == "ratslike" || name == "rats") return Tool::ratslike;
  if (name == "inferlike" || name == "infer") return Tool::inferlike;
  if (name == "generic") return Tool::generic;
  return std::nullopt;
}

std::string warning_id(Tool tool, std::string_view file, int line, std::string_view category) {
  std::string key = to_string(tool);
  key.push_back('\0');
  key.append(file);
  key.push_back('\0');
  key += std::to_string(line);
  key.push_back('\0');
  key.append(category);
  return "w" + fnv1a_hex(key);
}

ReportFormat parse_report_format(std::string_view tag) {
  if (tag == "jsonl") return ReportFormat::jsonl;
  if (tag == "csv") return ReportFormat::csv;
  throw Error("unknown report format '" + std::string(tag) + "' (expected jsonl or csv)");
}

namespace {

using RawRecord = std::map<std::string, nlohmann::json>;

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty() && cur.back() == '\r') cur.pop_back();
  fields.push_back(std::move(cur));
  return fields;
}

std::string normalize_file(std::string file, const std::optional<fs::path>& repo_root) {
  fs::path p(file);
  if (repo_root && p.is_absolute()) return relative_to(p, *repo_root);
  return p.lexically_normal().generic_string();
}

// Converts one raw record; returns an error message on failure.
std::optional<std::string> convert(const nlohmann::json& rec, const std::optional<fs::path>& repo_root, Warning& out) {
  if (!rec.is_object()) return "record is not an object";
  for (const char* field : {"tool", "file", "line", "category", "severity"}) {
    if (!rec.contains(field)) return std::string("missing required field '") + field + "'";
  }
  if (!rec["tool"].is_string()) return "field 'tool' must be a string";
  auto tool = parse_tool(rec["tool"].get<std::string>());
  if (!tool) return "unknown tool '" + rec["tool"].get<std::string>() + "'";

  long long line = 0;
  const auto& jl = rec["line"];
  if (jl.is_number_integer()) {
    line = jl.get<long long>();
  } else if (jl.is_string()) {
    try {
      std::size_t used = 0;
      line = std::stoll(jl.get<std::string>(), &used);
      if (used != jl.get<std::string>().size()) return "field 'line' is not an integer";
    } catch (const std::exception&) {
      return "field 'line' is not an integer";
    }
  } else {
    return "field 'line' is not an integer";
  }
  if (line < 1 || line > INT32_MAX) return "line must be >= 1";

  for (const char* field : {"file", "category", "severity"}) {
    if (!rec[field].is_string()) return std::string("field '") + field + "' must be a string";
  }
  std::string file = normalize_file(rec["file"].get<std::string>(), repo_root);
  if (file.empty()) return "empty file";
  if (repo_root) {
    std::error_code ec;
    if (!fs::is_regular_file(*repo_root / file, ec)) return "file '" + file + "' does not exist under repository root";
  }
  out.tool = *tool;
  out.file = std::move(file);
  out.line = static_cast<int>(line);
  out.category = rec["category"].get<std::string>();
  out.severity = rec["severity"].get<std::string>();
  out.id = warning_id(out.tool, out.file, out.line, out.category);
  return std::nullopt;
}

}  // namespace

IngestResult load_warnings(const fs::path& report_path, ReportFormat format, const std::optional<fs::path>& repo_root) {
  std::string text = read_file(report_path);
  IngestResult result;
  auto lines = split_lines(text);

  auto take = [&](std::size_t record_no, const nlohmann::json& rec) {
    Warning w;
    if (auto err = convert(rec, repo_root, w)) {
      result.diagnostics.push_back({record_no, *err});
    } else {
      result.warnings.push_back(std::move(w));
    }
  };

  if (format == ReportFormat::jsonl) {
    std::size_t record_no = 0;
    for (const auto& raw : lines) {
      if (trim(raw).empty()) continue;
      ++record_no;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(raw);
      } catch (const nlohmann::json::parse_error& e) {
        result.diagnostics.push_back({record_no, std::string("malformed JSON: ") + e.what()});
        continue;
      }
      take(record_no, rec);
    }
    return result;
  }

  std::vector<std::string> header;
  std::size_t record_no = 0;
  for (const auto& raw : lines) {
    if (trim(raw).empty()) continue;
    auto fields = parse_csv_line(raw);
    if (header.empty()) {
      for (auto& f : fields) header.emplace_back(trim(f));
      if (!header.empty() && starts_with(header[0], "\xEF\xBB\xBF")) header[0] = header[0].substr(3);
      continue;
    }
    ++record_no;
    if (fields.size() != header.size()) {
      result.diagnostics.push_back({record_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                                   std::to_string(fields.size())});
      continue;
    }
    nlohmann::json rec = nlohmann::json::object();
    for (std::size_t i = 0; i < header.size(); ++i) rec[header[i]] = fields[i];
    take(record_no, rec);
  }
  return result;
}

SeverityPolicy SeverityPolicy::defaults() {
  SeverityPolicy p;
  p.allowed[Tool::ratslike] = std::set<std::string>{"High", "Medium"};
  p.allowed[Tool::inferlike] = std::set<std::string>{"L1", "L2"};
  p.allowed[Tool::generic] = std::nullopt;
  return p;
}

SeverityPolicy SeverityPolicy::allow_all() {
  SeverityPolicy p;
  for (Tool t : {Tool::ratslike, Tool::inferlike, Tool::generic}) p.allowed[t] = std::nullopt;
  return p;
}

SeverityPolicy SeverityPolicy::parse(std::string_view spec) {
  SeverityPolicy p = defaults();
  std::string s(spec);
  std::stringstream groups(s);
  std::string group;
  while (std::getline(groups, group, ';')) {
    auto g = trim(group);
    if (g.empty()) continue;
    auto eq = g.find('=');
    if (eq == std::string_view::npos) throw Error("severity policy entry '" + std::string(g) + "' lacks '='");
    auto tool = parse_tool(trim(g.substr(0, eq)));
    if (!tool) throw Error("severity policy names unknown tool '" + std::string(trim(g.substr(0, eq))) + "'");
    auto values = std::string(trim(g.substr(eq + 1)));
    if (values == "*") {
      p.allowed[*tool] = std::nullopt;
      continue;
    }
    std::set<std::string> set;
    std::stringstream vs(values);
    std::string v;
    while (std::getline(vs, v, ',')) {
      auto t = trim(v);
      if (!t.empty()) set.emplace(t);
    }
    p.allowed[*tool] = std::move(set);
  }
  return p;
}

bool SeverityPolicy::admits(const Warning& w) const {
  auto it = allowed.find(w.tool);
  if (it == allowed.end() || !it->second) return true;
  return it->second->count(w.severity) > 0;
}

std::vector<Warning> filter_by_severity(const std::vector<Warning>& ws, const SeverityPolicy& policy) {
  std::vector<Warning> out;
  for (const auto& w : ws) {
    if (policy.admits(w)) out.push_back(w);
  }
  return out;
}

DedupeResult dedupe_warnings(const std::vector<Warning>& ws) {
  DedupeResult result;
  std::map<std::tuple<std::string, int, std::string>, std::string> seen;
  for (const auto& w : ws) {
    auto key = std::make_tuple(w.file, w.line, w.category);
    auto [it, inserted] = seen.emplace(key, w.id);
    if (inserted) {
      result.warnings.push_back(w);
    } else if (w.id != it->second) {
      result.dropped_to_retained[w.id] = it->second;
    }
  }
  return result;
}

void to_json(nlohmann::json& j, const Warning& w) {
  j = nlohmann::json{{"id", w.id},           {"tool", to_string(w.tool)},     {"file", w.file},
                     {"line", w.line},       {"category", w.category},        {"severity", w.severity}};
}

void from_json(const nlohmann::json& j, Warning& w) {
  auto tool = parse_tool(j.at("tool").get<std::string>());
  if (!tool) throw Error("unknown tool in stored warning");
  w.tool = *tool;
  w.file = j.at("file").get<std::string>();
  w.line = j.at("line").get<int>();
  w.category = j.at("category").get<std::string>();
  w.severity = j.at("severity").get<std::string>();
  w.id = j.contains("id") ? j.at("id").get<std::string>() : warning_id(w.tool, w.file, w.line, w.category);
}

}  // namespace slicefuzz
