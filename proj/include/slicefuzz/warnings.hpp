#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/util.hpp"

namespace slicefuzz {

enum class Tool { ratslike, inferlike, generic };

std::string to_string(Tool tool);
std::optional<Tool> parse_tool(std::string_view name);

/// One static-analysis finding in canonical form.
struct Warning {
  std::string id;  // pure function of (tool, file, line, category)
  Tool tool = Tool::generic;
  std::string file;  // repository-relative, '/'-separated
  int line = 0;      // 1-based
  std::string category;
  std::string severity;

  bool operator==(const Warning&) const = default;
};

std::string warning_id(Tool tool, std::string_view file, int line, std::string_view category);

enum class ReportFormat { jsonl, csv };

/// Throws Error for anything but "jsonl" or "csv".
ReportFormat parse_report_format(std::string_view tag);

struct IngestDiagnostic {
  std::size_t record = 0;  // 1-based record number (CSV: excluding the header)
  std::string message;
};

struct IngestResult {
  std::vector<Warning> warnings;
  std::vector<IngestDiagnostic> diagnostics;
};

/// Every record ends up as exactly one Warning or one diagnostic. When
/// `repo_root` is given, files are made repository-relative and records
/// naming files that do not exist under it become diagnostics.
IngestResult load_warnings(const fs::path& report_path, ReportFormat format,
                           const std::optional<fs::path>& repo_root = std::nullopt);

/// Allowed severities per tool; a tool mapped to std::nullopt accepts all.
struct SeverityPolicy {
  std::map<Tool, std::optional<std::set<std::string>>> allowed;

  /// ratslike -> {High, Medium}; inferlike -> {L1, L2}; generic -> all.
  static SeverityPolicy defaults();
  static SeverityPolicy allow_all();
  /// "ratslike=High,Medium;inferlike=L1,L2;generic=*"; unspecified tools
  /// keep their defaults.
  static SeverityPolicy parse(std::string_view spec);

  bool admits(const Warning& w) const;
};

std::vector<Warning> filter_by_severity(const std::vector<Warning>& ws, const SeverityPolicy& policy);

struct DedupeResult {
  std::vector<Warning> warnings;
  std::map<std::string, std::string> dropped_to_retained;  // dropped id -> retained id
};

/// Keeps the first warning per (file, line, category); the tool is not
/// part of the key.
DedupeResult dedupe_warnings(const std::vector<Warning>& ws);

void to_json(nlohmann::json& j, const Warning& w);
void from_json(const nlohmann::json& j, Warning& w);

}  // namespace slicefuzz
