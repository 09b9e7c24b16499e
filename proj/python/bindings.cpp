// Thin binding over the pipeline. Structured results cross the boundary as
// JSON text; the Python package decodes them.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "slicefuzz/pipeline.hpp"

namespace py = pybind11;
using namespace slicefuzz;

namespace {

Tool tool_or_throw(const std::string& name) {
  auto t = parse_tool(name);
  if (!t) throw Error("unknown tool '" + name + "'");
  return *t;
}

RunConfig make_config(const fs::path& repo, const fs::path& warnings, const fs::path& out, const std::string& build_cmd,
                      double budget, std::uint64_t seed, int workers, const std::string& severity_policy,
                      const std::optional<fs::path>& shim) {
  RunConfig cfg;
  cfg.repo_root = fs::absolute(repo);
  cfg.warnings_path = warnings.empty() ? fs::path() : fs::absolute(warnings);
  cfg.out_dir = fs::absolute(out);
  cfg.build_cmd = build_cmd;
  cfg.budget_seconds = budget;
  cfg.seed = seed;
  cfg.workers = workers;
  cfg.severity_policy = severity_policy;
  if (shim) {
    cfg.shim_path = *shim;
  } else if (auto p = locate_shim()) {
    cfg.shim_path = *p;
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_slicefuzz, m) {
  m.doc() = "Slice-and-fuzz triage of buffer-overflow warnings";

  // Translators run newest first, so the subclass goes last.
  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<StageOrderError>(m, "StageOrderError", error.ptr());

  m.def(
      "warning_id",
      [](const std::string& tool, const std::string& file, int line, const std::string& category) {
        return warning_id(tool_or_throw(tool), file, line, category);
      },
      py::arg("tool"), py::arg("file"), py::arg("line"), py::arg("category"));

  m.def(
      "load_warnings",
      [](const fs::path& path, const std::string& format, const std::optional<fs::path>& repo_root) {
        IngestResult r;
        {
          py::gil_scoped_release nogil;
          r = load_warnings(path, parse_report_format(format), repo_root);
        }
        nlohmann::json diags = nlohmann::json::array();
        for (const auto& d : r.diagnostics) diags.push_back({{"record", d.record}, {"message", d.message}});
        return nlohmann::json{{"warnings", r.warnings}, {"diagnostics", diags}}.dump();
      },
      py::arg("path"), py::arg("format") = "jsonl", py::arg("repo_root") = py::none());

  m.def(
      "run",
      [](const fs::path& repo, const fs::path& warnings, const fs::path& out, const std::string& build_cmd,
         double budget, std::uint64_t seed, int workers, const std::string& severity_policy,
         const std::optional<fs::path>& shim) {
        auto cfg = make_config(repo, warnings, out, build_cmd, budget, seed, workers, severity_policy, shim);
        ReportTable t;
        int rc;
        {
          py::gil_scoped_release nogil;
          rc = cmd_run(cfg, &t);
        }
        return py::make_tuple(rc, report_to_json(t).dump());
      },
      py::arg("repo"), py::arg("warnings"), py::arg("out"), py::arg("build_cmd") = "make", py::arg("budget") = 300.0,
      py::arg("seed") = 1, py::arg("workers") = 1, py::arg("severity_policy") = "", py::arg("shim") = py::none());

  m.def(
      "classify",
      [](const fs::path& out) {
        RunConfig cfg;
        cfg.out_dir = fs::absolute(out);
        ReportTable t;
        {
          py::gil_scoped_release nogil;
          t = cmd_classify(cfg);
        }
        return report_to_json(t).dump();
      },
      py::arg("out"));

  m.def(
      "report_text", [](const std::string& report) { return report_to_text(report_from_json(nlohmann::json::parse(report))); },
      py::arg("report"));

  m.def(
      "match_persistent",
      [](const std::string& old_report, const fs::path& old_root, const fs::path& new_warnings,
         const fs::path& new_root, bool require_new_pfp) {
        auto t = report_from_json(nlohmann::json::parse(old_report));
        auto ws = load_warnings(new_warnings, ReportFormat::jsonl).warnings;
        PersistenceOptions opt;
        opt.require_new_pfp = require_new_pfp;
        return persistence_to_json(match_persistent(t, old_root, ws, new_root, opt)).dump();
      },
      py::arg("old_report"), py::arg("old_root"), py::arg("new_warnings"), py::arg("new_root"),
      py::arg("require_new_pfp") = false);
}
