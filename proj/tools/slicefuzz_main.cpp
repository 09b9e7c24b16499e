#include <iostream>

#include <CLI11.hpp>

#include "slicefuzz/pipeline.hpp"

using namespace slicefuzz;

namespace {

fs::path self_dir() {
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::current_path() : exe.parent_path();
}

void print_report(const ReportTable& t, const std::string& format) {
  if (format == "json") {
    std::cout << report_to_json(t).dump(2) << "\n";
  } else {
    std::cout << report_to_text(t);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prune false-positive buffer-overflow warnings by slicing and fuzzing"};
  app.require_subcommand(0, 1);

  RunConfig cfg;
  std::string out, format = "text", shim;
  std::optional<std::string> warnings_fmt;
  std::vector<std::string> only;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out, "Workspace directory (default: $SLICEFUZZ_WORKDIR or ./slicefuzz-work)");
    sub->add_option("--workers", cfg.workers, "Parallel slice/fuzz workers")->check(CLI::PositiveNumber);
    sub->add_option("--format", format, "Report output")->check(CLI::IsMember({"text", "json"}));
  };
  auto repo_opts = [&](CLI::App* sub) {
    sub->add_option("--repo", cfg.repo_root, "Repository root");
    sub->add_option("--build-cmd", cfg.build_cmd, "Build command, run through /bin/sh in the repository");
    sub->add_option("--shim", shim, "Compiler shim executable");
  };
  auto warn_opts = [&](CLI::App* sub) {
    sub->add_option("--warnings", cfg.warnings_path, "Warning report (.jsonl or .csv)");
    sub->add_option("--warnings-format", warnings_fmt, "Override the report format")->check(CLI::IsMember({"jsonl", "csv"}));
    sub->add_option("--severity-policy", cfg.severity_policy, "e.g. 'ratslike=High,Medium;inferlike=L1,L2;generic=*'");
  };
  auto fuzz_opts = [&](CLI::App* sub) {
    sub->add_option("--budget", cfg.budget_seconds, "Fuzzing seconds per warning")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg.seed, "Engine seed");
    sub->add_option("--only", only, "Restrict to these warning ids");
  };

  auto* run = app.add_subcommand("run", "capture, index, slice, fuzz and classify");
  auto* capture = app.add_subcommand("capture", "record the build");
  auto* index = app.add_subcommand("index", "preprocess, index and load warnings");
  auto* slice = app.add_subcommand("slice", "build slices");
  auto* fuzz = app.add_subcommand("fuzz", "generate harnesses and fuzz");
  auto* classify_cmd = app.add_subcommand("classify", "classify and write the report");
  for (auto* s : {run, capture, index, slice, fuzz, classify_cmd}) common(s);
  for (auto* s : {run, capture}) repo_opts(s);
  for (auto* s : {run, index}) warn_opts(s);
  for (auto* s : {run, fuzz}) fuzz_opts(s);
  slice->add_option("--only", only, "Restrict to these warning ids");
  for (auto* s : {run, slice}) s->add_option("--max-rounds", cfg.caps.max_rounds, "Slicing round cap");

  auto* persist = app.add_subcommand("persist", "match old PFP warnings in a newer version");
  fs::path old_report, old_repo, new_warnings, new_repo, new_report;
  bool require_pfp = false;
  persist->add_option("--old-report", old_report, "report.json of the old version")->required();
  persist->add_option("--old-repo", old_repo, "Old source tree")->required();
  persist->add_option("--new-warnings", new_warnings, "Warnings for the new version")->required();
  persist->add_option("--new-repo", new_repo, "New source tree")->required();
  persist->add_option("--new-report", new_report, "report.json of the new version");
  persist->add_flag("--require-new-pfp", require_pfp, "Also demand a PFP verdict in the new report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (persist->parsed()) {
      auto old_t = report_from_json(nlohmann::json::parse(read_file(old_report)));
      auto fmt = new_warnings.extension() == ".csv" ? ReportFormat::csv : ReportFormat::jsonl;
      auto ws = load_warnings(new_warnings, fmt, absolute_normal(new_repo)).warnings;
      std::optional<ReportTable> new_t;
      if (!new_report.empty()) new_t = report_from_json(nlohmann::json::parse(read_file(new_report)));
      auto matches = match_persistent(old_t, old_repo, ws, new_repo, {require_pfp}, new_t ? &*new_t : nullptr);
      std::cout << persistence_to_json(matches).dump(2) << "\n";
      return 0;
    }

    cfg.out_dir = out.empty() ? resolve_workspace(std::nullopt) : absolute_normal(out);
    if (warnings_fmt) cfg.warnings_format = parse_report_format(*warnings_fmt);
    if (!shim.empty()) {
      cfg.shim_path = shim;
    } else if (auto p = locate_shim({self_dir()})) {
      cfg.shim_path = *p;
    }
    std::set<std::string> ids(only.begin(), only.end());

    if (capture->parsed()) {
      cmd_capture(cfg);
    } else if (index->parsed()) {
      cmd_index(cfg);
    } else if (slice->parsed()) {
      cmd_slice(cfg, ids);
    } else if (fuzz->parsed()) {
      cmd_fuzz(cfg, ids);
    } else if (classify_cmd->parsed()) {
      auto t = cmd_classify(cfg);
      print_report(t, format);
      return exit_status(t);
    } else {
      if (!run->parsed()) {
        std::cerr << app.help();
        return 1;
      }
      ReportTable t;
      int rc = cmd_run(cfg, &t);
      print_report(t, format);
      return rc;
    }
    std::cerr << "workspace: " << cfg.out_dir.string() << "\n";
    return 0;
  } catch (const StageOrderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
