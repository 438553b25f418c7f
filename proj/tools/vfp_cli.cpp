// Command-line runner: vfp run|refine|compare <config.json> [flags]
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfp/experiment.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRunError = 2, kSuiteFailure = 3 };

int report_error(const vfp::Error& e) {
  nlohmann::ordered_json j;
  j["error"]["code"] = std::string(vfp::to_string(e.code()));
  j["error"]["message"] = e.what();
  std::cerr << j.dump(2) << '\n';
  return e.code() == vfp::ErrorCode::kConfig ? kConfigError : kRunError;
}

void print_suites(const std::vector<vfp::SuiteResult>& suites) {
  for (const auto& s : suites)
    std::printf("%-22s %s%s%s\n", s.name.c_str(), vfp::to_string(s.status),
                s.detail.empty() ? "" : "  ", s.detail.c_str());
}

void print_comparisons(const std::vector<vfp::ComparisonResult>& cmps) {
  for (const auto& c : cmps)
    for (const auto& [k, v] : c.metrics) std::printf("%s.%s = %.6e\n", c.name.c_str(), k.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimizing-movement solver for the kinetic Fokker-Planck equation"};
  app.require_subcommand(1);

  std::string config_path;
  vfp::RunOptions opts;
  int threads = 0;
  long long stride = -1;
  std::string out_dir;
  std::vector<double> h_list;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--output-dir", out_dir, "override outputs.directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--snapshot-stride", stride, "keep every k-th density (0 = endpoints)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--strict", opts.strict, "exit nonzero when any inequality suite fails");
  };
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  auto* refine = app.add_subcommand("refine", "h-refinement study against configured references");
  add_common(refine);
  refine->add_option("--h-list", h_list, "time steps to compare")->required()->expected(1, -1);
  auto* compare = app.add_subcommand("compare", "compare the scheme with configured references");
  add_common(compare);

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) opts.threads = threads;
  if (stride >= 0) opts.snapshot_stride = static_cast<std::size_t>(stride);
  if (!out_dir.empty()) opts.output_directory = out_dir;

  vfp::ExperimentConfig cfg;
  try {
    cfg = vfp::apply_options(vfp::load_config(config_path), opts);
    // Fail on inputs the run would reject before anything touches the disk.
    if (cfg.initial.kind != vfp::InitialConfig::Kind::kFile) (void)vfp::build_initial(cfg);
  } catch (const vfp::Error& e) {
    return report_error(e);
  }

  try {
    if (run->parsed()) {
      const auto res = vfp::run_experiment(cfg);
      std::printf("steps %zu, final time %.6g, output %s\n", res.trajectory.reports.size(),
                  cfg.final_time(), cfg.output_directory.string().c_str());
      print_suites(res.suites);
      print_comparisons(res.comparisons);
      if (opts.strict && !res.all_suites_pass()) return kSuiteFailure;
    } else if (refine->parsed()) {
      const auto table = vfp::refine_study(cfg, h_list);
      std::filesystem::create_directories(cfg.output_directory);
      const auto path = cfg.output_directory / "refine.csv";
      vfp::write_refine_csv(path, table);
      std::printf("wrote %s\n", path.string().c_str());
      for (const auto& [k, s] : table.fitted_slopes) std::printf("slope %s = %.4f\n", k.c_str(), s);
    } else {
      print_comparisons(vfp::run_comparisons(cfg));
    }
  } catch (const vfp::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": {\"code\": \"INTERNAL\", \"message\": " << nlohmann::json(e.what()).dump()
              << "}}\n";
    return kRunError;
  }
  return kOk;
}
