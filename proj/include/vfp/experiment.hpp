#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfp/config.hpp"
#include "vfp/diagnostics.hpp"
#include "vfp/io.hpp"
#include "vfp/reference.hpp"
#include "vfp/scheme.hpp"

namespace vfp {

inline PhaseDensity build_initial(const ExperimentConfig& c) {
  switch (c.initial.kind) {
    case InitialConfig::Kind::kGibbs: return gibbs_density(c.grid, c.model);
    case InitialConfig::Kind::kGaussian: return gaussian_density(c.grid, c.initial.gaussian);
    case InitialConfig::Kind::kProduct: {
      const auto& px = c.initial.x_profile;
      const auto& pv = c.initial.v_profile;
      return PhaseDensity::from_function(c.grid, [&](double x, double v) { return px(x) * pv(v); });
    }
    case InitialConfig::Kind::kFile: {
      auto dump = read_density_dump(c.initial.file);
      require(dump.density.grid() == c.grid, ErrorCode::kConfig,
              "initial density dump does not match the configured grid");
      return std::move(dump.density);
    }
  }
  throw Error(ErrorCode::kConfig, "unhandled initial kind");
}

enum class SuiteStatus { kPass, kFail, kSkipped };

inline const char* to_string(SuiteStatus s) {
  switch (s) {
    case SuiteStatus::kPass: return "pass";
    case SuiteStatus::kFail: return "fail";
    default: return "skipped";
  }
}

struct SuiteResult {
  std::string name;
  SuiteStatus status;
  std::string detail;
};

inline constexpr double kSlopeChainRelTol = 0.05;

/// Pass/fail for each inequality suite over a run.
inline std::vector<SuiteResult> evaluate_suites(const std::vector<StepReport>& reports,
                                                const ModelSpec& spec, const SchemeConfig& cfg) {
  std::vector<SuiteResult> out;
  auto first_failure = [&](auto pred) -> std::optional<std::size_t> {
    for (const auto& r : reports)
      if (!pred(r)) return r.step_index;
    return std::nullopt;
  };
  auto add = [&](std::string name, std::optional<std::size_t> bad) {
    out.push_back({std::move(name), bad ? SuiteStatus::kFail : SuiteStatus::kPass,
                   bad ? "first failure at step " + std::to_string(*bad) : ""});
  };
  add("dissipation_bracket",
      first_failure([&](const StepReport& r) { return dissipation_bracket(r, spec).within; }));
  add("slope_chain", first_failure([&](const StepReport& r) {
        return slope_chain_check(r, spec.alpha, r.h, kSlopeChainRelTol);
      }));
  const auto growth = moment_growth_check(reports, spec);
  if (growth.skipped) {
    out.push_back({"moment_growth", SuiteStatus::kSkipped, growth.reason});
  } else {
    std::optional<std::size_t> bad;
    for (std::size_t k = 0; k < growth.per_step.size(); ++k)
      if (!growth.per_step[k]) {
        bad = k;
        break;
      }
    add("moment_growth", bad);
  }
  add("euler_lagrange",
      first_failure([&](const StepReport& r) { return r.el_residual <= cfg.el_residual_tol; }));
  add("monotonicity", first_failure([](const StepReport& r) { return r.monotone; }));
  add("boundary_leak",
      first_failure([&](const StepReport& r) { return r.boundary_leak <= cfg.boundary_leak_cap; }));
  return out;
}

struct ComparisonResult {
  std::string name;
  std::map<std::string, double> metrics;
};

namespace detail {

inline double mean_error(const PhaseMoments& a, const PhaseMoments& b) {
  return std::hypot(a.mean_x - b.mean_x, a.mean_v - b.mean_v);
}

inline double covariance_error(const PhaseMoments& a, const PhaseMoments& b) {
  return std::max({std::abs(a.cov_xx - b.cov_xx), std::abs(a.cov_xv - b.cov_xv),
                   std::abs(a.cov_vv - b.cov_vv)});
}

inline std::size_t whole_steps(double t, double dt, const std::string& what) {
  const double n = std::round(t / dt);
  require(n >= 1.0 && std::abs(n * dt - t) <= 1e-9 * std::max(t, 1.0), ErrorCode::kConfig,
          what + " time step does not divide the final time");
  return static_cast<std::size_t>(n);
}

}  // namespace detail

/// Final-time errors of `final_state` against one configured reference.
inline ComparisonResult compare_against(const ComparisonConfig& cmp, const ExperimentConfig& c,
                                        const PhaseDensity& mu0, const PhaseDensity& final_state,
                                        int threads) {
  const double t = c.final_time();
  const auto got = phase_moments(final_state);
  ComparisonResult res{comparison_name(cmp), {}};
  if (std::holds_alternative<GaussianOracleComparison>(cmp)) {
    // Mean and covariance obey closed ODEs for linear forces whatever the
    // initial shape, so the oracle starts from the discrete initial moments.
    const auto g = gaussian_ou_evolve(GaussianState::from_moments(phase_moments(mu0)),
                                      c.model.potential.lambda(), c.model.alpha, t);
    const PhaseMoments want{g.mean[0], g.mean[1], g.cov[0][0], g.cov[0][1], g.cov[1][1]};
    res.metrics["mean_error"] = detail::mean_error(got, want);
    res.metrics["covariance_error"] = detail::covariance_error(got, want);
  } else if (const auto* fd = std::get_if<FdReferenceComparison>(&cmp)) {
    const auto n = detail::whole_steps(t, fd->time_step, "fd_reference");
    PhaseDensity f = mu0;
    for (std::size_t s = 0; s < n; ++s)
      f = fd_vfp_step(f, c.model, fd->time_step, 1.0, c.scheme.boundary_leak_cap, threads);
    const auto want = phase_moments(f);
    res.metrics["l1_error"] = l1_distance(final_state, f);
    res.metrics["mean_error"] = detail::mean_error(got, want);
    res.metrics["covariance_error"] = detail::covariance_error(got, want);
  } else {
    const auto& lg = std::get<LangevinComparison>(cmp);
    const auto n = detail::whole_steps(t, lg.time_step, "langevin");
    const auto cloud0 = sample_density(mu0, lg.n_particles, lg.seed);
    const auto cloud = langevin_simulate(cloud0, c.model, lg.time_step,
                                         static_cast<double>(n) * lg.time_step, lg.seed,
                                         lg.integrator, threads);
    const auto want = phase_moments(cloud);
    res.metrics["mean_error"] = detail::mean_error(got, want);
    res.metrics["covariance_error"] = detail::covariance_error(got, want);
    res.metrics["histogram_l1_error"] = l1_distance(final_state, histogram(cloud, c.grid));
  }
  return res;
}

struct RunOptions {
  std::optional<int> threads;
  std::optional<std::size_t> snapshot_stride;
  std::optional<std::filesystem::path> output_directory;
  bool strict = false;
};

inline ExperimentConfig apply_options(ExperimentConfig c, const RunOptions& o) {
  if (o.threads) {
    require(*o.threads >= 1, ErrorCode::kConfig, "threads must be at least 1");
    c.scheme.threads = *o.threads;
  }
  if (o.snapshot_stride) c.scheme.snapshot_stride = *o.snapshot_stride;
  if (o.output_directory) c.output_directory = *o.output_directory;
  return c;
}

struct ExperimentResult {
  Trajectory trajectory;
  std::vector<SuiteResult> suites;
  std::vector<ComparisonResult> comparisons;

  bool all_suites_pass() const {
    return std::none_of(suites.begin(), suites.end(),
                        [](const SuiteResult& s) { return s.status == SuiteStatus::kFail; });
  }
};

namespace detail {

inline nlohmann::ordered_json to_json(const std::vector<SuiteResult>& suites) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& s : suites) {
    j[s.name]["status"] = to_string(s.status);
    if (!s.detail.empty()) j[s.name]["detail"] = s.detail;
  }
  return j;
}

inline nlohmann::ordered_json to_json(const std::vector<ComparisonResult>& cmps) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& c : cmps)
    for (const auto& [k, v] : c.metrics) j[c.name][k] = v;
  return j;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + p.string());
  out << j.dump(2) << '\n';
}

inline std::string dump_stem(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "density_%06zu", step);
  return buf;
}

}  // namespace detail

/// Runs the scheme and writes diagnostics.csv, density dumps for every kept
/// snapshot, and summary.json into the output directory.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  const auto mu0 = build_initial(c);
  std::filesystem::create_directories(c.output_directory);
  ExperimentResult res{run_scheme(mu0, c.model, c.scheme), {}, {}};
  const auto& traj = res.trajectory;
  write_diagnostics_csv(c.output_directory / "diagnostics.csv", traj.reports, c.model);
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const std::size_t step = traj.snapshot_steps[k];
    write_density_dump(c.output_directory / detail::dump_stem(step), traj.snapshots[k],
                       step == 0 ? 0.0 : traj.reports[step - 1].t, step);
  }
  res.suites = evaluate_suites(traj.reports, c.model, c.scheme);
  for (const auto& cmp : c.comparisons)
    res.comparisons.push_back(compare_against(cmp, c, mu0, traj.final_state(), c.scheme.threads));

  nlohmann::ordered_json s;
  s["status"] = "ok";
  s["steps"] = traj.reports.size();
  s["final_time"] = c.final_time();
  s["lipschitz_bound"] = c.model.lipschitz_M;
  s["suites"] = detail::to_json(res.suites);
  s["all_suites_pass"] = res.all_suites_pass();
  s["comparisons"] = detail::to_json(res.comparisons);
  detail::write_json(c.output_directory / "summary.json", s);
  return res;
}

/// Runs the scheme and every configured reference; writes comparison.json.
inline std::vector<ComparisonResult> run_comparisons(const ExperimentConfig& c) {
  require(!c.comparisons.empty(), ErrorCode::kConfig, "no comparisons configured");
  const auto mu0 = build_initial(c);
  std::filesystem::create_directories(c.output_directory);
  const auto traj = run_scheme(mu0, c.model, c.scheme);
  std::vector<ComparisonResult> out;
  for (const auto& cmp : c.comparisons)
    out.push_back(compare_against(cmp, c, mu0, traj.final_state(), c.scheme.threads));
  nlohmann::ordered_json j;
  j["final_time"] = c.final_time();
  j["comparisons"] = detail::to_json(out);
  detail::write_json(c.output_directory / "comparison.json", j);
  return out;
}

struct RefineRow {
  double h;
  std::size_t n_steps;
  /// "<reference>_<metric>" -> value, in a fixed order.
  std::map<std::string, double> errors;
};

struct RefineTable {
  std::vector<RefineRow> rows;
  /// Least-squares slope of log error against log h over all distinct h.
  std::map<std::string, double> fitted_slopes;
};

/// Least-squares slope of log(e) on log(h); nullopt without two distinct h.
inline std::optional<double> fit_loglog_slope(const std::vector<double>& h,
                                              const std::vector<double>& e) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < h.size(); ++k)
    if (h[k] > 0.0 && e[k] > 0.0) pts.emplace_back(std::log(h[k]), std::log(e[k]));
  if (pts.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : pts) mx += x, my += y;
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : pts) sxx += (x - mx) * (x - mx), sxy += (x - mx) * (y - my);
  if (sxx <= 0.0) return std::nullopt;
  return sxy / sxx;
}

/// Reruns the base experiment at each h to the same final time and tabulates
/// final-time errors against every configured reference. References are
/// computed once, at their own configured resolution.
inline RefineTable refine_study(const ExperimentConfig& base, const std::vector<double>& h_list) {
  require(!h_list.empty(), ErrorCode::kConfig, "h list is empty");
  require(!base.comparisons.empty(), ErrorCode::kConfig, "refinement needs configured comparisons");
  const double t = base.final_time();
  for (double h : h_list) {
    require(h > 0.0 && std::isfinite(h), ErrorCode::kConfig, "refinement steps must be positive");
    detail::whole_steps(t, h, "refinement");
  }
  const auto mu0 = build_initial(base);
  RefineTable table;
  for (double h : h_list) {
    ExperimentConfig c = base;
    c.scheme.partition.clear();
    c.scheme.h = h;
    c.scheme.n_steps = detail::whole_steps(t, h, "refinement");
    c.scheme.snapshot_stride = 0;
    const auto traj = run_scheme(mu0, c.model, c.scheme);
    RefineRow row{h, c.scheme.n_steps, {}};
    for (const auto& cmp : c.comparisons) {
      const auto r = compare_against(cmp, c, mu0, traj.final_state(), c.scheme.threads);
      for (const auto& [k, v] : r.metrics) row.errors[r.name + "_" + k] = v;
    }
    table.rows.push_back(std::move(row));
  }
  for (const auto& [key, _] : table.rows.front().errors) {
    std::vector<double> hs, es;
    for (const auto& r : table.rows) {
      hs.push_back(r.h);
      es.push_back(r.errors.at(key));
    }
    if (auto s = fit_loglog_slope(hs, es)) table.fitted_slopes[key] = *s;
  }
  return table;
}

/// CSV with one row per h; slope_* columns hold the log-log slope against the
/// previous row and are empty on the first row or when h repeats.
inline void write_refine_csv(const std::filesystem::path& path, const RefineTable& table) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> keys;
  for (const auto& [k, _] : table.rows.front().errors) keys.push_back(k);
  out << "h,n_steps";
  for (const auto& k : keys) out << ',' << k;
  for (const auto& k : keys) out << ",slope_" << k;
  out << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    out << detail::fmt17(row.h) << ',' << row.n_steps;
    for (const auto& k : keys) out << ',' << detail::fmt17(row.errors.at(k));
    for (const auto& k : keys) {
      out << ',';
      if (r == 0) continue;
      const auto& prev = table.rows[r - 1];
      const double e0 = prev.errors.at(k), e1 = row.errors.at(k);
      if (prev.h != row.h && e0 > 0.0 && e1 > 0.0)
        out << detail::fmt17(std::log(e1 / e0) / std::log(row.h / prev.h));
    }
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace vfp
