#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vfp/error.hpp"
#include "vfp/fiber_jko.hpp"
#include "vfp/functionals.hpp"
#include "vfp/grid.hpp"
#include "vfp/reference.hpp"
#include "vfp/scheme.hpp"

namespace vfp {

/// One-dimensional factor of a product initial state.
struct ProfileConfig {
  enum class Kind { kGaussian, kUniform } kind = Kind::kGaussian;
  double mean = 0.0;
  double variance = 1.0;
  double lower = -1.0;
  double upper = 1.0;

  double operator()(double s) const {
    if (kind == Kind::kGaussian) return std::exp(-0.5 * (s - mean) * (s - mean) / variance);
    return (s >= lower && s <= upper) ? 1.0 : 0.0;
  }
};

struct InitialConfig {
  enum class Kind { kGibbs, kGaussian, kProduct, kFile } kind = Kind::kGibbs;
  GaussianState gaussian;
  ProfileConfig x_profile, v_profile;
  /// Dump stem without extension, resolved against the config directory.
  std::filesystem::path file;
};

struct GaussianOracleComparison {};
struct FdReferenceComparison {
  double time_step = 0.01;
};
struct LangevinComparison {
  std::size_t n_particles = 10000;
  double time_step = 0.01;
  std::uint64_t seed = 1;
  LangevinIntegrator integrator = LangevinIntegrator::kBaoab;
};
using ComparisonConfig =
    std::variant<GaussianOracleComparison, FdReferenceComparison, LangevinComparison>;

inline std::string comparison_name(const ComparisonConfig& c) {
  switch (c.index()) {
    case 0: return "gaussian_oracle";
    case 1: return "fd_reference";
    default: return "langevin";
  }
}

struct ExperimentConfig {
  ModelSpec model;
  PhaseGrid grid{Grid1D(-6.0, 6.0, 64), Grid1D(-6.0, 6.0, 64)};
  InitialConfig initial;
  SchemeConfig scheme;
  std::filesystem::path output_directory = "output";
  std::vector<ComparisonConfig> comparisons;

  double final_time() const {
    double t = 0.0;
    for (double s : scheme.steps()) t += s;
    return t;
  }
};

namespace detail {

using nlohmann::json;

// Every object is checked against its key list so a typo is an error rather
// than a silently ignored default.
inline void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, where + " must be an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.contains(k)) throw Error(ErrorCode::kConfig, "unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorCode::kConfig, "missing key '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfig, "key '" + key + "' in " + where + " has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline PotentialSpec parse_potential(const json& j) {
  const std::string w = "model.potential";
  const auto kind = get<std::string>(j, "kind", w);
  if (kind == "zero") {
    check_keys(j, w, {"kind"});
    return PotentialSpec::zero();
  }
  if (kind == "harmonic") {
    check_keys(j, w, {"kind", "stiffness"});
    return PotentialSpec::harmonic(get<double>(j, "stiffness", w));
  }
  if (kind == "double_well") {
    check_keys(j, w, {"kind", "quartic_coefficient", "quadratic_coefficient"});
    return PotentialSpec::double_well(get<double>(j, "quartic_coefficient", w),
                                      get<double>(j, "quadratic_coefficient", w));
  }
  if (kind == "polynomial") {
    check_keys(j, w, {"kind", "coefficients"});
    return PotentialSpec::polynomial(get<std::vector<double>>(j, "coefficients", w));
  }
  throw Error(ErrorCode::kConfig, "unknown potential kind '" + kind + "'");
}

inline InteractionSpec parse_interaction(const json& j) {
  const std::string w = "model.interaction";
  const auto kind = get<std::string>(j, "kind", w);
  if (kind == "none") {
    check_keys(j, w, {"kind"});
    return InteractionSpec::none();
  }
  if (kind == "harmonic") {
    check_keys(j, w, {"kind", "stiffness"});
    return InteractionSpec::harmonic(get<double>(j, "stiffness", w));
  }
  if (kind == "even_polynomial") {
    check_keys(j, w, {"kind", "even_coefficients"});
    return InteractionSpec::even_polynomial(get<std::vector<double>>(j, "even_coefficients", w));
  }
  throw Error(ErrorCode::kConfig, "unknown interaction kind '" + kind + "'");
}

inline ProfileConfig parse_profile(const json& j, const std::string& w) {
  ProfileConfig p;
  const auto kind = get<std::string>(j, "kind", w);
  if (kind == "gaussian") {
    check_keys(j, w, {"kind", "mean", "variance"});
    p.kind = ProfileConfig::Kind::kGaussian;
    p.mean = get<double>(j, "mean", w);
    p.variance = get<double>(j, "variance", w);
    require(p.variance > 0.0 && std::isfinite(p.variance), ErrorCode::kConfig,
            w + ".variance must be positive");
  } else if (kind == "uniform") {
    check_keys(j, w, {"kind", "lower", "upper"});
    p.kind = ProfileConfig::Kind::kUniform;
    p.lower = get<double>(j, "lower", w);
    p.upper = get<double>(j, "upper", w);
    require(p.lower < p.upper, ErrorCode::kConfig, w + " needs lower < upper");
  } else {
    throw Error(ErrorCode::kConfig, "unknown profile kind '" + kind + "' in " + w);
  }
  return p;
}

inline InitialConfig parse_initial(const json& j, const std::filesystem::path& base_dir) {
  const std::string w = "initial";
  InitialConfig ic;
  const auto kind = get<std::string>(j, "kind", w);
  if (kind == "gibbs") {
    check_keys(j, w, {"kind"});
    ic.kind = InitialConfig::Kind::kGibbs;
  } else if (kind == "gaussian") {
    check_keys(j, w, {"kind", "mean", "covariance"});
    ic.kind = InitialConfig::Kind::kGaussian;
    const auto m = get<std::vector<double>>(j, "mean", w);
    const auto c = get<std::vector<std::vector<double>>>(j, "covariance", w);
    require(m.size() == 2, ErrorCode::kConfig, "initial.mean must have two entries");
    require(c.size() == 2 && c[0].size() == 2 && c[1].size() == 2, ErrorCode::kConfig,
            "initial.covariance must be 2x2");
    ic.gaussian = {{m[0], m[1]}, {{{c[0][0], c[0][1]}, {c[1][0], c[1][1]}}}};
    ic.gaussian.validate();
  } else if (kind == "product") {
    check_keys(j, w, {"kind", "x_profile", "v_profile"});
    ic.kind = InitialConfig::Kind::kProduct;
    ic.x_profile = parse_profile(get<json>(j, "x_profile", w), "initial.x_profile");
    ic.v_profile = parse_profile(get<json>(j, "v_profile", w), "initial.v_profile");
  } else if (kind == "file") {
    check_keys(j, w, {"kind", "path"});
    ic.kind = InitialConfig::Kind::kFile;
    std::filesystem::path p = get<std::string>(j, "path", w);
    ic.file = p.is_absolute() ? p : base_dir / p;
    auto side = ic.file;
    side += ".json";
    require(std::filesystem::exists(side), ErrorCode::kConfig,
            "initial density dump " + side.string() + " does not exist");
  } else {
    throw Error(ErrorCode::kConfig, "unknown initial kind '" + kind + "'");
  }
  return ic;
}

inline FiberSolver parse_solver(const json& j) {
  const std::string w = "scheme.fiber_solver";
  FiberSolver s;
  const auto kind = get<std::string>(j, "kind", w);
  if (kind == "euler_lagrange_newton") {
    check_keys(j, w, {"kind", "tolerance", "max_iterations"});
    s.kind = FiberSolver::Kind::kEulerLagrangeNewton;
    s.newton_tol = get_or<double>(j, "tolerance", w, s.newton_tol);
    s.max_iterations = get_or<int>(j, "max_iterations", w, s.max_iterations);
  } else if (kind == "implicit_fd") {
    check_keys(j, w, {"kind", "inner_substeps"});
    s.kind = FiberSolver::Kind::kImplicitFD;
    s.inner_substeps = get_or<int>(j, "inner_substeps", w, s.inner_substeps);
  } else if (kind == "entropic_proximal") {
    check_keys(j, w, {"kind", "epsilon", "max_sweeps", "tolerance"});
    s.kind = FiberSolver::Kind::kEntropicProximal;
    s.epsilon = get_or<double>(j, "epsilon", w, s.epsilon);
    s.max_sweeps = get_or<int>(j, "max_sweeps", w, s.max_sweeps);
    s.sweep_tol = get_or<double>(j, "tolerance", w, s.sweep_tol);
  } else {
    throw Error(ErrorCode::kConfig, "unknown fiber solver '" + kind + "'");
  }
  require(s.newton_tol > 0.0 && s.max_iterations > 0 && s.inner_substeps > 0 && s.epsilon >= 0.0 &&
              s.max_sweeps > 0 && s.sweep_tol > 0.0,
          ErrorCode::kConfig, w + " has a nonpositive parameter");
  return s;
}

inline SchemeConfig parse_scheme(const json& j) {
  const std::string w = "scheme";
  check_keys(j, w,
             {"time_step", "n_steps", "final_time", "time_partition", "fiber_solver",
              "el_residual_tol", "marginal_tolerance", "boundary_leak_cap", "reconstruction",
              "gradient_floor_relative", "threads"});
  SchemeConfig s;
  if (j.contains("time_partition")) {
    require(!j.contains("time_step") && !j.contains("n_steps") && !j.contains("final_time"),
            ErrorCode::kConfig, "time_partition excludes time_step, n_steps and final_time");
    s.partition = get<std::vector<double>>(j, "time_partition", w);
    require(!s.partition.empty(), ErrorCode::kConfig, "time_partition is empty");
  } else {
    s.h = get<double>(j, "time_step", w);
    require(s.h > 0.0 && std::isfinite(s.h), ErrorCode::kConfig, "time_step must be positive");
    require(j.contains("n_steps") != j.contains("final_time"), ErrorCode::kConfig,
            "give exactly one of n_steps and final_time");
    if (j.contains("n_steps")) {
      const auto n = get<long long>(j, "n_steps", w);
      require(n > 0, ErrorCode::kConfig, "n_steps must be positive");
      s.n_steps = static_cast<std::size_t>(n);
    } else {
      const double t = get<double>(j, "final_time", w);
      const double n = std::round(t / s.h);
      require(t > 0.0 && n >= 1.0 && std::abs(n * s.h - t) <= 1e-9 * t, ErrorCode::kConfig,
              "final_time must be a positive multiple of time_step");
      s.n_steps = static_cast<std::size_t>(n);
    }
  }
  if (j.contains("fiber_solver")) s.fiber_solver = parse_solver(j.at("fiber_solver"));
  s.el_residual_tol = get_or<double>(j, "el_residual_tol", w, s.el_residual_tol);
  s.marginal_tolerance = get_or<double>(j, "marginal_tolerance", w, s.marginal_tolerance);
  s.boundary_leak_cap = get_or<double>(j, "boundary_leak_cap", w, s.boundary_leak_cap);
  s.gradient_floor = get_or<double>(j, "gradient_floor_relative", w, s.gradient_floor);
  s.threads = get_or<int>(j, "threads", w, s.threads);
  require(s.threads >= 1, ErrorCode::kConfig, "threads must be at least 1");
  const auto rec = get_or<std::string>(j, "reconstruction", w, "piecewise_constant");
  if (rec == "piecewise_constant")
    s.reconstruction = Reconstruction::kPiecewiseConstant;
  else if (rec == "atomic")
    s.reconstruction = Reconstruction::kAtomic;
  else
    throw Error(ErrorCode::kConfig, "unknown reconstruction '" + rec + "'");
  s.validate();
  return s;
}

inline ComparisonConfig parse_comparison(const json& j) {
  const std::string w = "comparisons[]";
  const auto kind = get<std::string>(j, "kind", w);
  if (kind == "gaussian_oracle") {
    check_keys(j, w, {"kind"});
    return GaussianOracleComparison{};
  }
  if (kind == "fd_reference") {
    check_keys(j, w, {"kind", "time_step"});
    FdReferenceComparison c{get<double>(j, "time_step", w)};
    require(c.time_step > 0.0 && std::isfinite(c.time_step), ErrorCode::kConfig,
            "fd_reference.time_step must be positive");
    return c;
  }
  if (kind == "langevin") {
    check_keys(j, w, {"kind", "n_particles", "time_step", "seed", "integrator"});
    LangevinComparison c;
    const auto n = get<long long>(j, "n_particles", w);
    require(n > 0, ErrorCode::kConfig, "langevin.n_particles must be positive");
    c.n_particles = static_cast<std::size_t>(n);
    c.time_step = get<double>(j, "time_step", w);
    require(c.time_step > 0.0 && std::isfinite(c.time_step), ErrorCode::kConfig,
            "langevin.time_step must be positive");
    c.seed = get<std::uint64_t>(j, "seed", w);
    const auto integ = get_or<std::string>(j, "integrator", w, "baoab");
    if (integ == "baoab")
      c.integrator = LangevinIntegrator::kBaoab;
    else if (integ == "euler_maruyama")
      c.integrator = LangevinIntegrator::kEulerMaruyama;
    else
      throw Error(ErrorCode::kConfig, "unknown langevin integrator '" + integ + "'");
    return c;
  }
  throw Error(ErrorCode::kConfig, "unknown comparison kind '" + kind + "'");
}

}  // namespace detail

/// Parses and validates a config document. Every failure, including
/// parameter checks of the owning types, surfaces as ErrorCode::kConfig.
inline ExperimentConfig parse_config(const nlohmann::json& doc,
                                     const std::filesystem::path& base_dir = ".") {
  using detail::get;
  try {
    detail::check_keys(doc, "config", {"model", "grid", "initial", "scheme", "outputs", "comparisons"});
    ExperimentConfig c;

    const auto& g = get<nlohmann::json>(doc, "grid", "config");
    detail::check_keys(g, "grid",
                       {"domain_halfwidth_x", "domain_halfwidth_v", "domain_center_x",
                        "domain_center_v", "cells_x", "cells_v"});
    const double hx = get<double>(g, "domain_halfwidth_x", "grid");
    const double hv = get<double>(g, "domain_halfwidth_v", "grid");
    const double cx = detail::get_or<double>(g, "domain_center_x", "grid", 0.0);
    const double cv = detail::get_or<double>(g, "domain_center_v", "grid", 0.0);
    const auto nx = get<long long>(g, "cells_x", "grid");
    const auto nv = get<long long>(g, "cells_v", "grid");
    require(hx > 0.0 && hv > 0.0 && nx >= 4 && nv >= 4, ErrorCode::kConfig,
            "grid needs positive half-widths and at least 4 cells per axis");
    c.grid = {Grid1D(cx - hx, cx + hx, static_cast<std::size_t>(nx)),
              Grid1D(cv - hv, cv + hv, static_cast<std::size_t>(nv))};

    const auto& m = get<nlohmann::json>(doc, "model", "config");
    detail::check_keys(m, "model", {"potential", "interaction", "friction", "lipschitz_bound"});
    auto potential = detail::parse_potential(get<nlohmann::json>(m, "potential", "model"));
    auto interaction = m.contains("interaction") ? detail::parse_interaction(m.at("interaction"))
                                                 : InteractionSpec::none();
    const double alpha = get<double>(m, "friction", "model");
    require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::kConfig, "model.friction must be positive");
    c.model = make_model(std::move(potential), std::move(interaction), alpha, c.grid.x);
    if (m.contains("lipschitz_bound")) {
      c.model.lipschitz_M = get<double>(m, "lipschitz_bound", "model");
      c.model.validate();
    }

    c.initial = detail::parse_initial(get<nlohmann::json>(doc, "initial", "config"), base_dir);
    if (c.initial.kind == InitialConfig::Kind::kGibbs)
      require(!c.model.interaction.present(), ErrorCode::kConfig,
              "the gibbs initial state requires interaction kind none");

    c.scheme = detail::parse_scheme(get<nlohmann::json>(doc, "scheme", "config"));

    if (doc.contains("outputs")) {
      const auto& o = doc.at("outputs");
      detail::check_keys(o, "outputs", {"directory", "snapshot_stride"});
      if (o.contains("directory")) {
        std::filesystem::path p = get<std::string>(o, "directory", "outputs");
        c.output_directory = p.is_absolute() ? p : base_dir / p;
      }
      const auto stride = detail::get_or<long long>(o, "snapshot_stride", "outputs", 0);
      require(stride >= 0, ErrorCode::kConfig, "outputs.snapshot_stride must be nonnegative");
      c.scheme.snapshot_stride = static_cast<std::size_t>(stride);
    }

    if (doc.contains("comparisons")) {
      const auto& arr = doc.at("comparisons");
      require(arr.is_array(), ErrorCode::kConfig, "comparisons must be an array");
      for (const auto& item : arr) c.comparisons.push_back(detail::parse_comparison(item));
    }
    for (const auto& cmp : c.comparisons)
      if (std::holds_alternative<GaussianOracleComparison>(cmp))
        require(c.model.potential.kind() == PotentialSpec::Kind::kHarmonic &&
                    !c.model.interaction.present(),
                ErrorCode::kConfig,
                "gaussian_oracle requires a harmonic potential and no interaction");
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    Error::rethrow_with_context(Error(ErrorCode::kConfig, e.what()), "invalid config");
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace vfp
