#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfp/diagnostics.hpp"
#include "vfp/error.hpp"
#include "vfp/phase_space.hpp"
#include "vfp/scheme.hpp"

namespace vfp {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t to_le(std::uint64_t u) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(u);
  return u;
}

}  // namespace detail

/// Writes `<stem>.f64` (raw little-endian doubles, x index outer) and
/// `<stem>.json` with the grid and time stamp.
inline void write_density_dump(const std::filesystem::path& stem, const PhaseDensity& mu, double t,
                               std::size_t step) {
  const auto& g = mu.grid();
  auto bin = stem;
  bin += ".f64";
  std::ofstream out(bin, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + bin.string());
  for (double v : mu.values()) {
    const std::uint64_t u = detail::to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&u), sizeof u);
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + bin.string());

  nlohmann::ordered_json side;
  side["format"] = "f64le-row-major-x-outer";
  side["x_lower"] = g.x.lower();
  side["x_upper"] = g.x.upper();
  side["x_cells"] = g.x.size();
  side["v_lower"] = g.v.lower();
  side["v_upper"] = g.v.upper();
  side["v_cells"] = g.v.size();
  side["time"] = t;
  side["step"] = step;
  auto js = stem;
  js += ".json";
  std::ofstream jo(js);
  require(static_cast<bool>(jo), ErrorCode::kIo, "cannot open " + js.string());
  jo << side.dump(2) << '\n';
}

struct DensityDump {
  PhaseDensity density;
  double t;
  std::size_t step;
};

/// Reads a dump written by write_density_dump; `stem` excludes the extension.
inline DensityDump read_density_dump(const std::filesystem::path& stem) {
  auto js = stem;
  js += ".json";
  std::ifstream ji(js);
  require(static_cast<bool>(ji), ErrorCode::kIo, "cannot open " + js.string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(ji);
    const PhaseGrid grid{Grid1D(side.at("x_lower").get<double>(), side.at("x_upper").get<double>(),
                                side.at("x_cells").get<std::size_t>()),
                         Grid1D(side.at("v_lower").get<double>(), side.at("v_upper").get<double>(),
                                side.at("v_cells").get<std::size_t>())};
    auto bin = stem;
    bin += ".f64";
    std::ifstream in(bin, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + bin.string());
    std::vector<double> rho(grid.size());
    for (double& v : rho) {
      std::uint64_t u = 0;
      in.read(reinterpret_cast<char*>(&u), sizeof u);
      require(static_cast<bool>(in), ErrorCode::kIo, bin.string() + " is shorter than the grid");
      v = std::bit_cast<double>(detail::to_le(u));
    }
    return {PhaseDensity(grid, std::move(rho)), side.at("time").get<double>(),
            side.at("step").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, js.string() + ": " + e.what());
  }
}

inline const char* diagnostics_csv_header() {
  return "step,t,H,U,m2_x,m2_v,slope_H,slope_LvaH,w2v_cost,w2x_cost,lower,observed,upper,within,"
         "el_residual,entropy_remap_error,boundary_leak,mass_renorm";
}

/// One CSV row for the state after the step.
inline std::string diagnostics_csv_row(const StepReport& r, const DissipationBracket& b) {
  using detail::fmt17;
  std::ostringstream s;
  const auto& e = r.energies_after;
  s << r.step_index + 1 << ',' << fmt17(r.t) << ',' << fmt17(e.hamiltonian.value_or(NAN)) << ','
    << fmt17(e.internal_part.value_or(NAN)) << ',' << fmt17(r.moments_after.m2_x) << ','
    << fmt17(r.moments_after.m2_v) << ',' << fmt17(r.slope_after.slope_H) << ','
    << fmt17(r.slope_after.slope_LvaH) << ',' << fmt17(r.w2v_cost) << ',' << fmt17(r.w2x_cost)
    << ',' << fmt17(b.lower - b.slack_lower) << ',' << fmt17(b.observed) << ','
    << fmt17(b.upper + b.slack_upper) << ',' << (b.within ? 1 : 0) << ',' << fmt17(r.el_residual)
    << ',' << fmt17(r.entropy_remap_error) << ',' << fmt17(r.boundary_leak) << ','
    << fmt17(r.mass_renorm);
  return s.str();
}

inline void write_diagnostics_csv(const std::filesystem::path& path,
                                  const std::vector<StepReport>& reports, const ModelSpec& spec) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string());
  out << diagnostics_csv_header() << '\n';
  for (const auto& r : reports) out << diagnostics_csv_row(r, dissipation_bracket(r, spec)) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace vfp
