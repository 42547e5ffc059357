#pragma once
// Run orchestration for the command-line tool: a flat JSON configuration,
// the five commands and the files each of them writes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pinwheel/config.hpp"
#include "pinwheel/functional.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/io.hpp"
#include "pinwheel/partition.hpp"
#include "pinwheel/potential.hpp"
#include "pinwheel/scalar.hpp"
#include "pinwheel/solver.hpp"

namespace pinwheel {

struct RunConfig {
  PinwheelConfig system;

  std::string potential = "exponential"; ///< exponential | constant
  double v_inf = 1.0;
  double c0 = 0.5;
  double lambda = std::numeric_limits<double>::quiet_NaN(); ///< NaN selects sin(pi/(ell n))

  std::size_t nr = 128;
  std::size_t m = 64;
  double r_max = 14.0;
  std::size_t ns = 1;
  double s_max = 0.0;
  std::string stencil = "spectral"; ///< spectral | central

  std::size_t radial_nr = 2000;
  double radial_r_max = 24.0;

  double tol = 0.0;
  std::size_t max_iter = 200000;
  bool clamp = true;
  std::string metric = "auto"; ///< auto | sobolev | krylov | diagonal | l2
  std::vector<double> r_init;  ///< starting radii; empty selects {2, R_max/2}
  double noise = 0.0;
  std::uint64_t seed = 0;

  std::vector<double> beta_schedule{-1.0, -10.0, -100.0, -1000.0, -10000.0};
  std::vector<double> r_sweep{8.0, 10.0, 12.0, 14.0};
  double threshold = 1e-3;
  std::size_t workers = 0; ///< 0 selects the hardware concurrency
  std::size_t heatmap_size = 256;
  std::string out_dir = "pinwheel_out";

  RadialPotential make_potential() const {
    if (potential == "constant") return RadialPotential::constant(v_inf);
    const double lam = std::isfinite(lambda) ? lambda : std::sin(std::numbers::pi / (system.ell * system.n));
    return RadialPotential::exponential_well(v_inf, c0, lam);
  }

  AngularStencil angular_stencil() const {
    return stencil == "central" ? AngularStencil::Central : AngularStencil::Spectral;
  }

  GridPtr make_grid(const PinwheelConfig& cfg) const {
    return build_grid(nr, m, r_max, cfg, ns, s_max, angular_stencil());
  }

  DescentMetric descent_metric() const {
    if (metric == "sobolev") return DescentMetric::Sobolev;
    if (metric == "krylov") return DescentMetric::Krylov;
    if (metric == "diagonal") return DescentMetric::Diagonal;
    if (metric == "l2") return DescentMetric::L2;
    return DescentMetric::Auto;
  }

  std::vector<double> starts() const {
    if (!r_init.empty()) return r_init;
    return {2.0, 0.5 * r_max};
  }

  SolverOptions solver_options(double c_inf) const {
    SolverOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.clamp = clamp;
    o.metric = descent_metric();
    o.c_inf = c_inf;
    return o;
  }

  RadialSolveOptions radial_options() const {
    RadialSolveOptions o;
    o.nr = radial_nr;
    o.r_max = radial_r_max;
    return o;
  }
};

inline json to_json(const RunConfig& c) {
  json j;
  j["ell"] = c.system.ell;
  j["n"] = c.system.n;
  j["dim"] = c.system.dim;
  j["p"] = c.system.p;
  j["beta"] = c.system.beta;
  j["potential"] = c.potential;
  j["v_inf"] = c.v_inf;
  j["c0"] = c.c0;
  j["lambda"] = c.make_potential().lambda;
  j["nr"] = c.nr;
  j["m"] = c.m;
  j["r_max"] = c.r_max;
  j["ns"] = c.ns;
  j["s_max"] = c.s_max;
  j["stencil"] = c.stencil;
  j["radial_nr"] = c.radial_nr;
  j["radial_r_max"] = c.radial_r_max;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["clamp"] = c.clamp;
  j["metric"] = c.metric;
  j["r_init"] = c.starts();
  j["noise"] = c.noise;
  j["seed"] = c.seed;
  j["beta_schedule"] = c.beta_schedule;
  j["r_sweep"] = c.r_sweep;
  j["threshold"] = c.threshold;
  j["workers"] = c.workers;
  j["heatmap_size"] = c.heatmap_size;
  j["out_dir"] = c.out_dir;
  return j;
}

namespace detail {

template <class T> void read_key(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline void read_count(const json& j, const char* key, std::size_t& dst) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string("config key '") + key + "' must be a nonnegative integer");
  dst = v.get<std::size_t>();
}

} // namespace detail

/// Keys accepted in a configuration file.
inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys{
      "ell",     "n",           "dim",      "p",         "beta",       "potential",     "v_inf",
      "c0",      "lambda",      "nr",       "m",         "r_max",      "ns",            "s_max",
      "stencil", "radial_nr",   "radial_r_max", "tol",   "max_iter",   "clamp",         "metric",
      "r_init",  "noise",       "seed",     "beta_schedule", "r_sweep", "threshold",    "workers",
      "heatmap_size", "out_dir"};
  return keys;
}

/// Reads a flat configuration object; unknown keys are errors.
inline RunConfig run_config_from_json(const json& j) {
  const auto& known = run_config_keys();
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig c;
  detail::read_key(j, "ell", c.system.ell);
  detail::read_key(j, "n", c.system.n);
  detail::read_key(j, "dim", c.system.dim);
  detail::read_key(j, "p", c.system.p);
  detail::read_key(j, "beta", c.system.beta);
  detail::read_key(j, "potential", c.potential);
  detail::read_key(j, "v_inf", c.v_inf);
  detail::read_key(j, "c0", c.c0);
  if (j.contains("lambda") && !j.at("lambda").is_null()) detail::read_key(j, "lambda", c.lambda);
  detail::read_count(j, "nr", c.nr);
  detail::read_count(j, "m", c.m);
  detail::read_key(j, "r_max", c.r_max);
  detail::read_count(j, "ns", c.ns);
  detail::read_key(j, "s_max", c.s_max);
  detail::read_key(j, "stencil", c.stencil);
  detail::read_count(j, "radial_nr", c.radial_nr);
  detail::read_key(j, "radial_r_max", c.radial_r_max);
  detail::read_key(j, "tol", c.tol);
  detail::read_count(j, "max_iter", c.max_iter);
  detail::read_key(j, "clamp", c.clamp);
  detail::read_key(j, "metric", c.metric);
  detail::read_key(j, "r_init", c.r_init);
  detail::read_key(j, "noise", c.noise);
  if (j.contains("seed")) {
    std::size_t s = 0;
    detail::read_count(j, "seed", s);
    c.seed = s;
  }
  detail::read_key(j, "beta_schedule", c.beta_schedule);
  detail::read_key(j, "r_sweep", c.r_sweep);
  detail::read_key(j, "threshold", c.threshold);
  detail::read_count(j, "workers", c.workers);
  detail::read_count(j, "heatmap_size", c.heatmap_size);
  detail::read_key(j, "out_dir", c.out_dir);
  return c;
}

/// Command-line override "key=value"; the value is parsed as JSON when possible.
inline void apply_override(json& j, const std::string& key, const std::string& value) {
  try {
    j[key] = json::parse(value);
  } catch (const json::exception&) {
    j[key] = value;
  }
}

enum class Command { Scalar, Solve, SweepBeta, TestFn, Partition };

inline std::string command_name(Command c) {
  switch (c) {
  case Command::Scalar: return "scalar";
  case Command::Solve: return "solve";
  case Command::SweepBeta: return "sweep-beta";
  case Command::TestFn: return "testfn";
  case Command::Partition: return "partition";
  }
  return "";
}

namespace detail {

inline void check_schedule(const std::vector<double>& s) {
  if (s.empty()) throw ConfigError("beta_schedule is empty");
  for (double b : s)
    if (!(b < 0.0)) throw ConfigError("beta_schedule entries must be negative");
  for (std::size_t i = 2; i < s.size(); ++i)
    if ((s[i] > s[i - 1]) != (s[1] > s[0])) throw ConfigError("beta_schedule must be strictly monotone");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] == s[i - 1]) throw ConfigError("beta_schedule must be strictly monotone");
}

} // namespace detail

/// Joint validation before anything is written.
inline void validate(const RunConfig& c, Command cmd) {
  const bool scalar_only = cmd == Command::Scalar;
  if (scalar_only) {
    c.system.validate_common();
  } else {
    c.system.validate();
  }
  if (c.potential != "exponential" && c.potential != "constant")
    throw ConfigError("potential must be 'exponential' or 'constant'");
  if (c.stencil != "spectral" && c.stencil != "central") throw ConfigError("stencil must be 'spectral' or 'central'");
  if (c.metric != "auto" && c.metric != "sobolev" && c.metric != "krylov" && c.metric != "diagonal" && c.metric != "l2")
    throw ConfigError("metric must be one of auto, sobolev, krylov, diagonal, l2");
  const auto v = c.make_potential();
  // the scalar command only needs inf V > 0; the system needs the full hypotheses
  const auto chk = validate(v, std::max(c.system.ell, 1), c.system.n);
  const bool need_decay = !scalar_only;
  if (!chk.positive || (need_decay && !chk.decay)) {
    std::string why = "inadmissible potential:";
    for (const auto& r : chk.reasons) why += " " + r + ";";
    throw ConfigError(why);
  }
  if (!(c.radial_r_max > 0.0) || c.radial_nr < 16) throw ConfigError("radial grid needs radial_nr >= 16 and radial_r_max > 0");
  if (!(c.tol >= 0.0)) throw ConfigError("tol must be nonnegative");
  if (!(c.noise >= 0.0)) throw ConfigError("noise must be nonnegative");
  if (c.heatmap_size < 8) throw ConfigError("heatmap_size must be >= 8");
  if (c.out_dir.empty()) throw ConfigError("out_dir is empty");
  if (scalar_only && c.system.dim == 1) return;
  // grid divisibility and shape checks live in the grid constructor
  auto gcfg = c.system;
  if (scalar_only) gcfg = PinwheelConfig::scalar(c.system.n, c.system.dim, c.system.p);
  (void)c.make_grid(gcfg);
  for (double r : c.starts())
    if (!(r >= 0.0) || !(r < c.r_max)) throw ConfigError("r_init entries must lie in [0, r_max)");
  if (cmd == Command::SweepBeta || cmd == Command::Partition) detail::check_schedule(c.beta_schedule);
  if (cmd == Command::TestFn) {
    if (c.r_sweep.size() < 3) throw ConfigError("r_sweep needs at least 3 radii");
    auto s = c.r_sweep;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ConfigError("r_sweep radii must be distinct");
    if (!(s.front() > 0.0)) throw ConfigError("r_sweep radii must be positive");
  }
  if (cmd == Command::Partition && !(c.threshold > 0.0 && c.threshold < 1.0))
    throw ConfigError("threshold must lie in (0, 1)");
}

/// What a command produced.
struct RunOutcome {
  bool converged = true;
  json summary;
  std::vector<std::filesystem::path> files; ///< relative to the output directory
};

using Logger = std::function<void(const std::string&)>;

namespace detail {

inline void say(const Logger& log, const std::string& s) {
  if (log) log(s);
}

inline void write_trace(const std::filesystem::path& path, const SolveReport& r, std::size_t stride) {
  CsvWriter csv(path, {"iteration", "energy"});
  for (std::size_t i = 0; i < r.energy_trace.size(); ++i)
    csv.row({static_cast<double>(i), r.energy_trace[i]});
  CsvWriter bnd(path.parent_path() / (path.stem().string() + "_boundary.csv"), {"iteration", "boundary_fraction"});
  for (std::size_t i = 0; i < r.boundary_trace.size(); ++i)
    bnd.row({static_cast<double>(i * stride), r.boundary_trace[i]});
}

inline json grid_json(const PolarGrid& g) {
  return json{{"nr", g.nr()},       {"m", g.m()},         {"ns", g.ns()},
              {"r_max", g.r_max()}, {"s_max", g.s_max()}, {"dr", g.dr()},
              {"stencil", g.stencil() == AngularStencil::Spectral ? "spectral" : "central"}};
}

/// Multi-start minimisation; the lowest converged energy wins, otherwise the lowest energy.
struct MultiStart {
  SolveReport best;
  double r_init = 0.0;
  json candidates = json::array();
};

inline MultiStart solve_multistart(const RunConfig& c, const PinwheelConfig& cfg, const RadialPotential& v,
                                   const GridPtr& grid, double c_inf, const Logger& log) {
  MultiStart out;
  bool have = false;
  for (double r0 : c.starts()) {
    const auto init = default_initial_guess(cfg, grid, v, r0, c.seed, c.noise);
    auto rep = minimize(cfg, v, grid, init, c.solver_options(c_inf));
    say(log, "  start r_init=" + std::to_string(r0) + ": E=" + std::to_string(rep.energy) + " " + rep.status);
    out.candidates.push_back(json{{"r_init", r0},
                                  {"energy", rep.energy},
                                  {"status", rep.status},
                                  {"iterations", rep.iterations}});
    const bool better = !have || (rep.converged && !out.best.converged) ||
                        (rep.converged == out.best.converged && rep.energy < out.best.energy);
    if (better) {
      out.best = std::move(rep);
      out.r_init = r0;
      have = true;
    }
  }
  return out;
}

/// Continuation over the schedule; a failing point is recorded and the sweep goes on.
struct Sweep {
  std::vector<SolveReport> reports;
  json failures = json::array();
  double r_init = 0.0;
};

inline Sweep sweep_schedule(const RunConfig& c, const RadialPotential& v, const GridPtr& grid, double c_inf,
                            const Logger& log) {
  Sweep out;
  auto cfg = c.system;
  ComponentField start(grid);
  bool first = true;
  for (double beta : c.beta_schedule) {
    cfg.beta = beta;
    say(log, "beta = " + std::to_string(beta));
    try {
      if (first) {
        auto ms = solve_multistart(c, cfg, v, grid, c_inf, log);
        out.r_init = ms.r_init;
        out.reports.push_back(std::move(ms.best));
      } else {
        const EnergyModel model(cfg, grid, v);
        if (!model.terms(start.values).admissible(beta)) start = segregate(start, cfg.ell);
        out.reports.push_back(minimize(cfg, v, grid, start, c.solver_options(c_inf)));
        say(log, "  E=" + std::to_string(out.reports.back().energy) + " " + out.reports.back().status);
      }
      start = out.reports.back().field;
      first = false;
    } catch (const Error& e) {
      out.failures.push_back(json{{"beta", beta}, {"error", e.what()}});
      say(log, std::string("  failed: ") + e.what());
    }
  }
  return out;
}

inline std::string point_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "point_" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

inline void write_heatmaps(const std::filesystem::path& dir, const std::string& stem, const ComponentField& u1,
                           int ell, std::size_t size, std::vector<std::filesystem::path>& files) {
  for (int j = 0; j < ell; ++j) {
    const std::string name = stem + "_" + std::to_string(j + 1) + ".pgm";
    write_pgm(dir / name, size, size, render_component(u1, ell, j, size));
    files.emplace_back(name);
  }
}

} // namespace detail

/// c_inf, c^{G_n} and their ordering.
inline RunOutcome run_scalar(const RunConfig& c, const std::filesystem::path& dir, const Logger& log = {}) {
  RunOutcome out;
  const auto& s = c.system;
  const auto omega = ground_state_radial(s.dim, c.v_inf, s.p, c.radial_options());
  detail::say(log, "c_inf = " + std::to_string(omega.energy));
  json sum;
  sum["c_inf"] = omega.energy;
  sum["ground_state"] = to_json(omega);
  {
    CsvWriter csv(dir / "omega.csv", {"r", "omega"});
    for (std::size_t i = 0; i < omega.profile.size(); ++i) csv.row({omega.grid.r(i), omega.profile[i]});
    out.files.emplace_back("omega.csv");
  }
  if (s.dim >= 2) {
    const auto v = c.make_potential();
    const auto scfg = PinwheelConfig::scalar(s.n, s.dim, s.p);
    const auto grid = c.make_grid(scfg);
    auto opts = c.solver_options(omega.energy);
    const auto gn = ground_state_Gn(v, s.n, s.p, grid, opts);
    detail::say(log, "c^Gn = " + std::to_string(gn.energy) + " " + gn.report.status);
    const double tol = 1e-6 * s.n * omega.energy;
    sum["c_Gn"] = gn.energy;
    sum["c_Gn_status"] = gn.report.status;
    sum["c_Gn_candidates"] = gn.candidates;
    sum["n_c_inf"] = s.n * omega.energy;
    sum["c_Gn_below_n_c_inf"] = gn.energy <= s.n * omega.energy + tol;
    sum["lower_bound_ell_c_Gn"] = s.ell * gn.energy;
    sum["grid"] = detail::grid_json(*grid);
    write_field(dir / "gn_field.bin", gn.field, scfg);
    out.files.emplace_back("gn_field.bin");
    write_pgm(dir / "gn_field.pgm", c.heatmap_size, c.heatmap_size, render_component(gn.field, 1, 0, c.heatmap_size));
    out.files.emplace_back("gn_field.pgm");
    out.converged = gn.report.converged;
  }
  out.summary = sum;
  write_json(dir / "summary.json", sum);
  out.files.emplace_back("summary.json");
  return out;
}

/// Least-energy pinwheel solution at the configured beta.
inline RunOutcome run_solve(const RunConfig& c, const std::filesystem::path& dir, const Logger& log = {}) {
  RunOutcome out;
  const auto v = c.make_potential();
  const auto grid = c.make_grid(c.system);
  const double c_inf = ground_state_radial(c.system.dim, c.v_inf, c.system.p, c.radial_options()).energy;
  detail::say(log, "c_inf = " + std::to_string(c_inf));
  auto ms = detail::solve_multistart(c, c.system, v, grid, c_inf, log);
  const auto& r = ms.best;
  json rep = to_json(r);
  rep["r_init"] = ms.r_init;
  rep["starts"] = ms.candidates;
  rep["grid"] = detail::grid_json(*grid);
  rep["overlap"] = overlap(r.field, r.config).overlap;
  write_json(dir / "report.json", rep);
  out.files.emplace_back("report.json");
  detail::write_trace(dir / "trace.csv", r, 100);
  out.files.emplace_back("trace.csv");
  out.files.emplace_back("trace_boundary.csv");
  write_field(dir / "field.bin", r.field, r.config);
  out.files.emplace_back("field.bin");
  detail::write_heatmaps(dir, "component", r.field, c.system.ell, c.heatmap_size, out.files);
  out.converged = r.converged;
  out.summary = rep;
  return out;
}

/// Continuation in beta with per-point reports and an aggregate table.
inline RunOutcome run_sweep_beta(const RunConfig& c, const std::filesystem::path& dir, const Logger& log = {}) {
  RunOutcome out;
  const auto v = c.make_potential();
  const auto grid = c.make_grid(c.system);
  const double c_inf = ground_state_radial(c.system.dim, c.v_inf, c.system.p, c.radial_options()).energy;
  const auto scfg = PinwheelConfig::scalar(c.system.n, c.system.dim, c.system.p);
  const auto gn = ground_state_Gn(v, c.system.n, c.system.p, c.make_grid(scfg), c.solver_options(c_inf));
  detail::say(log, "c_inf = " + std::to_string(c_inf) + ", c^Gn = " + std::to_string(gn.energy));
  const auto sw = detail::sweep_schedule(c, v, grid, c_inf, log);

  CsvWriter table(dir / "table.csv", {"beta", "energy", "component_energy", "component_over_c_Gn", "overlap",
                                      "margin", "iterations", "converged", "radiality", "boundary_fraction"});
  out.files.emplace_back("table.csv");
  json points = json::array();
  for (std::size_t i = 0; i < sw.reports.size(); ++i) {
    const auto& r = sw.reports[i];
    const double ov = overlap(r.field, r.config).overlap[0][1];
    table.row({r.config.beta, r.energy, r.component_energy, r.component_energy / gn.energy, ov, r.margin,
               static_cast<double>(r.iterations), r.converged ? 1.0 : 0.0, r.radiality, r.boundary_fraction});
    const auto sub = std::filesystem::path(detail::point_name(i));
    std::filesystem::create_directories(dir / sub);
    auto j = to_json(r);
    j["overlap"] = ov;
    write_json(dir / sub / "report.json", j);
    write_field(dir / sub / "field.bin", r.field, r.config);
    out.files.push_back(sub / "report.json");
    out.files.push_back(sub / "field.bin");
    points.push_back(j);
    out.converged = out.converged && r.converged;
  }
  if (!sw.failures.empty()) out.converged = false;

  json sum;
  sum["c_inf"] = c_inf;
  sum["c_Gn"] = gn.energy;
  sum["r_init"] = sw.r_init;
  sum["grid"] = detail::grid_json(*grid);
  sum["points"] = points;
  sum["failures"] = sw.failures;
  if (!sw.reports.empty()) {
    const auto& last = sw.reports.back();
    sum["tail_beta"] = last.config.beta;
    sum["tail_relative_gap"] = std::abs(last.component_energy - gn.energy) / gn.energy;
    // component energies along the schedule, compared up to the solver tolerance
    bool mono = true;
    for (std::size_t i = 2; i < sw.reports.size(); ++i) {
      const double d0 = sw.reports[i - 1].component_energy - sw.reports[i - 2].component_energy;
      const double d1 = sw.reports[i].component_energy - sw.reports[i - 1].component_energy;
      if (d0 * d1 < 0.0 && std::abs(d1) > 1e-6 * gn.energy) mono = false;
    }
    sum["tail_monotone"] = mono;
  }
  write_json(dir / "summary.json", sum);
  out.files.emplace_back("summary.json");
  out.summary = sum;
  return out;
}

/// Test-tuple energies over the radius sweep and the fitted gap decay.
inline RunOutcome run_testfn(const RunConfig& c, const std::filesystem::path& dir, const Logger& log = {}) {
  RunOutcome out;
  const auto v = c.make_potential();
  const auto omega = ground_state_radial(c.system.dim, c.v_inf, c.system.p, c.radial_options());
  const auto grid = c.make_grid(c.system);
  const std::size_t npts = c.r_sweep.size();
  std::vector<TestTuple> tuples(npts);
  std::vector<std::string> errors(npts);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < npts; i = next++) {
      const double radius = c.r_sweep[i];
      try {
        try {
          tuples[i] = build_test_tuple(radius, c.system, omega, v, grid);
        } catch (const OverlapError&) {
          // the tuple does not fit on the grid: radial-coordinate energy only
          tuples[i] = build_test_tuple(radius, c.system, omega, v);
        }
        const auto sub = std::filesystem::path(detail::point_name(i));
        std::filesystem::create_directories(dir / sub);
        const auto& t = tuples[i];
        write_json(dir / sub / "tuple.json",
                   json{{"radius", t.radius}, {"bump_radius", t.bump_radius}, {"eps", t.eps}, {"t_R", t.t_r},
                        {"energy", t.energy}, {"limit", t.limit}, {"gap", t.gap},
                        {"grid_energy", number(t.grid_energy)}, {"max_overlap", t.max_overlap}});
        std::lock_guard lock(log_mutex);
        detail::say(log, "R = " + std::to_string(radius) + ": energy " + std::to_string(t.energy) + ", gap " +
                             std::to_string(t.gap));
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t nw = std::max<std::size_t>(
      1, std::min(npts, c.workers ? c.workers : std::max(1u, std::thread::hardware_concurrency())));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(worker);
  }

  std::vector<DecaySample> samples;
  json pts = json::array(), failures = json::array();
  CsvWriter table(dir / "table.csv", {"radius", "bump_radius", "t_R", "energy", "limit", "gap", "grid_energy"});
  out.files.emplace_back("table.csv");
  bool all_below = true;
  for (std::size_t i = 0; i < npts; ++i) {
    if (!errors[i].empty()) {
      failures.push_back(json{{"radius", c.r_sweep[i]}, {"error", errors[i]}});
      continue;
    }
    const auto& t = tuples[i];
    table.row({t.radius, t.bump_radius, t.t_r, t.energy, t.limit, t.gap, t.grid_energy});
    out.files.push_back(std::filesystem::path(detail::point_name(i)) / "tuple.json");
    samples.push_back({t.radius, t.energy});
    all_below = all_below && t.energy < t.limit;
    pts.push_back(json{{"radius", t.radius}, {"energy", t.energy}, {"gap", t.gap}});
  }
  json sum;
  sum["c_inf"] = omega.energy;
  sum["limit"] = c.system.ell * c.system.n * omega.energy;
  sum["points"] = pts;
  sum["failures"] = failures;
  sum["all_below_limit"] = all_below;
  const double expected = v.lambda * std::sqrt(v.v_inf);
  sum["expected_rate"] = expected;
  try {
    const auto fit = decay_fit(samples, omega.energy, c.system);
    sum["rate"] = fit.rate;
    sum["intercept"] = fit.intercept;
    sum["rate_relative_error"] = std::abs(fit.rate - expected) / expected;
  } catch (const Error& e) {
    sum["fit_error"] = e.what();
    out.converged = false;
  }
  if (!failures.empty()) out.converged = false;
  write_json(dir / "summary.json", sum);
  out.files.emplace_back("summary.json");
  out.summary = sum;
  return out;
}

/// Segregation analysis along the beta schedule.
inline RunOutcome run_partition(const RunConfig& c, const std::filesystem::path& dir, const Logger& log = {}) {
  RunOutcome out;
  const auto v = c.make_potential();
  const auto grid = c.make_grid(c.system);
  const double c_inf = ground_state_radial(c.system.dim, c.v_inf, c.system.p, c.radial_options()).energy;
  const auto sw = detail::sweep_schedule(c, v, grid, c_inf, log);
  json sum;
  sum["grid"] = detail::grid_json(*grid);
  sum["failures"] = sw.failures;
  if (!sw.failures.empty()) out.converged = false;
  for (const auto& r : sw.reports) out.converged = out.converged && r.converged;
  if (sw.reports.empty()) {
    write_json(dir / "summary.json", sum);
    out.files.emplace_back("summary.json");
    out.summary = sum;
    out.converged = false;
    return out;
  }

  const auto trace = segregation_trace(sw.reports, v, c.threshold);
  {
    CsvWriter csv(dir / "segregation.csv", {"beta", "overlap", "beta_overlap", "interface_product"});
    for (const auto& row : trace.rows) csv.row({row.beta, row.overlap, row.weighted, row.interface_product});
    out.files.emplace_back("segregation.csv");
  }
  sum["overlap_decreasing"] = trace.overlap_decreasing;
  sum["beta_overlap_decreasing"] = trace.weighted_decreasing;
  sum["trend_checked"] = trace.trend_checked;

  if (c.system.ell == 2) {
    CsvWriter csv(dir / "sign_changing.csv",
                  {"beta", "residual", "antisymmetry", "component_energy", "scalar_energy", "identity_error"});
    json rows = json::array();
    for (const auto& r : sw.reports) {
      const auto sc = sign_changing(r.field, r.config, v);
      csv.row({r.config.beta, sc.residual, sc.antisymmetry, sc.component_energy, sc.scalar_energy, sc.identity_error});
      auto j = to_json(sc);
      j["beta"] = r.config.beta;
      rows.push_back(j);
    }
    out.files.emplace_back("sign_changing.csv");
    sum["sign_changing"] = rows;
  }

  const auto& last = sw.reports.back();
  const auto part = extract_partition(last.field, last.config, v, c.threshold);
  const auto iface = interface_diagnostics(last.field, last.config, part);
  sum["beta"] = last.config.beta;
  sum["energy"] = last.energy;
  sum["partition"] = to_json(part);
  sum["interface"] = to_json(iface);
  {
    CsvWriter csv(dir / "interface.csv", {"node_a", "node_b", "comp_a", "comp_b", "grad_a", "grad_b", "mismatch"});
    for (const auto& rec : iface.records)
      csv.row({static_cast<double>(rec.node_a), static_cast<double>(rec.node_b), static_cast<double>(rec.comp_a),
               static_cast<double>(rec.comp_b), rec.grad_a, rec.grad_b, rec.mismatch});
    out.files.emplace_back("interface.csv");
  }
  for (std::size_t j = 0; j < part.masks.size(); ++j) {
    PartitionResult single = part;
    for (std::size_t k = 0; k < single.masks.size(); ++k)
      if (k != j) std::fill(single.masks[k].begin(), single.masks[k].end(), 0);
    // a lone mask is drawn at its own level; rescale to full white
    auto px = render_labels(single, c.heatmap_size);
    for (auto& q : px) q = q ? 65535 : 0;
    const std::string name = "mask_" + std::to_string(j + 1) + ".pgm";
    write_pgm(dir / name, c.heatmap_size, c.heatmap_size, px);
    out.files.emplace_back(name);
  }
  write_pgm(dir / "labels.pgm", c.heatmap_size, c.heatmap_size, render_labels(part, c.heatmap_size));
  out.files.emplace_back("labels.pgm");
  write_field(dir / "field.bin", last.field, last.config);
  out.files.emplace_back("field.bin");
  write_json(dir / "summary.json", sum);
  out.files.emplace_back("summary.json");
  out.summary = sum;
  return out;
}

/// Validates, runs the command into c.out_dir and writes the manifest.
/// Exit status: 0 success, 1 nonconvergence or run failure, 2 invalid configuration.
inline int execute(Command cmd, const RunConfig& c, const Logger& log = {}, RunOutcome* result = nullptr) {
  try {
    validate(c, cmd);
  } catch (const ConfigError& e) {
    detail::say(log, std::string("invalid configuration: ") + e.what());
    return 2;
  }
  const std::filesystem::path dir = c.out_dir;
  std::filesystem::create_directories(dir);
  RunOutcome out;
  int status = 0;
  try {
    switch (cmd) {
    case Command::Scalar: out = run_scalar(c, dir, log); break;
    case Command::Solve: out = run_solve(c, dir, log); break;
    case Command::SweepBeta: out = run_sweep_beta(c, dir, log); break;
    case Command::TestFn: out = run_testfn(c, dir, log); break;
    case Command::Partition: out = run_partition(c, dir, log); break;
    }
    status = out.converged ? 0 : 1;
  } catch (const Error& e) {
    detail::say(log, std::string("run failed: ") + e.what());
    out.summary = json{{"error", e.what()}};
    write_json(dir / "error.json", out.summary);
    out.files.emplace_back("error.json");
    out.converged = false;
    status = 1;
  }
  write_manifest(dir, command_name(cmd), to_json(c), out.files);
  if (result) *result = std::move(out);
  return status;
}

} // namespace pinwheel
