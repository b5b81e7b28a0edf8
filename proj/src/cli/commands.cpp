#include "contagion/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "contagion/clearing.hpp"
#include "contagion/cli/config.hpp"
#include "contagion/error.hpp"
#include "contagion/io.hpp"
#include "contagion/liquidity.hpp"
#include "contagion/meanfield.hpp"
#include "contagion/montecarlo.hpp"
#include "contagion/particle.hpp"
#include "contagion/rng.hpp"

namespace contagion::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, x >>= 4) s[static_cast<std::size_t>(i)] = digits[x & 0xf];
  return s;
}

std::string scenario_name(const std::string& stem, std::size_t s) {
  std::string n = std::to_string(s);
  if (n.size() < 4) n.insert(0, 4 - n.size(), '0');
  return stem + "_" + n + ".csv";
}

// Output directory with a record of every file written, in order.
class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw ValidationError("out", "an output directory is required");
    fs::create_directories(dir_);
  }

  io::CsvWriter csv(const std::string& name, const std::vector<std::string>& header) {
    files_.push_back(name);
    return io::CsvWriter(path(name), header);
  }

  void write_json(const std::string& name, const json& j) {
    files_.push_back(name);
    std::ofstream(path(name), std::ios::binary) << j.dump(2) << '\n';
  }

  void manifest(const CommandOptions& opt, const ScenarioConfig& cfg, const std::string& config_text,
                json parameters) {
    json m;
    m["command"] = opt.command;
    m["config_hash"] = hex64(io::fnv1a(config_text));
    m["seed"] = cfg.seed;
    m["parameters"] = std::move(parameters);
    m["versions"] = {{"contagion", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    std::vector<std::string> files = files_;
    std::sort(files.begin(), files.end());
    m["outputs"] = files;
    std::ofstream(path("manifest.json"), std::ios::binary) << m.dump(2) << '\n';
  }

 private:
  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }
  std::string dir_;
  std::vector<std::string> files_;
};

void write_trajectories(Outputs& out, const std::string& name, const std::string& column,
                        const TimeGrid& grid, const Eigen::MatrixXd& values) {
  auto w = out.csv(name, {"time", "bank", column});
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (std::size_t m = 0; m < grid.points(); ++m)
      w.row(grid[m], static_cast<long long>(i), values(i, static_cast<Eigen::Index>(m)));
}

struct DefaultRow {
  std::size_t scenario;
  std::size_t bank;
  double tau;
  std::size_t wave;
  std::string cause;
};

std::vector<DefaultRow> default_rows(std::size_t s, const SolvencyState& state,
                                     const std::vector<DefaultCause>* cause = nullptr) {
  std::vector<DefaultRow> rows;
  for (const auto& ev : state.events) {
    for (auto b : ev.defaults()) {
      std::size_t w = 0;
      while (w < ev.waves.size() && std::find(ev.waves[w].begin(), ev.waves[w].end(), b) == ev.waves[w].end()) ++w;
      rows.push_back({s, b, ev.time, w, cause ? to_string((*cause)[b]) : std::string()});
    }
  }
  return rows;
}

json default_summary(const std::vector<std::vector<DefaultRow>>& rows,
                     const std::vector<const SolvencyState*>& states, std::size_t banks) {
  json j;
  std::vector<std::size_t> per_scenario;
  std::vector<std::size_t> per_bank(banks, 0);
  std::size_t total = 0;
  for (const auto& r : rows) {
    per_scenario.push_back(r.size());
    total += r.size();
    for (const auto& d : r) ++per_bank[d.bank];
  }
  std::map<std::size_t, std::size_t> depth;
  std::size_t events = 0;
  for (const auto* st : states)
    for (const auto& ev : st->events) ++depth[ev.waves.size()], ++events;
  json hist = json::array();
  for (const auto& [d, c] : depth) hist.push_back({{"depth", d}, {"events", c}});
  j["scenarios"] = rows.size();
  j["total_defaults"] = total;
  j["events"] = events;
  j["default_counts"] = per_scenario;
  j["bank_default_counts"] = per_bank;
  j["cascade_depth_histogram"] = hist;
  return j;
}

void write_defaults(Outputs& out, const std::vector<std::vector<DefaultRow>>& rows, bool with_cause) {
  std::vector<std::string> header{"scenario", "bank", "tau", "wave_index"};
  if (with_cause) header.push_back("cause");
  auto w = out.csv("defaults.csv", header);
  for (const auto& r : rows)
    for (const auto& d : r) {
      if (with_cause)
        w.row(d.scenario, d.bank, d.tau, d.wave, d.cause);
      else
        w.row(d.scenario, d.bank, d.tau, d.wave);
    }
}

struct Context {
  CommandOptions opt;
  ScenarioConfig cfg;
  std::string config_text;
};

std::uint64_t scenario_seed(const ScenarioConfig& cfg, std::size_t s) {
  return rng::hash(rng::derive_seed(cfg.seed, rng::kPaths), 0, s);
}

json base_parameters(const ScenarioConfig& cfg) {
  return {{"grid_steps", cfg.grid_steps}, {"R", cfg.R}, {"rho", cfg.rho}, {"horizon", cfg.horizon()}};
}

int run_finite(Context& c) {
  const auto sys = build_finite_system(c.cfg, c.cfg.seed);
  const auto grid = c.cfg.grid();
  const auto kind = c.cfg.clearing == "least" ? ClearingKind::least : ClearingKind::greatest;
  auto sols = run_scenarios(c.cfg.paths, c.opt.workers, [&](std::size_t s) {
    const auto paths = simulate_paths(sys.model, sys.x0, grid, scenario_seed(c.cfg, s));
    return solve_clearing(paths, sys.net, c.cfg.R, kind);
  });
  Outputs out(c.opt.out);
  std::vector<std::vector<DefaultRow>> rows;
  std::vector<const SolvencyState*> states;
  for (std::size_t s = 0; s < sols.size(); ++s) {
    write_trajectories(out, scenario_name("capital", s), "K", grid, sols[s].K);
    rows.push_back(default_rows(s, sols[s].state));
    states.push_back(&sols[s].state);
  }
  write_defaults(out, rows, false);
  auto summary = default_summary(rows, states, sys.net.size());
  summary["clearing"] = c.cfg.clearing;
  out.write_json("summary.json", summary);
  auto params = base_parameters(c.cfg);
  params["paths"] = c.cfg.paths;
  params["clearing"] = c.cfg.clearing;
  out.manifest(c.opt, c.cfg, c.config_text, params);
  return kExitOk;
}

int run_particle(Context& c) {
  const auto sys = build_finite_system(c.cfg, c.cfg.seed);
  const auto grid = c.cfg.grid();
  struct Result {
    ParticleState state;
    EquivalenceReport eq;
  };
  auto res = run_scenarios(c.cfg.paths, c.opt.workers, [&](std::size_t s) {
    const auto paths = simulate_paths(sys.model, sys.x0, grid, scenario_seed(c.cfg, s));
    Result r{simulate_particle_system(paths, sys.net, c.cfg.R), {}};
    if (c.opt.check_equivalence) r.eq = compare_formulations(paths, sys.net, c.cfg.R);
    return r;
  });
  Outputs out(c.opt.out);
  std::vector<std::vector<DefaultRow>> rows;
  std::vector<const SolvencyState*> states;
  for (std::size_t s = 0; s < res.size(); ++s) {
    write_trajectories(out, scenario_name("distance", s), "X", grid, res[s].state.X);
    rows.push_back(default_rows(s, res[s].state.solvency));
    states.push_back(&res[s].state.solvency);
  }
  write_defaults(out, rows, false);
  auto summary = default_summary(rows, states, sys.net.size());
  if (c.opt.check_equivalence) {
    auto w = out.csv("equivalence.csv",
                     {"scenario", "events", "default_sets_match", "max_event_time_gap", "max_distance_gap"});
    bool all = true;
    double tgap = 0.0, xgap = 0.0;
    for (std::size_t s = 0; s < res.size(); ++s) {
      const auto& e = res[s].eq;
      w.row(s, e.events, e.default_sets_match ? 1 : 0, e.max_event_time_gap, e.max_distance_gap);
      all = all && e.default_sets_match;
      tgap = std::max(tgap, e.max_event_time_gap);
      xgap = std::max(xgap, e.max_distance_gap);
    }
    summary["equivalence"] = {{"default_sets_match", all},
                              {"max_event_time_gap", tgap},
                              {"max_distance_gap", xgap}};
  }
  out.write_json("summary.json", summary);
  auto params = base_parameters(c.cfg);
  params["paths"] = c.cfg.paths;
  params["check_equivalence"] = c.opt.check_equivalence;
  out.manifest(c.opt, c.cfg, c.config_text, params);
  return kExitOk;
}

int run_meanfield(Context& c) {
  const auto problem = c.cfg.mean_field_problem();
  const auto grid = c.cfg.grid();
  const auto B0 = brownian_path(grid, rng::derive_seed(c.cfg.b0_seed, rng::kCommonNoise), 0);
  MeanFieldOptions mo;
  mo.particles = c.cfg.particles;
  mo.seed = c.cfg.seed;
  mo.hist_bins = c.cfg.hist_bins;
  mo.hist_max = c.cfg.hist_max;
  mo.hist_every = c.cfg.hist_every;
  mo.parallel = true;
  const auto st = solve_mean_field(problem, B0, grid, mo);

  Outputs out(c.opt.out);
  {
    auto w = out.csv("losses.csv", {"time", "l", "L"});
    for (Eigen::Index l = 0; l < st.losses.rows(); ++l)
      for (std::size_t m = 0; m < grid.points(); ++m) w.row(grid[m], static_cast<long long>(l), st.losses(l, static_cast<Eigen::Index>(m)));
  }
  {
    auto w = out.csv("default_fraction.csv", {"time", "type", "fraction"});
    for (Eigen::Index a = 0; a < st.cond_default.rows(); ++a)
      for (std::size_t m = 0; m < grid.points(); ++m)
        w.row(grid[m], static_cast<long long>(a), st.cond_default(a, static_cast<Eigen::Index>(m)));
  }
  {
    auto w = out.csv("density.csv", {"time", "type", "bin_left", "bin_right", "mass"});
    for (std::size_t a = 0; a < problem.dist.size(); ++a)
      for (const auto& snap : st.density)
        for (std::size_t b = 0; b + 1 < st.hist_edges.size(); ++b)
          w.row(snap.time, a, st.hist_edges[b], st.hist_edges[b + 1], snap.mass[a][b]);
  }
  {
    auto w = out.csv("jumps.csv", {"time", "step", "max_increment", "diffusive", "residual", "eps", "stabilized"});
    for (const auto& j : st.jumps)
      w.row(j.time, j.step, j.max_increment, j.diffusive, j.residual, j.eps, j.stabilized ? 1 : 0);
  }
  {
    auto w = out.csv("common_noise.csv", {"time", "B0"});
    for (std::size_t m = 0; m < grid.points(); ++m) w.row(grid[m], B0[m]);
  }
  json summary;
  summary["particles"] = c.cfg.particles;
  summary["type_counts"] = st.type_counts;
  summary["largest_step_increment"] = st.largest_step_increment();
  summary["jumps"] = st.jumps.size();
  summary["warnings"] = st.warnings;
  std::vector<double> final_fraction;
  for (Eigen::Index a = 0; a < st.cond_default.rows(); ++a)
    final_fraction.push_back(st.cond_default(a, st.cond_default.cols() - 1));
  summary["final_default_fraction"] = final_fraction;
  out.write_json("summary.json", summary);
  auto params = base_parameters(c.cfg);
  params["particles"] = c.cfg.particles;
  params["b0_seed"] = c.cfg.b0_seed;
  params["hist_bins"] = c.cfg.hist_bins;
  out.manifest(c.opt, c.cfg, c.config_text, params);
  return kExitOk;
}

int run_liquidity(Context& c) {
  const auto sys = build_finite_system(c.cfg, c.cfg.seed);
  const auto grid = c.cfg.grid();
  const bool joint = c.cfg.mode == "joint";
  auto sols = run_scenarios(c.cfg.paths, c.opt.workers, [&](std::size_t s) {
    const auto paths = simulate_paths(sys.model, sys.x0, grid, scenario_seed(c.cfg, s));
    if (joint) return joint_clearing(paths, sys.net, c.cfg.R);
    JointSolution j;
    j.cash = clearing_cash(paths, sys.net, c.cfg.R);
    return j;
  });
  Outputs out(c.opt.out);
  std::vector<std::vector<DefaultRow>> rows;
  std::vector<const SolvencyState*> states;
  for (std::size_t s = 0; s < sols.size(); ++s) {
    write_trajectories(out, scenario_name("cash", s), "V", grid, sols[s].cash.V);
    if (joint) write_trajectories(out, scenario_name("capital", s), "K", grid, sols[s].capital.K);
    rows.push_back(default_rows(s, sols[s].cash.state, &sols[s].cash.cause));
    states.push_back(&sols[s].cash.state);
  }
  write_defaults(out, rows, true);
  auto summary = default_summary(rows, states, sys.net.size());
  std::map<std::string, std::size_t> causes;
  for (const auto& r : rows)
    for (const auto& d : r) ++causes[d.cause];
  summary["causes"] = causes;
  summary["mode"] = c.cfg.mode;
  out.write_json("summary.json", summary);
  auto params = base_parameters(c.cfg);
  params["paths"] = c.cfg.paths;
  params["mode"] = c.cfg.mode;
  out.manifest(c.opt, c.cfg, c.config_text, params);
  return kExitOk;
}

int check_continuity_cmd(Context& c, std::ostream& os) {
  const auto problem = c.cfg.mean_field_problem();
  const auto Lambda = problem.net_liability();
  const auto rep = check_continuity(problem.dist, problem.initial_law(), problem.R, Lambda);
  json j;
  j["pass"] = rep.pass;
  j["types"] = json::array();
  os << "type  Lambda  exposure_max  bound  sup_norm  slack  verdict\n";
  for (std::size_t a = 0; a < rep.types.size(); ++a) {
    const auto& e = rep.types[a];
    os << a << "  " << io::format_double(Lambda[a]) << "  " << io::format_double(e.exposure_max) << "  "
       << io::format_double(e.bound) << "  " << io::format_double(e.sup_norm) << "  "
       << io::format_double(e.slack) << "  " << (e.pass ? "PASS" : "FAIL") << '\n';
    j["types"].push_back({{"type", a},
                          {"Lambda", Lambda[a]},
                          {"exposure_max", e.exposure_max},
                          {"bound", std::isinf(e.bound) ? json("inf") : json(e.bound)},
                          {"sup_norm", e.sup_norm},
                          {"density_at_zero", e.density_at_zero},
                          {"slack", std::isinf(e.slack) ? json("inf") : json(e.slack)},
                          {"pass", e.pass}});
  }
  os << "overall: " << (rep.pass ? "PASS" : "FAIL") << '\n';
  if (!c.opt.out.empty()) {
    Outputs out(c.opt.out);
    out.write_json("continuity.json", j);
    out.manifest(c.opt, c.cfg, c.config_text, {{"R", c.cfg.R}});
  }
  return kExitOk;
}

int fit_network_cmd(Context& c, std::ostream& os) {
  Eigen::MatrixXd L;
  FitOptions fo;
  std::size_t k = c.cfg.k;
  if (c.cfg.fit) {
    L = c.cfg.fit->matrix;
    k = c.cfg.fit->k;
    fo.max_iter = c.cfg.fit->max_iter;
    fo.restarts = c.cfg.fit->restarts;
  } else {
    L = build_finite_system(c.cfg, c.cfg.seed).net.matrix();
  }
  fo.seed = rng::derive_seed(c.cfg.seed, rng::kFitRestarts);
  const auto fit = fit_low_rank(L, k, fo);
  Outputs out(c.opt.out);
  {
    auto w = out.csv("factors.csv", {"type_index", "l", "u_l", "v_l"});
    for (std::size_t i = 0; i < fit.types.size(); ++i)
      for (std::size_t l = 0; l < k; ++l) w.row(i, l, fit.types[i].u[l], fit.types[i].v[l]);
  }
  out.write_json("fit.json", {{"k", k},
                              {"n", static_cast<std::size_t>(L.rows())},
                              {"residual", fit.residual},
                              {"iterations", fit.iterations},
                              {"converged", fit.converged}});
  out.manifest(c.opt, c.cfg, c.config_text, {{"k", k}, {"max_iter", fo.max_iter}, {"restarts", fo.restarts}});
  os << "residual " << io::format_double(fit.residual) << (fit.converged ? "" : " (not converged)") << '\n';
  return kExitOk;
}

void report(std::ostream& err, const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  err << extra.dump() << '\n';
}

}  // namespace

int run_command(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  try {
    Context c;
    c.opt = options;
    c.config_text = read_file(options.config);
    c.cfg = parse_config(options.config);
    if (options.seed) c.cfg.seed = *options.seed;
    if (options.b0_seed) c.cfg.b0_seed = *options.b0_seed;
    if (options.paths) c.cfg.paths = *options.paths;
    if (options.particles) c.cfg.particles = *options.particles;
    if (options.grid_steps) {
      if (*options.grid_steps < 1) throw ValidationError("grid_steps", "grid needs at least 2 points");
      c.cfg.grid_steps = *options.grid_steps;
    }
    if (options.mode) {
      if (*options.mode != "cash" && *options.mode != "joint")
        throw ValidationError("mode", "expected \"cash\" or \"joint\"");
      c.cfg.mode = *options.mode;
    }
    if (options.workers > 0) omp_set_num_threads(options.workers);

    const auto& cmd = options.command;
    if (cmd == "run-finite") return run_finite(c);
    if (cmd == "run-particle") return run_particle(c);
    if (cmd == "run-meanfield") return run_meanfield(c);
    if (cmd == "run-liquidity") return run_liquidity(c);
    if (cmd == "check-continuity") return check_continuity_cmd(c, out);
    if (cmd == "fit-network") return fit_network_cmd(c, out);
    throw ValidationError("command", "unknown command " + cmd);
  } catch (const ParseError& e) {
    report(err, "ParseError", e.what(), {{"line", e.line()}});
    return kExitValidation;
  } catch (const ValidationError& e) {
    report(err, "ValidationError", e.what(), {{"field", e.field()}});
    return kExitValidation;
  } catch (const NonPositiveNetLiability& e) {
    report(err, "NonPositiveNetLiability", e.what(), {{"bank", e.bank()}});
    return kExitValidation;
  } catch (const ContagionError& e) {
    report(err, "ValidationError", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    report(err, "ValidationError", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    report(err, "RuntimeError", e.what());
    return kExitRuntime;
  }
}

}  // namespace contagion::cli
