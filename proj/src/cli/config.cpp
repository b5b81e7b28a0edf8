#include "contagion/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "contagion/error.hpp"
#include "contagion/rng.hpp"

namespace contagion::cli {

namespace {

using json = nlohmann::json;

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ValidationError(where.empty() ? key : where + "." + key, "unknown key");
}

const json& require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw ValidationError(field, "expected an object");
  return j;
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ValidationError(field, "must be finite");
  return x;
}

std::size_t count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ValidationError(field, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::vector<double> numbers(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

RepaymentSchedule parse_schedule(const json& j) {
  require_object(j, "network.schedule");
  const std::string kind = j.value("kind", "linear");
  if (kind == "linear") {
    allow_keys(j, "network.schedule", {"kind", "T"});
    const double T = j.contains("T") ? number(j["T"], "network.schedule.T") : 1.0;
    if (!(T > 0.0)) throw ValidationError("network.schedule.T", "horizon must be positive");
    return RepaymentSchedule::linear(T);
  }
  if (kind == "table") {
    allow_keys(j, "network.schedule", {"kind", "times", "values"});
    if (!j.contains("times") || !j.contains("values"))
      throw ValidationError("network.schedule", "table schedule needs times and values");
    try {
      return RepaymentSchedule::table(numbers(j["times"], "network.schedule.times"),
                                      numbers(j["values"], "network.schedule.values"));
    } catch (const std::invalid_argument& e) {
      throw ValidationError("network.schedule", e.what());
    }
  }
  throw ValidationError("network.schedule.kind", "expected \"linear\" or \"table\"");
}

TimeFunction parse_time_function(const json& j, const std::string& field) {
  if (j.is_number()) return TimeFunction(number(j, field));
  require_object(j, field);
  allow_keys(j, field, {"times", "values"});
  if (!j.contains("times") || !j.contains("values"))
    throw ValidationError(field, "tabulated function needs times and values");
  try {
    return TimeFunction(Tabulated(numbers(j["times"], field + ".times"), numbers(j["values"], field + ".values")));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(field, e.what());
  }
}

// A scalar applies to every type; an array gives one entry per type.
std::vector<TimeFunction> per_type_functions(const json& j, const std::string& field, std::size_t types) {
  if (!j.is_array()) return std::vector<TimeFunction>(types, parse_time_function(j, field));
  if (j.size() != types) throw ValidationError(field, "expected one entry per type");
  std::vector<TimeFunction> out;
  for (std::size_t a = 0; a < types; ++a) out.push_back(parse_time_function(j[a], field + "[" + std::to_string(a) + "]"));
  return out;
}

AssetDensity parse_density(const json& j, const std::string& field) {
  require_object(j, field);
  const std::string kind = j.value("kind", "");
  try {
    if (kind == "uniform") {
      allow_keys(j, field, {"kind", "a", "b"});
      return AssetDensity::uniform(number(j.at("a"), field + ".a"), number(j.at("b"), field + ".b"));
    }
    if (kind == "lognormal_mixture") {
      allow_keys(j, field, {"kind", "weights", "log_means", "log_sds"});
      return AssetDensity::lognormal_mixture(numbers(j.at("weights"), field + ".weights"),
                                             numbers(j.at("log_means"), field + ".log_means"),
                                             numbers(j.at("log_sds"), field + ".log_sds"));
    }
  } catch (const json::out_of_range&) {
    throw ValidationError(field, "missing parameter");
  } catch (const std::invalid_argument& e) {
    throw ValidationError(field, e.what());
  } catch (const DimensionMismatch& e) {
    throw ValidationError(field, e.what());
  }
  throw ValidationError(field + ".kind", "expected \"uniform\" or \"lognormal_mixture\"");
}

void parse_network(const json& j, ScenarioConfig& cfg) {
  require_object(j, "network");
  allow_keys(j, "network", {"k", "types", "lambda_ext", "schedule"});
  if (!j.contains("k")) throw ValidationError("network.k", "required");
  cfg.k = count(j["k"], "network.k");
  if (cfg.k == 0) throw ValidationError("network.k", "must be at least 1");
  if (!j.contains("types") || !j["types"].is_array() || j["types"].empty())
    throw ValidationError("network.types", "expected a nonempty array");
  const auto& types = j["types"];
  bool any_weight = false, all_weight = true;
  for (std::size_t a = 0; a < types.size(); ++a) {
    const std::string f = "network.types[" + std::to_string(a) + "]";
    require_object(types[a], f);
    allow_keys(types[a], f, {"u", "v", "weight"});
    if (!types[a].contains("u") || !types[a].contains("v")) throw ValidationError(f, "needs u and v");
    TypeVector t{numbers(types[a]["u"], f + ".u"), numbers(types[a]["v"], f + ".v")};
    if (t.u.size() != cfg.k || t.v.size() != cfg.k) throw ValidationError(f, "u and v must have length k");
    for (std::size_t l = 0; l < cfg.k; ++l)
      if (t.u[l] < 0.0 || t.v[l] < 0.0) throw ValidationError(f, "scores must be nonnegative");
    cfg.dist.atoms.push_back(std::move(t));
    if (types[a].contains("weight")) {
      any_weight = true;
      const double w = number(types[a]["weight"], f + ".weight");
      if (w < 0.0) throw ValidationError(f + ".weight", "must be nonnegative");
      cfg.dist.weights.push_back(w);
    } else {
      all_weight = false;
    }
  }
  if (any_weight && !all_weight) throw ValidationError("network.types", "give a weight for every type or for none");
  if (!any_weight) cfg.dist.weights.assign(types.size(), 1.0 / static_cast<double>(types.size()));
  double total = 0.0;
  for (double w : cfg.dist.weights) total += w;
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("network.types.weight", "weights must sum to 1");

  if (!j.contains("lambda_ext")) throw ValidationError("network.lambda_ext", "required");
  cfg.lambda_ext = numbers(j["lambda_ext"], "network.lambda_ext");
  if (cfg.lambda_ext.size() != types.size()) throw ValidationError("network.lambda_ext", "expected one entry per type");
  for (double x : cfg.lambda_ext)
    if (x < 0.0) throw ValidationError("network.lambda_ext", "must be nonnegative");
  if (j.contains("schedule")) cfg.schedule = parse_schedule(j["schedule"]);
}

void parse_market(const json& j, ScenarioConfig& cfg) {
  require_object(j, "market");
  allow_keys(j, "market", {"R", "rho", "mu", "sigma", "x0", "initial_assets"});
  const std::size_t A = cfg.dist.size();
  if (j.contains("R")) cfg.R = number(j["R"], "R");
  if (j.contains("rho")) cfg.rho = number(j["rho"], "rho");
  if (j.contains("mu")) cfg.mu = per_type_functions(j["mu"], "market.mu", A);
  if (j.contains("sigma")) cfg.sigma = per_type_functions(j["sigma"], "market.sigma", A);
  if (j.contains("x0")) {
    cfg.x0 = j["x0"].is_array() ? numbers(j["x0"], "market.x0")
                                : std::vector<double>(A, number(j["x0"], "market.x0"));
    if (cfg.x0.size() != A) throw ValidationError("market.x0", "expected one entry per type");
    for (double x : cfg.x0)
      if (!(x > 0.0)) throw ValidationError("market.x0", "must be positive");
  }
  if (j.contains("initial_assets")) {
    const auto& ia = j["initial_assets"];
    if (!ia.is_array() || ia.size() != A) throw ValidationError("market.initial_assets", "expected one density per type");
    for (std::size_t a = 0; a < A; ++a)
      cfg.initial_assets.push_back(parse_density(ia[a], "market.initial_assets[" + std::to_string(a) + "]"));
  }
}

void parse_run(const json& j, ScenarioConfig& cfg) {
  require_object(j, "run");
  allow_keys(j, "run", {"grid_steps", "paths", "particles", "seed", "b0_seed", "hist_bins", "hist_max",
                        "hist_every", "mode", "clearing"});
  if (j.contains("grid_steps")) cfg.grid_steps = count(j["grid_steps"], "grid_steps");
  if (j.contains("paths")) cfg.paths = count(j["paths"], "paths");
  if (j.contains("particles")) cfg.particles = count(j["particles"], "particles");
  if (j.contains("seed")) cfg.seed = count(j["seed"], "seed");
  cfg.b0_seed = j.contains("b0_seed") ? count(j["b0_seed"], "b0_seed") : cfg.seed;
  if (j.contains("hist_bins")) cfg.hist_bins = count(j["hist_bins"], "hist_bins");
  if (j.contains("hist_max")) cfg.hist_max = number(j["hist_max"], "hist_max");
  if (j.contains("hist_every")) cfg.hist_every = count(j["hist_every"], "hist_every");
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) throw ValidationError("mode", "expected a string");
    cfg.mode = j["mode"].get<std::string>();
  }
  if (j.contains("clearing")) {
    if (!j["clearing"].is_string()) throw ValidationError("clearing", "expected a string");
    cfg.clearing = j["clearing"].get<std::string>();
  }
}

void parse_banks(const json& j, ScenarioConfig& cfg) {
  require_object(j, "banks");
  allow_keys(j, "banks", {"N", "base_n", "stratified"});
  BankSpec b;
  if (!j.contains("N")) throw ValidationError("banks.N", "required");
  b.N = count(j["N"], "banks.N");
  b.base_n = j.contains("base_n") ? count(j["base_n"], "banks.base_n") : b.N;
  if (j.contains("stratified")) {
    if (!j["stratified"].is_boolean()) throw ValidationError("banks.stratified", "expected a boolean");
    b.stratified = j["stratified"].get<bool>();
  }
  if (b.N == 0 || b.base_n == 0) throw ValidationError("banks.N", "must be positive");
  if (b.N < b.base_n) throw ValidationError("banks.N", "must be at least base_n");
  cfg.banks = b;
}

void parse_fit(const json& j, ScenarioConfig& cfg) {
  require_object(j, "fit");
  allow_keys(j, "fit", {"matrix", "k", "max_iter", "restarts"});
  FitSpec f;
  if (!j.contains("matrix") || !j["matrix"].is_array() || j["matrix"].empty())
    throw ValidationError("fit.matrix", "expected a square array of rows");
  const auto n = j["matrix"].size();
  f.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = numbers(j["matrix"][i], "fit.matrix[" + std::to_string(i) + "]");
    if (row.size() != n) throw ValidationError("fit.matrix", "matrix must be square");
    for (std::size_t c = 0; c < n; ++c) {
      if (row[c] < 0.0) throw ValidationError("fit.matrix", "entries must be nonnegative");
      f.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  f.k = j.contains("k") ? count(j["k"], "fit.k") : cfg.k;
  if (f.k == 0) throw ValidationError("fit.k", "must be at least 1");
  if (j.contains("max_iter")) f.max_iter = count(j["max_iter"], "fit.max_iter");
  if (j.contains("restarts")) f.restarts = count(j["restarts"], "fit.restarts");
  cfg.fit = std::move(f);
}

void validate(ScenarioConfig& cfg) {
  if (!(cfg.R >= 0.0 && cfg.R <= 1.0)) throw ValidationError("R", "recovery rate must lie in [0, 1]");
  if (!(cfg.rho >= -1.0 && cfg.rho <= 1.0)) throw ValidationError("rho", "correlation must lie in [-1, 1]");
  if (cfg.grid_steps < 1) throw ValidationError("grid_steps", "grid needs at least 2 points");
  if (!(cfg.hist_max > 0.0)) throw ValidationError("hist_max", "must be positive");
  if (cfg.mode != "cash" && cfg.mode != "joint") throw ValidationError("mode", "expected \"cash\" or \"joint\"");
  if (cfg.clearing != "greatest" && cfg.clearing != "least")
    throw ValidationError("clearing", "expected \"greatest\" or \"least\"");
  const std::size_t A = cfg.dist.size();
  if (cfg.mu.empty()) cfg.mu.assign(A, TimeFunction(0.0));
  if (cfg.sigma.empty()) cfg.sigma.assign(A, TimeFunction(0.2));
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

MeanFieldProblem ScenarioConfig::mean_field_problem() const {
  if (initial_assets.empty()) throw ValidationError("market.initial_assets", "required for the mean-field problem");
  MeanFieldProblem p;
  p.dist = dist;
  p.lambda_ext = lambda_ext;
  p.schedule = schedule;
  p.mu = mu;
  p.sigma = sigma;
  p.rho = rho;
  p.R = R;
  p.initial_assets = initial_assets;
  return p;
}

ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_of(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object", 1);
  allow_keys(j, "", {"network", "market", "banks", "run", "fit"});
  ScenarioConfig cfg;
  if (!j.contains("network")) throw ValidationError("network", "required");
  parse_network(j["network"], cfg);
  if (j.contains("market")) parse_market(j["market"], cfg);
  if (j.contains("banks")) parse_banks(j["banks"], cfg);
  if (j.contains("run")) parse_run(j["run"], cfg);
  if (j.contains("fit")) parse_fit(j["fit"], cfg);
  validate(cfg);
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file " + path, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

FiniteSystem build_finite_system(const ScenarioConfig& cfg, std::uint64_t seed) {
  const std::size_t A = cfg.dist.size();
  std::vector<TypeVector> types;
  std::vector<double> lext;
  std::vector<std::size_t> atom;
  double unit = 1.0;
  std::size_t base_n = 0, N = 0;
  if (cfg.banks) {
    unit = static_cast<double>(cfg.banks->base_n);
    base_n = cfg.banks->base_n;
    N = cfg.banks->N;
    auto s = sample_types(cfg.dist, N, rng::derive_seed(seed, rng::kTypeSampling), cfg.banks->stratified);
    types = std::move(s.types);
    atom = std::move(s.atoms);
    for (auto a : atom) lext.push_back(unit * cfg.lambda_ext[a]);
  } else {
    types = cfg.dist.atoms;
    lext = cfg.lambda_ext;
    for (std::size_t a = 0; a < A; ++a) atom.push_back(a);
    base_n = N = A;
  }
  MarketModel model;
  model.rho = cfg.rho;
  std::vector<double> x0;
  const auto x_seed = rng::derive_seed(seed, rng::kInitialAssets);
  for (std::size_t i = 0; i < atom.size(); ++i) {
    model.mu.push_back(cfg.mu[atom[i]]);
    model.sigma.push_back(cfg.sigma[atom[i]]);
    if (!cfg.x0.empty())
      x0.push_back(unit * cfg.x0[atom[i]]);
    else if (!cfg.initial_assets.empty())
      x0.push_back(unit * cfg.initial_assets[atom[i]].sample(x_seed, atom[i], i));
    else
      throw ValidationError("market.x0", "finite systems need x0 or initial_assets");
  }
  auto net = scale_network(base_n, N, std::move(types), std::move(lext), cfg.schedule);
  return {std::move(net), std::move(model), std::move(x0), std::move(atom)};
}

}  // namespace contagion::cli
