#include "smpca/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "smpca/error.hpp"

namespace smpca {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
  if (!obj.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError((section.empty() ? "" : section + ".") + key + ": unknown key");
}

std::string field(const std::string& section, const std::string& key) { return section.empty() ? key : section + "." + key; }

template <typename T>
T get(const json& obj, const std::string& key, const std::string& section, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field(section, key) + ": wrong type");
  }
}

std::size_t get_count(const json& obj, const std::string& key, const std::string& section, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(field(section, key) + ": expected a nonnegative integer");
  return v.get<std::size_t>();
}

// "auto" or a nonnegative integer.
std::optional<std::size_t> get_auto_count(const json& obj, const std::string& key, const std::string& section,
                                          std::optional<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(field(section, key) + ": expected \"auto\" or a nonnegative integer");
  return v.get<std::size_t>();
}

json auto_or(const std::optional<std::size_t>& v) { return v ? json(*v) : json("auto"); }

std::pair<std::size_t, std::size_t> parse_nrange(const json& v, const std::string& name) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw ConfigError(name + ": expected [min, max]");
  const auto lo = v[0].get<long long>(), hi = v[1].get<long long>();
  if (lo < 1 || hi < lo) throw ConfigError(name + ": needs 1 <= min <= max");
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void parse_simulation(const json& s, SimConfig& c) {
  const std::string sec = "simulation";
  check_keys(s, {"p", "J", "holdout", "K", "L", "rho", "case", "nrange", "grid_points", "kappa", "r1", "r2", "t_df",
                 "noise_ratio", "burn_in", "calibration_curves"},
             sec);
  c.p = get_count(s, "p", sec, c.p);
  c.J = get_count(s, "J", sec, c.J);
  c.holdout = get_count(s, "holdout", sec, c.holdout);
  c.K = get_count(s, "K", sec, c.K);
  c.L = get_count(s, "L", sec, c.L);
  c.rho = get<double>(s, "rho", sec, c.rho);
  c.case_id = get<int>(s, "case", sec, c.case_id);
  if (s.contains("nrange")) std::tie(c.n_min, c.n_max) = parse_nrange(s.at("nrange"), "simulation.nrange");
  c.grid_points = get_count(s, "grid_points", sec, c.grid_points);
  c.kappa = get<double>(s, "kappa", sec, c.kappa);
  c.r1 = get<double>(s, "r1", sec, c.r1);
  c.r2 = get<double>(s, "r2", sec, c.r2);
  c.t_df = get<double>(s, "t_df", sec, c.t_df);
  c.noise_ratio = get<double>(s, "noise_ratio", sec, c.noise_ratio);
  c.burn_in = get_count(s, "burn_in", sec, c.burn_in);
  c.calibration_curves = get_count(s, "calibration_curves", sec, c.calibration_curves);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  check_keys(j, {"grids", "smoothing", "selection", "solver", "method", "var", "nmspe", "simulation", "benchmark", "seed",
                 "threads", "store_spectral", "paths", "$schema"},
             "");
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    check_keys(g, {"time_points", "freq_points"}, "grids");
    c.fit.time_points = get_count(g, "time_points", "grids", c.fit.time_points);
    c.fit.freq_points = get_count(g, "freq_points", "grids", c.fit.freq_points);
    if (c.fit.time_points < 2) throw ConfigError("grids.time_points: must be at least 2");
    if (c.fit.freq_points < 2) throw ConfigError("grids.freq_points: must be at least 2");
  }
  if (j.contains("smoothing")) {
    const auto& s = j.at("smoothing");
    check_keys(s, {"bandwidth", "kernel", "noise_floor_ratio"}, "smoothing");
    if (s.contains("bandwidth")) {
      const auto& b = s.at("bandwidth");
      if (b.is_string() && b.get<std::string>() == "auto") {
        c.fit.smoothing.bandwidth.reset();
      } else if (b.is_number() && b.get<double>() > 0.0) {
        c.fit.smoothing.bandwidth = b.get<double>();
      } else {
        throw ConfigError("smoothing.bandwidth: expected \"auto\" or a positive number");
      }
    }
    c.fit.smoothing.noise_floor_ratio = get<double>(s, "noise_floor_ratio", "smoothing", c.fit.smoothing.noise_floor_ratio);
    if (!(c.fit.smoothing.noise_floor_ratio >= 0.0 && c.fit.smoothing.noise_floor_ratio < 1.0))
      throw ConfigError("smoothing.noise_floor_ratio: must lie in [0, 1)");
    if (s.contains("kernel") && s.at("kernel") != "epanechnikov")
      throw ConfigError("smoothing.kernel: only \"epanechnikov\" is supported");
  }
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    const std::string sec = "selection";
    check_keys(s, {"K", "K_max", "eps", "L", "L_max", "h_max"}, sec);
    c.fit.K = get_auto_count(s, "K", sec, c.fit.K);
    c.fit.K_max = get_count(s, "K_max", sec, c.fit.K_max);
    c.fit.filters.eps = get<double>(s, "eps", sec, c.fit.filters.eps);
    c.fit.filters.L_fixed = get_auto_count(s, "L", sec, c.fit.filters.L_fixed);
    c.fit.filters.L_max = get_count(s, "L_max", sec, c.fit.filters.L_max);
    c.fit.h_max = get_auto_count(s, "h_max", sec, c.fit.h_max);
    if (c.fit.K && *c.fit.K < 1) throw ConfigError("selection.K: must be at least 1");
    if (c.fit.K_max < 2) throw ConfigError("selection.K_max: must be at least 2");
    if (!(c.fit.filters.eps > 0.0 && c.fit.filters.eps < 1.0)) throw ConfigError("selection.eps: must lie in (0, 1)");
    if (c.fit.h_max && *c.fit.h_max < 1) throw ConfigError("selection.h_max: must be at least 1");
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    const std::string sec = "solver";
    check_keys(s, {"tolerance", "max_iterations", "phase_tolerance", "phase_max_iterations"}, sec);
    c.fit.solver.tolerance = get<double>(s, "tolerance", sec, c.fit.solver.tolerance);
    c.fit.solver.max_iterations = get_count(s, "max_iterations", sec, c.fit.solver.max_iterations);
    c.fit.filters.phase.tolerance = get<double>(s, "phase_tolerance", sec, c.fit.filters.phase.tolerance);
    c.fit.filters.phase.max_iterations = get_count(s, "phase_max_iterations", sec, c.fit.filters.phase.max_iterations);
    if (!(c.fit.solver.tolerance > 0.0)) throw ConfigError("solver.tolerance: must be positive");
    if (!(c.fit.filters.phase.tolerance > 0.0)) throw ConfigError("solver.phase_tolerance: must be positive");
  }
  if (j.contains("method")) {
    if (!j.at("method").is_string()) throw ConfigError("method: expected a string");
    c.fit.method = parse_method(j.at("method").get<std::string>());
  }
  if (j.contains("var")) {
    const auto& v = j.at("var");
    check_keys(v, {"P_max"}, "var");
    c.var_P_max = get_auto_count(v, "P_max", "var", c.var_P_max);
    if (c.var_P_max && *c.var_P_max < 1) throw ConfigError("var.P_max: must be at least 1");
  }
  if (j.contains("nmspe")) {
    const auto& n = j.at("nmspe");
    check_keys(n, {"refit", "horizon"}, "nmspe");
    if (n.contains("refit")) {
      if (!n.at("refit").is_string()) throw ConfigError("nmspe.refit: expected a string");
      c.refit = parse_refit(n.at("refit").get<std::string>());
    }
    c.horizon = get_count(n, "horizon", "nmspe", c.horizon);
    if (c.horizon < 1) throw ConfigError("nmspe.horizon: must be at least 1");
  }
  if (j.contains("simulation")) parse_simulation(j.at("simulation"), c.simulation);
  c.seed = get<std::uint64_t>(j, "seed", "", c.seed);
  c.threads = get_count(j, "threads", "", c.threads);
  c.store_spectral = get<bool>(j, "store_spectral", "", c.store_spectral);
  if (j.contains("benchmark")) {
    const auto& b = j.at("benchmark");
    const std::string sec = "benchmark";
    check_keys(b, {"cases", "J", "nranges", "methods", "metrics", "reps"}, sec);
    auto& spec = c.benchmark;
    try {
      if (b.contains("cases")) spec.cases = b.at("cases").get<std::vector<int>>();
      if (b.contains("J")) spec.Js = b.at("J").get<std::vector<std::size_t>>();
      if (b.contains("metrics")) spec.metrics = b.at("metrics").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("benchmark: cases, J and metrics must be arrays of the right type");
    }
    if (b.contains("nranges")) {
      if (!b.at("nranges").is_array()) throw ConfigError("benchmark.nranges: expected an array of [min, max]");
      spec.nranges.clear();
      for (const auto& nr : b.at("nranges")) spec.nranges.push_back(parse_nrange(nr, "benchmark.nranges"));
    }
    if (b.contains("methods")) {
      if (!b.at("methods").is_array()) throw ConfigError("benchmark.methods: expected an array");
      spec.methods.clear();
      for (const auto& m : b.at("methods")) {
        if (!m.is_string()) throw ConfigError("benchmark.methods: expected strings");
        spec.methods.push_back(parse_method(m.get<std::string>()));
      }
    }
    spec.reps = get_count(b, "reps", sec, spec.reps);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, {"data", "model", "truth", "output", "summary"}, "paths");
    c.paths.data = get<std::string>(p, "data", "paths", c.paths.data);
    c.paths.model = get<std::string>(p, "model", "paths", c.paths.model);
    c.paths.truth = get<std::string>(p, "truth", "paths", c.paths.truth);
    c.paths.output = get<std::string>(p, "output", "paths", c.paths.output);
    c.paths.summary = get<std::string>(p, "summary", "paths", c.paths.summary);
  }
  propagate(c);
  c.simulation.validate();
  c.benchmark.validate();
  return c;
}

void propagate(RunConfig& c) {
  c.simulation.seed = c.seed;
  c.fit.threads = c.threads;
  c.benchmark.base = c.simulation;
  c.benchmark.fit = c.fit;
  c.benchmark.var_P_max = c.var_P_max;
  c.benchmark.horizon = c.horizon;
  c.benchmark.refit = c.refit;
  c.benchmark.seed = c.seed;
  c.benchmark.threads = c.threads;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
  json methods = json::array();
  for (Method m : c.benchmark.methods) methods.push_back(method_name(m));
  json nranges = json::array();
  for (const auto& nr : c.benchmark.nranges) nranges.push_back({nr.first, nr.second});
  const SimConfig& s = c.simulation;
  return {
      {"grids", {{"time_points", c.fit.time_points}, {"freq_points", c.fit.freq_points}}},
      {"smoothing",
       {{"bandwidth", c.fit.smoothing.bandwidth ? json(*c.fit.smoothing.bandwidth) : json("auto")},
        {"kernel", "epanechnikov"},
        {"noise_floor_ratio", c.fit.smoothing.noise_floor_ratio}}},
      {"selection",
       {{"K", auto_or(c.fit.K)},
        {"K_max", c.fit.K_max},
        {"eps", c.fit.filters.eps},
        {"L", auto_or(c.fit.filters.L_fixed)},
        {"L_max", c.fit.filters.L_max},
        {"h_max", auto_or(c.fit.h_max)}}},
      {"solver",
       {{"tolerance", c.fit.solver.tolerance},
        {"max_iterations", c.fit.solver.max_iterations},
        {"phase_tolerance", c.fit.filters.phase.tolerance},
        {"phase_max_iterations", c.fit.filters.phase.max_iterations}}},
      {"method", method_name(c.fit.method)},
      {"var", {{"P_max", auto_or(c.var_P_max)}}},
      {"nmspe", {{"refit", refit_name(c.refit)}, {"horizon", c.horizon}}},
      {"simulation",
       {{"p", s.p},
        {"J", s.J},
        {"holdout", s.holdout},
        {"K", s.K},
        {"L", s.L},
        {"rho", s.rho},
        {"case", s.case_id},
        {"nrange", {s.n_min, s.n_max}},
        {"grid_points", s.grid_points},
        {"kappa", s.kappa},
        {"r1", s.r1},
        {"r2", s.r2},
        {"t_df", s.t_df},
        {"noise_ratio", s.noise_ratio},
        {"burn_in", s.burn_in},
        {"calibration_curves", s.calibration_curves}}},
      {"benchmark",
       {{"cases", c.benchmark.cases},
        {"J", c.benchmark.Js},
        {"nranges", nranges},
        {"methods", methods},
        {"metrics", c.benchmark.metrics},
        {"reps", c.benchmark.reps}}},
      {"seed", c.seed},
      {"threads", c.threads},
      {"store_spectral", c.store_spectral},
      {"paths",
       {{"data", c.paths.data},
        {"model", c.paths.model},
        {"truth", c.paths.truth},
        {"output", c.paths.output},
        {"summary", c.paths.summary}}},
  };
}

json config_schema() {
  const json count = {{"type", "integer"}, {"minimum", 0}};
  const json auto_count = {{"oneOf", {count, {{"const", "auto"}}}}};
  const json nrange = {{"type", "array"}, {"items", count}, {"minItems", 2}, {"maxItems", 2}};
  auto object = [](json props, const std::string& description) {
    return json{{"type", "object"}, {"description", description}, {"properties", props}, {"additionalProperties", false}};
  };
  auto described = [](json schema, const std::string& description, json def) {
    schema["description"] = description;
    schema["default"] = def;
    return schema;
  };
  const RunConfig d;
  const json defaults = run_config_to_json(d);
  const json number = {{"type", "number"}};
  const json string = {{"type", "string"}};

  json schema = object(
      {{"$schema", string},
       {"grids", object({{"time_points", described(count, "time grid size M_t", defaults["grids"]["time_points"])},
                         {"freq_points", described(count, "frequency grid size M_omega", defaults["grids"]["freq_points"])}},
                        "evaluation grids")},
       {"smoothing", object({{"bandwidth", described({{"oneOf", {number, {{"const", "auto"}}}}}, "local linear bandwidth, \"auto\" for GCV", "auto")},
                             {"kernel", described({{"const", "epanechnikov"}}, "smoothing kernel", "epanechnikov")},
                             {"noise_floor_ratio", described(number, "noise variance lower bound as a fraction of the mean squared residual", d.fit.smoothing.noise_floor_ratio)}},
                            "local linear smoothing")},
       {"selection", object({{"K", described(auto_count, "number of components, \"auto\" for the eigenvalue ratio rule", "auto")},
                             {"K_max", described(count, "largest K considered", d.fit.K_max)},
                             {"eps", described(number, "filter norm tolerance for L_k", d.fit.filters.eps)},
                             {"L", described(auto_count, "filter half-width for every k, \"auto\" for the norm rule", "auto")},
                             {"L_max", described(count, "largest L_k", d.fit.filters.L_max)},
                             {"h_max", described(auto_count, "Bartlett lag window, \"auto\" for (J N)^(1/4)", "auto")}},
                            "truncation and model selection")},
       {"solver", object({{"tolerance", described(number, "CG relative residual", d.fit.solver.tolerance)},
                          {"max_iterations", described(count, "CG iteration cap, 0 for 10 d", 0)},
                          {"phase_tolerance", described(number, "phase optimizer relative change", d.fit.filters.phase.tolerance)},
                          {"phase_max_iterations", described(count, "phase optimizer iteration cap", d.fit.filters.phase.max_iterations)}},
                         "numerical solvers")},
       {"method", described({{"enum", {"spectral_mpca", "individual_spectral"}}}, "estimation method", "spectral_mpca")},
       {"var", object({{"P_max", described(auto_count, "largest VAR order, \"auto\" for min(5, T/(3p))", "auto")}}, "score forecasting")},
       {"nmspe", object({{"refit", described({{"enum", {"full", "scores_only"}}}, "rolling forecast refit mode", "full")},
                         {"horizon", described(count, "forecast horizon P", d.horizon)}},
                        "forecast evaluation")},
       {"simulation", object({{"p", described(count, "subjects", d.simulation.p)},
                              {"J", described(count, "curves per subject", d.simulation.J)},
                              {"holdout", described(count, "extra curves after J", d.simulation.holdout)},
                              {"K", described(count, "true components", d.simulation.K)},
                              {"L", described(count, "true filter half-width", d.simulation.L)},
                              {"rho", described(number, "VAR(1) coefficient", d.simulation.rho)},
                              {"case", described({{"enum", {1, 2, 3}}}, "1 Gaussian, 2 t errors, 3 nonlinear scores", 1)},
                              {"nrange", described(nrange, "observations per curve [min, max]", json::array({5, 10}))},
                              {"grid_points", described(count, "candidate observation sites", d.simulation.grid_points)},
                              {"kappa", described(number, "expected graph degree", d.simulation.kappa)},
                              {"r1", described(number, "lower edge magnitude", d.simulation.r1)},
                              {"r2", described(number, "upper edge magnitude", d.simulation.r2)},
                              {"t_df", described(number, "t degrees of freedom (case 2)", d.simulation.t_df)},
                              {"noise_ratio", described(number, "noise variance / E||eps||^2", d.simulation.noise_ratio)},
                              {"burn_in", described(count, "score burn-in steps", d.simulation.burn_in)},
                              {"calibration_curves", described(count, "curves used to calibrate E||eps||^2", d.simulation.calibration_curves)}},
                             "synthetic data generator")},
       {"benchmark", object({{"cases", described({{"type", "array"}, {"items", {{"enum", {1, 2, 3}}}}}, "cases", json::array({1}))},
                             {"J", described({{"type", "array"}, {"items", count}}, "series lengths", json::array({60}))},
                             {"nranges", described({{"type", "array"}, {"items", nrange}}, "observation count ranges", defaults["benchmark"]["nranges"])},
                             {"methods", described({{"type", "array"}, {"items", {{"enum", {"spectral_mpca", "individual_spectral"}}}}}, "methods", defaults["benchmark"]["methods"])},
                             {"metrics", described({{"type", "array"}, {"items", {{"enum", {"nmse", "nmspe"}}}}}, "metrics", json::array({"nmse"}))},
                             {"reps", described(count, "replicates per scenario", d.benchmark.reps)}},
                            "Monte Carlo benchmark")},
       {"seed", described({{"type", "integer"}, {"minimum", 0}}, "master seed", d.seed)},
       {"threads", described(count, "worker threads, 0 for all cores", 0)},
       {"store_spectral", described({{"type", "boolean"}}, "store the marginal spectral field in the model", false)},
       {"paths", object({{"data", string}, {"model", string}, {"truth", string}, {"output", string}, {"summary", string}},
                        "default file locations")}},
      "smpca run configuration");
  schema["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  schema["title"] = "smpca config";
  return schema;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace smpca
