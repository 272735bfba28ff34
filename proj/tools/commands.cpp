#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "smpca/benchmark_harness.hpp"
#include "smpca/config.hpp"
#include "smpca/error.hpp"
#include "smpca/metrics.hpp"
#include "smpca/observations.hpp"
#include "smpca/pipeline.hpp"
#include "smpca/serialize.hpp"
#include "smpca/simgen.hpp"
#include "smpca/spectral.hpp"
#include "smpca/tasks.hpp"

namespace smpca::cli {

namespace {

// Flags shared by every subcommand that reads a config.
struct Common {
  std::string config;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
};

struct FitFlags {
  std::optional<std::string> method;
  std::optional<std::string> K, L, h_max, bandwidth;
  std::optional<std::size_t> time_points, freq_points;
};

std::optional<std::size_t> parse_auto_count(const std::string& value, const std::string& name) {
  if (value == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used == value.size() && v >= 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw ConfigError(name + ": expected \"auto\" or a nonnegative integer, got '" + value + "'");
}

std::pair<std::size_t, std::size_t> parse_nrange_flag(const std::string& value) {
  const auto dash = value.find('-');
  try {
    if (dash == std::string::npos) {
      const auto n = std::stoul(value);
      return {n, n};
    }
    return {std::stoul(value.substr(0, dash)), std::stoul(value.substr(dash + 1))};
  } catch (const std::exception&) {
    throw ConfigError("nrange: expected MIN-MAX, got '" + value + "'");
  }
}

RunConfig load_config(const Common& common) {
  RunConfig c = common.config.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(common.config);
  if (common.seed) c.seed = *common.seed;
  if (common.threads) {
    c.threads = *common.threads;
  } else if (const char* env = std::getenv("SPECTRAL_MPCA_THREADS")) {
    try {
      c.threads = std::stoul(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("SPECTRAL_MPCA_THREADS: expected a nonnegative integer, got '") + env + "'");
    }
  }
  propagate(c);
  return c;
}

void apply(const FitFlags& f, RunConfig& c) {
  if (f.method) c.fit.method = parse_method(*f.method);
  if (f.K) c.fit.K = parse_auto_count(*f.K, "K");
  if (f.L) c.fit.filters.L_fixed = parse_auto_count(*f.L, "L");
  if (f.h_max) c.fit.h_max = parse_auto_count(*f.h_max, "h_max");
  if (f.bandwidth) {
    if (*f.bandwidth == "auto") {
      c.fit.smoothing.bandwidth.reset();
    } else {
      try {
        c.fit.smoothing.bandwidth = std::stod(*f.bandwidth);
      } catch (const std::exception&) {
        throw ConfigError("bandwidth: expected \"auto\" or a number, got '" + *f.bandwidth + "'");
      }
      if (!(*c.fit.smoothing.bandwidth > 0.0)) throw ConfigError("bandwidth: must be positive");
    }
  }
  if (f.time_points) c.fit.time_points = *f.time_points;
  if (f.freq_points) c.fit.freq_points = *f.freq_points;
  if (c.fit.K && *c.fit.K < 1) throw ConfigError("K: must be at least 1");
  if (c.fit.time_points < 2) throw ConfigError("time_points: must be at least 2");
  if (c.fit.freq_points < 2) throw ConfigError("freq_points: must be at least 2");
  propagate(c);
}

std::string require_path(const std::string& flag, const std::string& fallback, const std::string& name) {
  const std::string& path = flag.empty() ? fallback : flag;
  if (path.empty()) throw ConfigError(name + ": no path given (flag or paths." + name + " in the config)");
  return path;
}

void write_panel_csv(std::ostream& out, const CurvePanel& panel, std::size_t first_curve) {
  out << "subject,curve,time,value\n";
  for (std::size_t i = 0; i < panel.subjects(); ++i)
    for (std::size_t j = 0; j < panel.curves(); ++j)
      for (std::size_t m = 0; m < panel.grid.size(); ++m)
        out << i + 1 << ',' << first_curve + j + 1 << ',' << format_double(panel.grid[m]) << ','
            << format_double(panel.subject[i](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m))) << '\n';
}

void write_panel_file(const std::string& path, const CurvePanel& panel, std::size_t first_curve) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_panel_csv(out, panel, first_curve);
}

// A curve CSV (impute/forecast output) as a panel on its shared time grid.
std::pair<CurvePanel, std::size_t> read_panel(const std::string& path) {
  const ObservationSet obs = read_observations_csv(path);
  std::size_t first = obs.curves(), last = 0;
  std::vector<double> times;
  for (std::size_t i = 0; i < obs.subjects(); ++i)
    for (std::size_t j = 0; j < obs.curves(); ++j)
      if (obs.count(i, j) > 0) {
        first = std::min(first, j);
        last = std::max(last, j);
        if (times.empty()) times = obs.curve(i, j).times;
      }
  if (times.empty()) throw InsufficientDataError("'" + path + "' has no curves");
  Eigen::VectorXd points = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  CurvePanel panel{TimeGrid(points), {}};
  const std::size_t count = last - first + 1;
  for (std::size_t i = 0; i < obs.subjects(); ++i) {
    Eigen::MatrixXd block(static_cast<Eigen::Index>(count), points.size());
    for (std::size_t j = first; j <= last; ++j) {
      const auto& c = obs.curve(i, j);
      if (c.times != times)
        throw InsufficientDataError(fmt::format("'{}': subject {}, curve {} is not on the shared time grid", path,
                                                i + 1, j + 1));
      block.row(static_cast<Eigen::Index>(j - first)) =
          Eigen::Map<const Eigen::RowVectorXd>(c.values.data(), static_cast<Eigen::Index>(c.values.size()));
    }
    panel.subject.push_back(std::move(block));
  }
  return {std::move(panel), first};
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string out, truth;
  std::optional<int> case_id;
  std::optional<std::size_t> p, J, holdout;
  std::optional<std::string> nrange;
  std::optional<double> noise_ratio;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig c = load_config(a.common);
  SimConfig& s = c.simulation;
  if (a.case_id) s.case_id = *a.case_id;
  if (a.p) s.p = *a.p;
  if (a.J) s.J = *a.J;
  if (a.holdout) s.holdout = *a.holdout;
  if (a.nrange) std::tie(s.n_min, s.n_max) = parse_nrange_flag(*a.nrange);
  if (a.noise_ratio) s.noise_ratio = *a.noise_ratio;
  s.seed = c.seed;
  s.validate();
  const std::string data_path = require_path(a.out, c.paths.data, "data");

  TruthPanel truth = gen_panel(s);
  const ObservationSet observed = truth.observations.prefix(s.J);
  write_observations_csv(data_path, observed);
  const std::string truth_path = a.truth.empty() ? c.paths.truth : a.truth;
  if (!truth_path.empty()) save_truth(truth_path, truth);
  out << fmt::format("simulated case {}: p={} J={} holdout={} observations={}\n", s.case_id, s.p, s.J, s.holdout,
                     observed.total_count());
  (void)err;
  return kOk;
}

struct FitArgs {
  Common common;
  FitFlags fit;
  std::string data, model;
  bool store_spectral = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig c = load_config(a.common);
  apply(a.fit, c);
  if (a.store_spectral) c.store_spectral = true;
  const std::string data_path = require_path(a.data, c.paths.data, "data");
  const std::string model_path = require_path(a.model, c.paths.model, "model");

  const ObservationSet obs = read_observations_csv(data_path);
  const auto report = validate_observations(obs);
  for (const auto& issue : report.issues)
    err << fmt::format("note: subject {}, curve {}: {}\n", issue.subject + 1, issue.curve + 1, issue.message);

  const Moments moments = estimate_moments(obs, c.fit);
  FittedModel model = fit_from_moments(obs, moments, c.fit);
  const nlohmann::json config_json = run_config_to_json(c);
  model.config_hash = config_hash(config_json);

  std::optional<SpectralField> marginal;
  if (c.store_spectral) marginal = marginal_spectral(moments.subject_fields);
  save_model(model_path, model, config_json, marginal ? &*marginal : nullptr);

  out << fmt::format("method {}  p={} J={} h_max={}\n", method_name(model.method), model.p, model.J, model.h_max);
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const ModelGroup& group = model.groups[g];
    std::string members;
    for (std::size_t i : group.subjects) members += (members.empty() ? "" : ",") + std::to_string(i + 1);
    out << fmt::format("group {} (subjects {}): K={}  eigenvalue range [{:.4g}, {:.4g}]  CG iterations {}\n", g + 1,
                       members, group.K, group.min_eigenvalue, group.max_eigenvalue, group.solver_iterations);
    for (std::size_t k = 0; k < group.K; ++k)
      out << fmt::format("  k={}  L_k={}  sum ||phi_kl||^2 = {:.4f}  integrated eigenvalue {:.4g}\n", k + 1,
                         group.bank.L(k), group.bank.total_squared_norm(k), group.integrated_eigenvalues.at(k));
  }
  out << "noise variances:";
  for (double v : model.noise) out << ' ' << fmt::format("{:.4g}", v);
  out << "\nmodel written to " << model_path << '\n';
  print_warnings(err, model.warnings);
  return kOk;
}

struct ImputeArgs {
  std::string model, out;
};

int cmd_impute(const ImputeArgs& a, std::ostream& out, std::ostream&) {
  const FittedModel model = load_model(a.model);
  const CurvePanel panel = impute(model);
  if (a.out.empty()) {
    write_panel_csv(out, panel, 0);
  } else {
    write_panel_file(a.out, panel, 0);
  }
  return kOk;
}

struct ForecastArgs {
  Common common;
  std::string model, out;
  std::size_t horizon = 0;
  std::optional<std::string> P_max;
};

int cmd_forecast(const ForecastArgs& a, std::ostream& out, std::ostream& err) {
  if (a.horizon < 1) throw ConfigError("horizon: must be at least 1");
  RunConfig c = load_config(a.common);
  if (a.P_max) c.var_P_max = parse_auto_count(*a.P_max, "P_max");
  if (c.var_P_max && *c.var_P_max < 1) throw ConfigError("P_max: must be at least 1");
  const FittedModel model = load_model(a.model);
  const ForecastModel var = fit_var_models(model, c.var_P_max);
  print_warnings(err, var.warnings);
  const CurvePanel panel = forecast(model, var, a.horizon);
  if (a.out.empty()) {
    write_panel_csv(out, panel, model.J);
  } else {
    write_panel_file(a.out, panel, model.J);
  }
  return kOk;
}

struct BenchmarkArgs {
  Common common;
  FitFlags fit;
  std::string out, summary;
  std::optional<std::size_t> reps, horizon;
  std::optional<std::string> refit;
  std::vector<std::string> methods, metrics;
  std::vector<int> cases;
  std::vector<std::size_t> Js;
  std::vector<std::string> nranges;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig c = load_config(a.common);
  apply(a.fit, c);
  if (a.horizon) c.horizon = *a.horizon;
  if (c.horizon < 1) throw ConfigError("horizon: must be at least 1");
  if (a.refit) c.refit = parse_refit(*a.refit);
  propagate(c);
  BenchmarkSpec& spec = c.benchmark;
  if (a.reps) spec.reps = *a.reps;
  if (!a.methods.empty()) {
    spec.methods.clear();
    for (const auto& m : a.methods) spec.methods.push_back(parse_method(m));
  }
  if (!a.metrics.empty()) spec.metrics = a.metrics;
  if (!a.cases.empty()) spec.cases = a.cases;
  if (!a.Js.empty()) spec.Js = a.Js;
  if (!a.nranges.empty()) {
    spec.nranges.clear();
    for (const auto& nr : a.nranges) spec.nranges.push_back(parse_nrange_flag(nr));
  }
  spec.validate();
  const std::string results_path = require_path(a.out, c.paths.output, "output");
  std::string summary_path = a.summary.empty() ? c.paths.summary : a.summary;
  if (summary_path.empty()) {
    const auto dot = results_path.rfind('.');
    summary_path = (dot == std::string::npos ? results_path : results_path.substr(0, dot)) + "_summary.csv";
  }

  const BenchmarkResult result = run_benchmark(spec);
  const auto summary = summarize(result.rows);
  {
    std::ofstream f(results_path);
    if (!f) throw ConfigError("cannot write '" + results_path + "'");
    write_results_csv(f, result.rows);
  }
  {
    std::ofstream f(summary_path);
    if (!f) throw ConfigError("cannot write '" + summary_path + "'");
    write_summary_csv(f, summary);
  }
  for (const auto& row : summary)
    out << fmt::format("case {} J={} N={} {:<20} {:<6} n={} mean={:.4f} sd={:.4f}\n", row.case_id, row.J,
                       format_nrange(row.nrange), row.method, row.metric, row.count, row.mean, row.sd);
  out << fmt::format("{} replicate failures\n", result.failures.size());
  for (const auto& f : result.failures) err << "failed: " << f << '\n';
  return kOk;
}

struct EvalArgs {
  std::string truth, curves;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const TruthPanel truth = load_truth(a.truth);
  const auto [estimate, first] = read_panel(a.curves);
  if (estimate.subjects() != truth.config.p)
    throw DimensionError(fmt::format("'{}' has {} subjects, the truth file {}", a.curves, estimate.subjects(),
                                     truth.config.p));
  if (first + estimate.curves() > truth.config.total_curves())
    throw DimensionError(fmt::format("'{}' reaches curve {}, the truth file holds {}", a.curves,
                                     first + estimate.curves(), truth.config.total_curves()));
  const CurvePanel latent = truth.latent_panel(estimate.grid, first, estimate.curves());
  out << fmt::format("nmse {}\n", format_double(nmse(latent, estimate)));
  return kOk;
}

struct SchemaArgs {
  std::string out;
  bool defaults = false;
};

int cmd_schema(const SchemaArgs& a, std::ostream& out, std::ostream&) {
  const nlohmann::json j = a.defaults ? run_config_to_json(parse_run_config(nlohmann::json::object())) : config_schema();
  if (a.out.empty()) {
    out << j.dump(2) << '\n';
  } else {
    std::ofstream f(a.out);
    if (!f) throw ConfigError("cannot write '" + a.out + "'");
    f << j.dump(2) << '\n';
  }
  return kOk;
}

void add_common(CLI::App& app, Common& c) {
  app.add_option("-c,--config", c.config, "JSON config file (see `smpca schema`)")->check(CLI::ExistingFile);
  app.add_option("--threads", c.threads, "worker threads; default SPECTRAL_MPCA_THREADS, else all cores");
  app.add_option("--seed", c.seed, "master seed (default 1)");
}

void add_fit_flags(CLI::App& app, FitFlags& f) {
  const FitOptions d;
  app.add_option("--method", f.method, "spectral_mpca | individual_spectral (default spectral_mpca)");
  app.add_option("--K", f.K, "components, or auto (default auto, K_max " + std::to_string(d.K_max) + ")");
  app.add_option("--L", f.L, "filter half-width, or auto (default auto, L_max " + std::to_string(d.filters.L_max) + ")");
  app.add_option("--h-max", f.h_max, "Bartlett lag window, or auto (default auto)");
  app.add_option("--bandwidth", f.bandwidth, "smoothing bandwidth, or auto for GCV (default auto)");
  app.add_option("--time-points", f.time_points, "time grid size (default " + std::to_string(d.time_points) + ")");
  app.add_option("--freq-points", f.freq_points, "frequency grid size (default " + std::to_string(d.freq_points) + ")");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral marginal PCA for multivariate functional time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "smpca 1.0.0");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic panel and its truth file");
  add_common(*simulate, sim.common);
  simulate->add_option("-o,--out", sim.out, "observation CSV (subject,curve,time,value)");
  simulate->add_option("--truth", sim.truth, "truth artifact for `eval`");
  simulate->add_option("--case", sim.case_id, "1 Gaussian, 2 t errors, 3 nonlinear scores (default 1)");
  simulate->add_option("--p", sim.p, "subjects (default 5)");
  simulate->add_option("--J", sim.J, "curves in the CSV (default 60)");
  simulate->add_option("--holdout", sim.holdout, "extra curves kept only in the truth file (default 0)");
  simulate->add_option("--nrange", sim.nrange, "observations per curve MIN-MAX (default 5-10)");
  simulate->add_option("--noise-ratio", sim.noise_ratio, "noise variance over E||eps||^2 (default 0.1)");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "estimate filters and scores from an observation CSV");
  add_common(*fit_cmd, fit.common);
  add_fit_flags(*fit_cmd, fit.fit);
  fit_cmd->add_option("-d,--data", fit.data, "observation CSV");
  fit_cmd->add_option("-m,--model", fit.model, "model artifact to write");
  fit_cmd->add_flag("--store-spectral", fit.store_spectral, "keep the marginal spectral field in the model");

  ImputeArgs imp;
  auto* impute_cmd = app.add_subcommand("impute", "reconstruct curves 1..J on the model grid");
  impute_cmd->add_option("-m,--model", imp.model, "model artifact")->required();
  impute_cmd->add_option("-o,--out", imp.out, "output CSV (default stdout)");

  ForecastArgs fc;
  auto* forecast_cmd = app.add_subcommand("forecast", "forecast curves J+1..J+horizon");
  add_common(*forecast_cmd, fc.common);
  forecast_cmd->add_option("-m,--model", fc.model, "model artifact")->required();
  forecast_cmd->add_option("--horizon", fc.horizon, "curves to forecast")->required();
  forecast_cmd->add_option("--P-max", fc.P_max, "largest VAR order, or auto (default auto)");
  forecast_cmd->add_option("-o,--out", fc.out, "output CSV (default stdout)");

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Monte Carlo comparison over a scenario grid");
  add_common(*bench_cmd, bench.common);
  add_fit_flags(*bench_cmd, bench.fit);
  bench_cmd->add_option("-o,--out", bench.out, "per-replicate results CSV");
  bench_cmd->add_option("--summary", bench.summary, "summary CSV (default <out>_summary.csv)");
  bench_cmd->add_option("--reps", bench.reps, "replicates per scenario (default 20)");
  bench_cmd->add_option("--methods", bench.methods, "methods to compare");
  bench_cmd->add_option("--metrics", bench.metrics, "nmse and/or nmspe");
  bench_cmd->add_option("--cases", bench.cases, "simulation cases");
  bench_cmd->add_option("--J", bench.Js, "series lengths");
  bench_cmd->add_option("--nranges", bench.nranges, "observation count ranges MIN-MAX");
  bench_cmd->add_option("--horizon", bench.horizon, "NMSPE horizon (default 5)");
  bench_cmd->add_option("--refit", bench.refit, "full | scores_only (default full)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "NMSE of an impute/forecast CSV against a truth file");
  eval_cmd->add_option("--truth", ev.truth, "truth artifact from `simulate`")->required();
  eval_cmd->add_option("--curves", ev.curves, "curve CSV from `impute` or `forecast`")->required();

  SchemaArgs sch;
  auto* schema_cmd = app.add_subcommand("schema", "print the config JSON Schema");
  schema_cmd->add_option("-o,--out", sch.out, "output file (default stdout)");
  schema_cmd->add_flag("--defaults", sch.defaults, "print a config holding every default instead");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "smpca 1.0.0\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out, err);
    if (fit_cmd->parsed()) return cmd_fit(fit, out, err);
    if (impute_cmd->parsed()) return cmd_impute(imp, out, err);
    if (forecast_cmd->parsed()) return cmd_forecast(fc, out, err);
    if (bench_cmd->parsed()) return cmd_benchmark(bench, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, out, err);
    if (schema_cmd->parsed()) return cmd_schema(sch, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ArgumentError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const InsufficientDataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kDataError;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const InvariantError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const GenerationError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}

}  // namespace smpca::cli
