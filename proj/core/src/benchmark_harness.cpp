#include "smpca/benchmark_harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <tuple>

#include "smpca/error.hpp"
#include "smpca/metrics.hpp"
#include "smpca/observations.hpp"
#include "smpca/parallel.hpp"

namespace smpca {

void BenchmarkSpec::validate() const {
  if (cases.empty() || Js.empty() || nranges.empty() || methods.empty() || metrics.empty())
    throw ConfigError("benchmark: cases, J, nranges, methods and metrics must be nonempty");
  if (reps < 1) throw ConfigError("benchmark.reps: must be at least 1");
  for (const auto& m : metrics)
    if (m != "nmse" && m != "nmspe") throw ConfigError("benchmark.metrics: unknown metric '" + m + "'");
  if (horizon < 1) throw ConfigError("nmspe.horizon: must be at least 1");
  for (int c : cases)
    for (std::size_t J : Js)
      for (const auto& nr : nranges) {
        SimConfig sc = base;
        sc.case_id = c;
        sc.J = J;
        sc.n_min = nr.first;
        sc.n_max = nr.second;
        sc.validate();
      }
}

std::uint64_t replicate_seed(std::uint64_t base, int case_id, std::size_t J, std::pair<std::size_t, std::size_t> nrange,
                             std::size_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(case_id), static_cast<std::uint32_t>(J),
                    static_cast<std::uint32_t>(nrange.first), static_cast<std::uint32_t>(nrange.second),
                    static_cast<std::uint32_t>(rep)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<BenchmarkRow> evaluate_replicate(const BenchmarkSpec& spec, int case_id, std::size_t J,
                                             std::pair<std::size_t, std::size_t> nrange, std::size_t rep) {
  const bool want_nmse = std::find(spec.metrics.begin(), spec.metrics.end(), "nmse") != spec.metrics.end();
  const bool want_nmspe = std::find(spec.metrics.begin(), spec.metrics.end(), "nmspe") != spec.metrics.end();
  SimConfig sc = spec.base;
  sc.case_id = case_id;
  sc.J = J;
  sc.n_min = nrange.first;
  sc.n_max = nrange.second;
  sc.holdout = want_nmspe ? spec.horizon : 0;
  sc.seed = replicate_seed(spec.seed, case_id, J, nrange, rep);
  const TruthPanel truth = gen_panel(sc);

  FitOptions options = spec.fit;
  std::vector<BenchmarkRow> rows;
  auto push = [&](Method m, const std::string& metric, double value) {
    rows.push_back({case_id, J, nrange, method_name(m), rep, metric, value});
  };

  if (want_nmse) {
    const ObservationSet train = truth.observations.prefix(J);
    const Moments moments = estimate_moments(train, options);
    const CurvePanel latent = truth.latent_panel(moments.grids.time, 0, J);
    for (Method m : spec.methods) {
      options.method = m;
      push(m, "nmse", nmse(latent, impute(fit_from_moments(train, moments, options))));
    }
  }
  if (want_nmspe) {
    // Rolling one-step protocol; all methods share the moments of each training prefix.
    std::map<Method, CurvePanel> forecasts;
    std::optional<Moments> frozen;
    if (spec.refit == RefitMode::ScoresOnly) frozen = estimate_moments(truth.observations.prefix(J), options);
    TimeGrid grid;
    for (std::size_t m = 1; m <= spec.horizon; ++m) {
      const std::size_t length = J + m - 1;
      const ObservationSet train = truth.observations.prefix(length);
      const Moments moments = frozen ? with_series_length(*frozen, length) : estimate_moments(train, options);
      grid = moments.grids.time;
      for (Method method : spec.methods) {
        options.method = method;
        const FittedModel model = fit_from_moments(train, moments, options);
        const CurvePanel next = forecast(model, fit_var_models(model, spec.var_P_max), 1);
        CurvePanel& acc = forecasts[method];
        if (acc.subject.empty()) {
          acc.grid = next.grid;
          acc.subject.assign(model.p, Eigen::MatrixXd(static_cast<Eigen::Index>(spec.horizon), next.subject[0].cols()));
        }
        for (std::size_t i = 0; i < model.p; ++i) acc.subject[i].row(static_cast<Eigen::Index>(m - 1)) = next.subject[i].row(0);
      }
    }
    const CurvePanel future = truth.latent_panel(grid, J, spec.horizon);
    for (Method method : spec.methods) push(method, "nmspe", nmse(future, forecasts.at(method)));
  }
  return rows;
}

BenchmarkResult run_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  struct Task {
    int case_id;
    std::size_t J;
    std::pair<std::size_t, std::size_t> nrange;
    std::size_t rep;
  };
  std::vector<Task> tasks;
  for (int c : spec.cases)
    for (std::size_t J : spec.Js)
      for (const auto& nr : spec.nranges)
        for (std::size_t rep = 1; rep <= spec.reps; ++rep) tasks.push_back({c, J, nr, rep});

  std::vector<std::vector<BenchmarkRow>> rows(tasks.size());
  std::vector<std::string> errors(tasks.size());
  BenchmarkSpec inner = spec;
  const std::size_t threads = resolve_threads(spec.threads);
  if (threads > 1 && tasks.size() > 1) inner.fit.threads = 1;
  parallel_for(tasks.size(), threads, [&](std::size_t n) {
    const Task& t = tasks[n];
    try {
      rows[n] = evaluate_replicate(inner, t.case_id, t.J, t.nrange, t.rep);
    } catch (const Error& e) {
      errors[n] = "case " + std::to_string(t.case_id) + ", J=" + std::to_string(t.J) + ", N=" + format_nrange(t.nrange) +
                  ", rep " + std::to_string(t.rep) + ": " + e.what();
    }
  });
  BenchmarkResult out;
  for (std::size_t n = 0; n < tasks.size(); ++n) {
    out.rows.insert(out.rows.end(), rows[n].begin(), rows[n].end());
    if (!errors[n].empty()) out.failures.push_back(errors[n]);
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<BenchmarkRow>& rows) {
  using Key = std::tuple<int, std::size_t, std::size_t, std::size_t, std::string, std::string>;
  std::map<Key, std::vector<double>> groups;
  std::vector<Key> order;
  for (const auto& r : rows) {
    const Key key{r.case_id, r.J, r.nrange.first, r.nrange.second, r.method, r.metric};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& v = groups.at(key);
    SummaryRow s;
    std::tie(s.case_id, s.J, s.nrange.first, s.nrange.second, s.method, s.metric) = key;
    s.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    out.push_back(s);
  }
  return out;
}

std::string format_nrange(std::pair<std::size_t, std::size_t> nrange) {
  return std::to_string(nrange.first) + "-" + std::to_string(nrange.second);
}

void write_results_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "case,J,nrange,method,rep,metric,value\n";
  for (const auto& r : rows)
    out << r.case_id << ',' << r.J << ',' << format_nrange(r.nrange) << ',' << r.method << ',' << r.rep << ','
        << r.metric << ',' << format_double(r.value) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "case,J,nrange,method,metric,n,mean,sd,min,max\n";
  for (const auto& s : rows)
    out << s.case_id << ',' << s.J << ',' << format_nrange(s.nrange) << ',' << s.method << ',' << s.metric << ','
        << s.count << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ',' << format_double(s.min) << ','
        << format_double(s.max) << '\n';
}

}  // namespace smpca
