#pragma once

// Sweeps over an interaction-strength grid: generate models, run a method
// set, attach metrics, emit CSV.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "gaugegm/bp.hpp"
#include "gaugegm/correction.hpp"
#include "gaugegm/errors.hpp"
#include "gaugegm/exact.hpp"
#include "gaugegm/gauged.hpp"
#include "gaugegm/generators.hpp"
#include "gaugegm/mean_field.hpp"
#include "gaugegm/metrics.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"mf",         "bp",           "gmf", "gbp", "gbp-single",
                                             "gbp-multiple", "gbp-sequential"};
  return m;
}

struct ExperimentConfig {
  GraphFamily family = GraphFamily::complete;
  std::size_t size = 4;
  std::size_t rows = 0;
  std::size_t cols = 0;
  InteractionMode mode = InteractionMode::generic;
  int sign = +1;
  std::vector<double> beta_grid = {1.0};  // the T of each grid point
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::vector<std::string> methods = {"mf", "gmf"};
  std::size_t exact_cap = kDefaultEnumerationCap;
  GaugedConfig gauged;
  BpConfig bp;
  double budget_fraction = 0.1;
  InnerMethod inner = InnerMethod::gbp;
  /// gmf rows also start from the G-BP gauges with q at the zero point.
  bool gmf_gbp_start = false;
  std::size_t threads = 1;

  void validate() const {
    if (beta_grid.empty()) throw InvalidRecipe("empty beta grid");
    if (trials == 0) throw InvalidRecipe("trials must be positive");
    for (const auto& m : methods) {
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
        throw InvalidRecipe("unknown method '" + m + "'");
      }
    }
    gauged.schedule.validate();
  }
};

struct ExperimentRow {
  std::size_t instance = 0;
  std::string graph;
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  std::string mode;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  std::optional<double> log_z_estimate;
  std::optional<double> log_z_exact;
  std::optional<double> error;
  std::optional<double> ratio;
  double runtime_ms = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string note;
};

inline constexpr const char* kCsvHeader =
    "instance,graph,n_nodes,n_edges,mode,beta,seed,method,log_z_estimate,log_z_exact,error,ratio,runtime_ms,"
    "iterations,converged,note";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(const ExperimentRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string s;
  s += std::to_string(r.instance) + ',' + r.graph + ',' + std::to_string(r.n_nodes) + ',' +
       std::to_string(r.n_edges) + ',' + r.mode + ',' + format_double(r.beta) + ',' + std::to_string(r.seed) + ',' +
       r.method + ',' + opt(r.log_z_estimate) + ',' + opt(r.log_z_exact) + ',' + opt(r.error) + ',' + opt(r.ratio) +
       ',' + format_double(r.runtime_ms) + ',' + std::to_string(r.iterations) + ',' + (r.converged ? "1" : "0") +
       ',' + csv_field(r.note);
  return s;
}

/// Outcome of one method on one model.
struct MethodOutcome {
  double estimate = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string note;
  double runtime_ms = 0.0;
};

/// Runs the methods on one model. G-BP is computed once and shared by the
/// corrections. Failures are reported per method through `on_error`.
inline std::map<std::string, MethodOutcome> run_methods(
    const ForneyGM& gm, const std::vector<std::string>& methods, const ExperimentConfig& cfg,
    const std::function<void(const std::string&, const std::string&)>& on_error) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  std::map<std::string, MethodOutcome> out;
  std::optional<LowerBoundResult> gbp;
  std::optional<std::string> gbp_error;
  double gbp_ms = 0.0;

  auto need_gbp = [&]() -> const LowerBoundResult& {
    if (!gbp && !gbp_error) {
      const auto t0 = clock::now();
      try {
        gbp = gbp_solve(gm, cfg.gauged);
      } catch (const Error& e) {
        gbp_error = e.what();
      }
      gbp_ms = ms_since(t0);
    }
    if (gbp_error) throw Error("gbp base failed: " + *gbp_error);
    return *gbp;
  };
  auto from_bound = [](const LowerBoundResult& r) {
    MethodOutcome o;
    o.estimate = r.log_lower_bound;
    o.iterations = r.diagnostics.inner_iterations;
    o.converged = r.diagnostics.converged;
    for (const auto& n : r.diagnostics.notes) o.note += (o.note.empty() ? "" : "; ") + n;
    return o;
  };

  for (const std::string& m : methods) {
    const auto t0 = clock::now();
    try {
      MethodOutcome o;
      if (m == "mf") {
        const ForneyGM nm = normalized(gm);
        const auto r = mf_solve(nm, ProductDistribution::uniform(nm.num_edges()), cfg.gauged.mf);
        o.estimate = r.value;
        o.iterations = r.sweeps;
        o.converged = r.converged;
      } else if (m == "bp") {
        const auto r = bp_solve(gm, cfg.bp);
        o.estimate = r.log_z;
        o.iterations = r.iterations;
        o.converged = r.converged;
        if (cfg.mode == InteractionMode::generic) o.note = "not-a-lower-bound";
      } else if (m == "gmf") {
        o = from_bound(cfg.gmf_gbp_start ? gmf_solve_with_gbp_start(gm, need_gbp(), cfg.gauged)
                                         : gmf_solve(gm, cfg.gauged));
      } else if (m == "gbp") {
        o = from_bound(need_gbp());
      } else if (m == "gbp-single") {
        o = from_bound(gbp_single(gm, need_gbp()));
      } else if (m == "gbp-multiple") {
        o = from_bound(gbp_multiple(gm, need_gbp()));
      } else if (m == "gbp-sequential") {
        SequentialConfig sc;
        sc.budget_fraction = cfg.budget_fraction;
        sc.inner = cfg.inner;
        sc.base = cfg.gauged;
        o = from_bound(gbp_sequential(gm, need_gbp(), sc));
      } else {
        throw InvalidRecipe("unknown method '" + m + "'");
      }
      o.runtime_ms = ms_since(t0);
      if (m == "gbp") o.runtime_ms = gbp_ms;
      out[m] = std::move(o);
    } catch (const Error& e) {
      on_error(m, e.what());
    }
  }
  return out;
}

/// Per-trial model seed.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t grid_index, std::size_t trial) {
  return splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(grid_index) << 32) | trial));
}

inline ModelRecipe trial_recipe(const ExperimentConfig& cfg, std::size_t grid_index, std::size_t trial) {
  ModelRecipe r;
  r.family = cfg.family;
  r.size = cfg.size;
  r.rows = cfg.rows;
  r.cols = cfg.cols;
  r.mode = cfg.mode;
  r.T = cfg.beta_grid[grid_index];
  r.seed = trial_seed(cfg.seed, grid_index, trial);
  r.sign = cfg.sign;
  return r;
}

/// All rows of one instance, in the configured method order.
inline std::vector<ExperimentRow> run_instance(const ExperimentConfig& cfg, std::size_t grid_index,
                                               std::size_t trial) {
  const ModelRecipe recipe = trial_recipe(cfg, grid_index, trial);
  ExperimentRow proto;
  proto.instance = grid_index * cfg.trials + trial;
  proto.graph = to_string(cfg.family);
  proto.mode = to_string(cfg.mode);
  proto.beta = recipe.T;
  proto.seed = recipe.seed;

  std::vector<ExperimentRow> rows;
  auto fail_all = [&](const std::string& msg) {
    for (const auto& m : cfg.methods) {
      ExperimentRow r = proto;
      r.method = m;
      r.note = "error: " + msg;
      rows.push_back(std::move(r));
    }
    return rows;
  };

  std::optional<ForneyGM> gm;
  try {
    gm = gen_model(recipe);
  } catch (const Error& e) {
    return fail_all(e.what());
  }
  proto.n_nodes = gm->num_nodes();
  proto.n_edges = gm->num_edges();

  const bool with_exact = gm->num_edges() <= cfg.exact_cap;
  std::optional<double> exact;
  std::string exact_error;
  if (with_exact) {
    try {
      exact = exact_log_partition(*gm, cfg.exact_cap);
    } catch (const Error& e) {
      exact_error = e.what();
    }
  }

  // The ratio metric needs mf even if it was not requested.
  std::vector<std::string> to_run = cfg.methods;
  if (!with_exact && std::find(to_run.begin(), to_run.end(), "mf") == to_run.end()) to_run.insert(to_run.begin(), "mf");

  std::map<std::string, std::string> errors;
  const auto outcomes =
      run_methods(*gm, to_run, cfg, [&](const std::string& m, const std::string& msg) { errors[m] = msg; });

  for (const auto& m : cfg.methods) {
    ExperimentRow r = proto;
    r.method = m;
    r.log_z_exact = exact;
    auto it = outcomes.find(m);
    if (it == outcomes.end()) {
      r.note = "error: " + errors[m];
      rows.push_back(std::move(r));
      continue;
    }
    const MethodOutcome& o = it->second;
    r.log_z_estimate = o.estimate;
    r.runtime_ms = o.runtime_ms;
    r.iterations = o.iterations;
    r.converged = o.converged;
    r.note = o.note;
    if (with_exact) {
      if (exact) {
        try {
          r.error = error_metric(*exact, o.estimate);
        } catch (const Error& e) {
          r.note += (r.note.empty() ? "" : "; ") + std::string("error: ") + e.what();
        }
      } else {
        r.note += (r.note.empty() ? "" : "; ") + std::string("error: exact failed: ") + exact_error;
      }
    } else {
      auto mf = outcomes.find("mf");
      if (mf != outcomes.end()) {
        r.ratio = ratio_metric(o.estimate, mf->second.estimate);
      } else {
        r.note += (r.note.empty() ? "" : "; ") + std::string("error: mf failed: ") + errors["mf"];
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Every row of the sweep, ordered by instance id and then method order.
/// With threads > 1 trials run on a worker pool; the order is unchanged.
inline std::vector<ExperimentRow> run_experiment_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.beta_grid.size() * cfg.trials;
  std::vector<std::vector<ExperimentRow>> per_instance(n);
  auto work = [&](std::size_t i) { per_instance[i] = run_instance(cfg, i / cfg.trials, i % cfg.trials); };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<ExperimentRow> rows;
  for (auto& v : per_instance) {
    for (auto& r : v) rows.push_back(std::move(r));
  }
  return rows;
}

struct SummaryRow {
  double beta = 0.0;
  std::string method;
  std::string metric;  // "error" or "ratio"
  std::size_t count = 0;
  std::size_t failures = 0;
  double mean_estimate = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline constexpr const char* kSummaryHeader = "beta,method,metric,count,failures,mean_estimate,mean,stddev";

inline std::vector<SummaryRow> summarize(const ExperimentConfig& cfg, const std::vector<ExperimentRow>& rows) {
  std::vector<SummaryRow> out;
  for (double beta : cfg.beta_grid) {
    for (const auto& m : cfg.methods) {
      SummaryRow s;
      s.beta = beta;
      s.method = m;
      double sum = 0.0, sum_sq = 0.0, sum_est = 0.0;
      std::size_t n_est = 0;
      for (const auto& r : rows) {
        if (r.beta != beta || r.method != m) continue;
        if (r.log_z_estimate) {
          sum_est += *r.log_z_estimate;
          ++n_est;
        }
        const auto& v = r.error ? r.error : r.ratio;
        if (r.error) s.metric = "error";
        if (r.ratio) s.metric = "ratio";
        if (!v) {
          ++s.failures;
          continue;
        }
        ++s.count;
        sum += *v;
        sum_sq += *v * *v;
      }
      if (s.count > 0) {
        s.mean = sum / static_cast<double>(s.count);
        s.stddev = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(s.count) - s.mean * s.mean));
      }
      if (n_est > 0) s.mean_estimate = sum_est / static_cast<double>(n_est);
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline std::string to_csv(const SummaryRow& s) {
  return format_double(s.beta) + ',' + s.method + ',' + s.metric + ',' + std::to_string(s.count) + ',' +
         std::to_string(s.failures) + ',' + format_double(s.mean_estimate) + ',' + format_double(s.mean) + ',' +
         format_double(s.stddev);
}

/// Writes the row CSV to `csv` and, if given, the per-grid-point summary to
/// `summary`. Returns the rows.
inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, std::ostream& csv,
                                                 std::ostream* summary = nullptr) {
  auto rows = run_experiment_rows(cfg);
  csv << kCsvHeader << '\n';
  for (const auto& r : rows) csv << to_csv(r) << '\n';
  if (summary) {
    *summary << kSummaryHeader << '\n';
    for (const auto& s : summarize(cfg, rows)) *summary << to_csv(s) << '\n';
  }
  return rows;
}

/// The CSV with the runtime column blanked, for reproducibility checks.
inline std::string without_runtime(const std::vector<ExperimentRow>& rows) {
  std::string out = std::string(kCsvHeader) + '\n';
  for (ExperimentRow r : rows) {
    r.runtime_ms = 0.0;
    out += to_csv(r) + '\n';
  }
  return out;
}

}  // namespace gaugegm
