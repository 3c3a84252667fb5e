#pragma once

// JSON forms of models, gauges, factor graphs, results and experiment
// configs (nlohmann::json).

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaugegm/convert.hpp"
#include "gaugegm/errors.hpp"
#include "gaugegm/experiment.hpp"
#include "gaugegm/gauge.hpp"
#include "gaugegm/gauged.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

using json = nlohmann::json;

// {"edges": [{"id", "endpoints": [a, b]}], "nodes": [{"id", "local_order", "table"}], "log_scale"}
inline json model_to_json(const ForneyGM& gm) {
  json j;
  j["edges"] = json::array();
  for (const Edge& e : gm.edges()) j["edges"].push_back({{"id", e.id}, {"endpoints", e.endpoints}});
  j["nodes"] = json::array();
  for (const Node& n : gm.nodes()) {
    j["nodes"].push_back({{"id", n.id}, {"local_order", n.local_order}, {"table", n.table}});
  }
  j["log_scale"] = gm.log_scale();
  if (gm.gauged()) j["gauged"] = true;
  return j;
}

inline ForneyGM model_from_json(const json& j) {
  try {
    ModelParts p;
    p.log_scale = j.value("log_scale", 0.0);
    for (const auto& e : j.at("edges")) {
      p.edges.push_back({e.at("id").get<EdgeId>(), e.at("endpoints").get<std::array<NodeId, 2>>()});
    }
    for (const auto& n : j.at("nodes")) {
      p.nodes.push_back({n.at("id").get<NodeId>(), n.at("local_order").get<std::vector<EdgeId>>(),
                         n.at("table").get<std::vector<double>>()});
    }
    // Ids must be dense; order the records by id so they index the vectors.
    std::sort(p.edges.begin(), p.edges.end(), [](const Edge& x, const Edge& y) { return x.id < y.id; });
    std::sort(p.nodes.begin(), p.nodes.end(), [](const Node& x, const Node& y) { return x.id < y.id; });
    return ForneyGM(std::move(p), j.value("gauged", false));
  } catch (const json::exception& e) {
    throw InvalidModel(std::string("bad model json: ") + e.what());
  }
}

// {"gauges": [{"edge": e, "g": [g00, g01, g10, g11]}]}, primary direction.
inline json gauges_to_json(const GaugeSet& g) {
  json arr = json::array();
  for (EdgeId e = 0; e < g.size(); ++e) arr.push_back({{"edge", e}, {"g", g.primary(e).m}});
  return json{{"gauges", arr}};
}

inline GaugeSet gauges_from_json(const json& j) {
  try {
    const auto& arr = j.at("gauges");
    std::vector<Mat2> mats(arr.size());
    std::vector<bool> seen(arr.size(), false);
    for (const auto& item : arr) {
      const auto e = item.at("edge").get<EdgeId>();
      if (e >= mats.size() || seen[e]) throw MissingGauge("gauge edge ids must be 0..n-1 without repeats");
      seen[e] = true;
      mats[e] = Mat2{item.at("g").get<std::array<double, 4>>()};
    }
    return GaugeSet(std::move(mats));
  } catch (const json::exception& e) {
    throw MissingGauge(std::string("bad gauge json: ") + e.what());
  }
}

// {"num_variables": n, "factors": [{"scope": [...], "table": [...]}, ...]}
inline FactorGraph factor_graph_from_json(const json& j) {
  try {
    FactorGraph fg;
    fg.num_variables = j.at("num_variables").get<std::size_t>();
    for (const auto& f : j.at("factors")) {
      fg.factors.push_back({f.at("scope").get<std::vector<std::size_t>>(), f.at("table").get<std::vector<double>>()});
    }
    return fg;
  } catch (const json::exception& e) {
    throw InvalidModel(std::string("bad factor graph json: ") + e.what());
  }
}

inline json result_to_json(const LowerBoundResult& r) {
  json j;
  j["method"] = r.method;
  j["log_lower_bound"] = r.log_lower_bound;
  j["gauges"] = gauges_to_json(r.gauges)["gauges"];
  if (r.q) j["q"] = r.q->p1;
  j["rounds"] = r.diagnostics.rounds;
  j["inner_iterations"] = r.diagnostics.inner_iterations;
  j["converged"] = r.diagnostics.converged;
  j["trace"] = r.diagnostics.trace;
  j["notes"] = r.diagnostics.notes;
  if (r.exact) j["exact"] = *r.exact;
  return j;
}

/// LowerBoundResult as read back for corrections: method, bound and gauges.
inline LowerBoundResult result_from_json(const json& j) {
  try {
    LowerBoundResult r;
    r.method = j.value("method", "gbp");
    r.log_lower_bound = j.at("log_lower_bound").get<double>();
    r.gauges = gauges_from_json(j);
    return r;
  } catch (const json::exception& e) {
    throw InvalidModel(std::string("bad result json: ") + e.what());
  }
}

/// "a:b:step" -> a, a + step, ..., up to b (inclusive, with 1e-9 slack).
inline std::vector<double> parse_grid(const std::string& spec) {
  double a, b, step;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw InvalidRecipe("grid must look like a:b:step, got '" + spec + "'");
  }
  if (!(step > 0.0) || b < a) throw InvalidRecipe("grid needs step > 0 and b >= a");
  const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(a + static_cast<double>(k) * step);
  return out;
}

/// Missing keys keep the defaults. "beta_grid" is a list or an "a:b:step"
/// string.
inline ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    if (j.contains("graph")) c.family = parse_family(j["graph"].get<std::string>());
    c.size = j.value("size", c.size);
    c.rows = j.value("rows", c.rows);
    c.cols = j.value("cols", c.cols);
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("sign")) {
      const auto& s = j["sign"];
      if (s.is_string()) {
        const auto v = s.get<std::string>();
        if (v != "plus" && v != "minus") throw InvalidRecipe("sign must be plus or minus");
        c.sign = v == "plus" ? 1 : -1;
      } else {
        c.sign = s.get<int>();
      }
    }
    if (j.contains("beta_grid")) {
      const auto& g = j["beta_grid"];
      c.beta_grid = g.is_string() ? parse_grid(g.get<std::string>()) : g.get<std::vector<double>>();
    }
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.methods = j.value("methods", c.methods);
    c.exact_cap = j.value("exact_cap", c.exact_cap);
    c.threads = j.value("threads", c.threads);
    c.gauged.schedule.delta0 = j.value("delta0", c.gauged.schedule.delta0);
    c.gauged.schedule.decay = j.value("decay", c.gauged.schedule.decay);
    c.gauged.schedule.rounds = j.value("rounds", c.gauged.schedule.rounds);
    c.gauged.improvement_tol = j.value("tol", c.gauged.improvement_tol);
    c.gauged.opt.max_iters = j.value("budget", c.gauged.opt.max_iters);
    c.gauged.restarts = j.value("restarts", c.gauged.restarts);
    c.gauged.seed = j.value("solver_seed", c.gauged.seed);
    c.budget_fraction = j.value("budget_fraction", c.budget_fraction);
    if (j.contains("inner")) c.inner = parse_inner_method(j["inner"].get<std::string>());
    c.gmf_gbp_start = j.value("gmf_gbp_start", c.gmf_gbp_start);
    c.bp.init_bias = j.value("bp_init_bias", c.bp.init_bias);
    c.bp.damping = j.value("bp_damping", c.bp.damping);
    if (c.family == GraphFamily::grid && c.rows * c.cols != 0) c.size = c.rows * c.cols;
    return c;
  } catch (const json::exception& e) {
    throw InvalidRecipe(std::string("bad experiment config: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidModel("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidModel(path + ": " + e.what());
  }
}

}  // namespace gaugegm
