#pragma once

// Gauged mean-field (G-MF) and gauged belief propagation (G-BP) lower bounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/gauge.hpp"
#include "gaugegm/mean_field.hpp"
#include "gaugegm/model.hpp"
#include "gaugegm/optimizer.hpp"

namespace gaugegm {

/// delta_t = delta0 * decay^(t - 1), t = 1..rounds.
struct BarrierSchedule {
  double delta0 = 0.1;
  double decay = 0.5;
  std::size_t rounds = 10;

  double delta(std::size_t t) const { return delta0 * std::pow(decay, static_cast<double>(t - 1)); }

  void validate() const {
    if (!(delta0 > 0.0) || !(decay > 0.0 && decay < 1.0) || rounds == 0) {
      throw InvalidModel("barrier schedule needs delta0 > 0, decay in (0, 1), rounds >= 1");
    }
  }
};

struct GaugedConfig {
  BarrierSchedule schedule;
  OptimizerConfig opt;
  MfConfig mf;
  double improvement_tol = 1e-8;  // round-over-round early stop
  std::size_t restarts = 0;       // extra starts from random edge flips plus noise
  std::uint64_t seed = 0;
  /// G-MF Step C ascends over gauges and q in [delta_t, 1 - delta_t]
  /// together. false gives the gauge-only Step C.
  bool joint_step_c = true;
  std::size_t balance_every = 50;  // inner iterations between gauge rebalancing
  /// G-BP also starts from edge swaps that move the zero configuration to
  /// the rounded mean-field mode.
  bool mf_mode_start = true;
};

struct LowerBoundDiagnostics {
  std::size_t rounds = 0;
  std::size_t inner_iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // best bound after each round
  std::vector<std::string> notes;
};

struct LowerBoundResult {
  std::string method;
  double log_lower_bound = -std::numeric_limits<double>::infinity();  // includes log_scale
  GaugeSet gauges;
  std::optional<ProductDistribution> q;
  LowerBoundDiagnostics diagnostics;
  std::optional<double> exact;
};

/// A G-MF starting point.
struct GmfStart {
  GaugeSet gauges;
  ProductDistribution q;
  std::string label;
};

namespace detail {

inline bool all_nonnegative(const ForneyGM& gm) {
  for (const Node& n : gm.nodes()) {
    for (double v : n.table) {
      if (v < 0.0) return false;
    }
  }
  return true;
}

inline AscentObjective gauge_ascent_objective(const ForneyGM& gm, const NodeWeights& w, double det_floor) {
  return [&gm, &w, det_floor](std::span<const double> p, bool need_grad) -> std::optional<Evaluation> {
    const GaugeSet g = GaugeSet::from_params(p);
    if (g.min_abs_det() < det_floor) return std::nullopt;
    auto r = try_gauge_objective(gm, g, w, need_grad);
    if (!r) return std::nullopt;
    return Evaluation{r->value, std::move(r->gradient)};
  };
}

inline double sigmoid(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

// Marginals p = delta + (1 - 2 delta) sigmoid(u) and back.
inline double squash(double u, double delta) { return delta + (1.0 - 2.0 * delta) * sigmoid(u); }
inline double unsquash(double p, double delta) {
  const double s = std::clamp((p - delta) / (1.0 - 2.0 * delta), 1e-12, 1.0 - 1e-12);
  return std::log(s / (1.0 - s));
}

// sum_a E_q[log f_{a,G}] + H(q) over [gauge params | logits], all transformed
// entries required positive.
inline AscentObjective joint_gmf_objective(const ForneyGM& gm, double delta, double det_floor) {
  return [&gm, delta, det_floor](std::span<const double> p, bool need_grad) -> std::optional<Evaluation> {
    const std::size_t ne = gm.num_edges();
    const GaugeSet g = GaugeSet::from_params(p.first(4 * ne));
    if (g.min_abs_det() < det_floor) return std::nullopt;
    std::vector<double> q1(ne);
    for (EdgeId e = 0; e < ne; ++e) q1[e] = squash(p[4 * ne + e], delta);

    Evaluation out;
    if (need_grad) out.gradient.assign(5 * ne, 0.0);
    std::vector<double> dq(ne, 0.0);
    std::vector<double> coeff;
    for (NodeId a = 0; a < gm.num_nodes(); ++a) {
      const Node& node = gm.node(a);
      const std::size_t d = node.degree();
      const auto t = transformed_table(gm, g, a);
      coeff.assign(t.size(), 0.0);
      for (std::size_t x = 0; x < t.size(); ++x) {
        if (!(t[x] > 0.0)) return std::nullopt;
        double w = 1.0;
        for (std::size_t pos = 0; pos < d; ++pos) {
          const double pe = q1[node.local_order[pos]];
          w *= (x & local_bit(d, pos)) ? pe : 1.0 - pe;
        }
        const double lt = std::log(t[x]);
        out.value += w * lt;
        if (!need_grad) continue;
        coeff[x] = w / t[x];
        for (std::size_t pos = 0; pos < d; ++pos) {
          const EdgeId e = node.local_order[pos];
          dq[e] += (x & local_bit(d, pos)) ? w / q1[e] * lt : -w / (1.0 - q1[e]) * lt;
        }
      }
      if (need_grad) detail::accumulate_linear_gradient(gm, g, a, coeff, out.gradient);
    }
    for (EdgeId e = 0; e < ne; ++e) {
      const double pe = q1[e];
      out.value -= pe * std::log(pe) + (1.0 - pe) * std::log(1.0 - pe);
      if (need_grad) {
        const double s = sigmoid(p[4 * ne + e]);
        out.gradient[4 * ne + e] = (dq[e] - std::log(pe / (1.0 - pe))) * (1.0 - 2.0 * delta) * s * (1.0 - s);
      }
    }
    return out;
  };
}

struct GaugeAscent {
  GaugeSet gauges;
  std::vector<double> tail;  // parameters after the gauge block
  double value = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

// inner_ascent in chunks of `chunk` iterations, rebalancing the gauge block
// between chunks. The total budget is opt.max_iters.
inline GaugeAscent balanced_ascent(const ForneyGM& gm, const AscentObjective& objective, GaugeSet g,
                                   std::vector<double> tail, const OptimizerConfig& opt, std::size_t chunk) {
  GaugeAscent out;
  out.gauges = std::move(g);
  out.tail = std::move(tail);
  auto pack = [&](const GaugeSet& gs) {
    auto v = gs.params();
    v.insert(v.end(), out.tail.begin(), out.tail.end());
    return v;
  };
  bool first = true;
  while (first || out.iterations < opt.max_iters) {
    first = false;
    OptimizerConfig c = opt;
    c.max_iters = std::min(std::max<std::size_t>(chunk, 1), opt.max_iters - out.iterations);
    auto start = pack(balanced(gm, out.gauges));
    if (!objective(start, false)) start = pack(out.gauges);
    auto res = inner_ascent(objective, std::move(start), c);
    if (!std::isfinite(res.value)) break;
    const std::size_t ng = 4 * gm.num_edges();
    out.gauges = GaugeSet::from_params(std::span<const double>(res.point).first(ng));
    out.tail.assign(res.point.begin() + static_cast<std::ptrdiff_t>(ng), res.point.end());
    out.value = res.value;
    out.iterations += res.diagnostics.iterations;
    if (res.diagnostics.converged || res.diagnostics.stalled || res.diagnostics.iterations == 0) {
      out.converged = res.diagnostics.converged;
      break;
    }
  }
  return out;
}

// Random edge flips composed with identity plus uniform noise in
// [-scale, scale], resampled until every transformed entry is positive.
inline std::optional<GaugeSet> random_start(const ForneyGM& gm, std::uint64_t seed, double scale, double det_floor) {
  std::mt19937_64 rng(seed);
  const NodeWeights all = uniform_weights(gm, 1.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Mat2> mats(gm.num_edges());
    for (Mat2& m : mats) {
      if ((rng() >> 63) != 0) m = Mat2::swap();
      for (double& v : m.m) v += scale * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
    }
    GaugeSet g(std::move(mats));
    if (gauge_feasible(gm, g, all, det_floor)) return g;
  }
  return std::nullopt;
}

inline std::uint64_t restart_seed(std::uint64_t seed, std::size_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double safe_mf_objective(const ForneyGM& gm, const ProductDistribution& q) {
  if (!all_nonnegative(gm)) return -std::numeric_limits<double>::infinity();
  try {
    return mf_objective(gm, q);
  } catch (const PositiveWeightOnZeroFactor&) {
    return -std::numeric_limits<double>::infinity();
  }
}

inline LowerBoundResult gmf_single_start(const ForneyGM& gm, const GmfStart& start, const GaugedConfig& cfg) {
  LowerBoundResult out;
  out.method = "gmf";
  GaugeSet g = start.gauges;
  ProductDistribution q = start.q;

  auto consider = [&](const GaugeSet& cand_g, const ProductDistribution& cand_q) {
    const double v = safe_mf_objective(apply_gauge(gm, cand_g), cand_q);
    if (v > out.log_lower_bound) {
      out.log_lower_bound = v;
      out.gauges = cand_g;
      out.q = cand_q;
    }
  };
  consider(g, q);

  double last = out.log_lower_bound;
  for (std::size_t t = 1; t <= cfg.schedule.rounds; ++t) {
    const double delta = cfg.schedule.delta(t);

    // Step A
    q = mf_solve(apply_gauge(gm, g), q, cfg.mf).q;
    consider(g, q);

    // Step B
    for (double& p : q.p1) p = std::clamp(p, delta, 1.0 - delta);

    // Step C
    if (cfg.joint_step_c) {
      std::vector<double> logits(q.size());
      for (EdgeId e = 0; e < q.size(); ++e) logits[e] = unsquash(q.p1[e], delta);
      auto res = balanced_ascent(gm, joint_gmf_objective(gm, delta, cfg.opt.det_floor), g, std::move(logits),
                                 cfg.opt, cfg.balance_every);
      out.diagnostics.inner_iterations += res.iterations;
      if (std::isfinite(res.value)) {
        g = std::move(res.gauges);
        for (EdgeId e = 0; e < q.size(); ++e) q.p1[e] = squash(res.tail[e], delta);
      } else {
        out.diagnostics.notes.push_back("round " + std::to_string(t) + ": step C start infeasible, gauges kept");
      }
    } else {
      const NodeWeights w = product_weights(gm, q.p1);
      auto run_step_c = [&](const NodeWeights& weights) {
        auto res = balanced_ascent(gm, gauge_ascent_objective(gm, weights, cfg.opt.det_floor), g, {}, cfg.opt,
                                   cfg.balance_every);
        out.diagnostics.inner_iterations += res.iterations;
        return res;
      };
      auto res = run_step_c(w);
      if (std::isfinite(res.value)) {
        GaugeSet next = res.gauges;
        if (!all_nonnegative(apply_gauge(gm, next))) {
          out.diagnostics.notes.push_back("round " + std::to_string(t) + ": negative entry after step C, restoring");
          res = run_step_c(add_weights(w, uniform_weights(gm, 1.0), 1e-6));
          if (std::isfinite(res.value)) next = res.gauges;
        }
        if (all_nonnegative(apply_gauge(gm, next))) g = std::move(next);
      } else {
        out.diagnostics.notes.push_back("round " + std::to_string(t) + ": step C start infeasible, gauges kept");
      }
    }
    consider(g, q);

    out.diagnostics.rounds = t;
    out.diagnostics.trace.push_back(out.log_lower_bound);
    if (t > 1 && out.log_lower_bound - last < cfg.improvement_tol) {
      out.diagnostics.converged = true;
      break;
    }
    last = out.log_lower_bound;
  }
  return out;
}

inline void keep_best(std::optional<LowerBoundResult>& best, LowerBoundResult cand) {
  const std::size_t iters = cand.diagnostics.inner_iterations + (best ? best->diagnostics.inner_iterations : 0);
  if (!best || cand.log_lower_bound > best->log_lower_bound) best = std::move(cand);
  best->diagnostics.inner_iterations = iters;
}

// Each node's barrier is the mean of log f_{a,G} over its entries. A plain sum
// would change by (2^deg(a) - 2^deg(b)) log c under G_ab -> c G_ab, which is
// unbounded whenever endpoint degrees differ.
inline NodeWeights barrier_weights(const ForneyGM& gm) {
  NodeWeights w = uniform_weights(gm, 1.0);
  for (auto& row : w) {
    for (double& v : row) v /= static_cast<double>(row.size());
  }
  return w;
}

inline LowerBoundResult gbp_single_start(const ForneyGM& gm, GaugeSet g, const GaugedConfig& cfg) {
  LowerBoundResult out;
  out.method = "gbp";
  const NodeWeights zero = zero_config_weights(gm);
  const NodeWeights all = barrier_weights(gm);

  auto bound_of = [&](const GaugeSet& cand) {
    if (!all_nonnegative(apply_gauge(gm, cand))) return -std::numeric_limits<double>::infinity();
    auto r = try_gauge_objective(gm, cand, zero, false);
    return r ? r->value + gm.log_scale() : -std::numeric_limits<double>::infinity();
  };
  out.gauges = g;
  out.log_lower_bound = bound_of(g);

  double last = out.log_lower_bound;
  for (std::size_t t = 1; t <= cfg.schedule.rounds; ++t) {
    const NodeWeights w = add_weights(zero, all, cfg.schedule.delta(t));
    auto res = balanced_ascent(gm, gauge_ascent_objective(gm, w, cfg.opt.det_floor), g, {}, cfg.opt,
                               cfg.balance_every);
    out.diagnostics.inner_iterations += res.iterations;
    if (std::isfinite(res.value)) g = std::move(res.gauges);
    const double b = bound_of(g);
    if (b > out.log_lower_bound) {
      out.log_lower_bound = b;
      out.gauges = g;
    }
    out.diagnostics.rounds = t;
    out.diagnostics.trace.push_back(out.log_lower_bound);
    if (t > 1 && out.log_lower_bound - last < cfg.improvement_tol) {
      out.diagnostics.converged = true;
      break;
    }
    last = out.log_lower_bound;
  }
  return out;
}

}  // namespace detail

/// G-MF by alternating mean-field (Step A), marginal perturbation into
/// [delta_t, 1 - delta_t] (Step B) and ascent of sum_a E_q[log f_{a,G}] + H(q)
/// (Step C). The default start is identity gauges with uniform q; restarts and
/// `extra_starts` are tried as well and the best bound is kept. Gauges refer
/// to the input model.
inline LowerBoundResult gmf_solve(const ForneyGM& input, const GaugedConfig& cfg = {},
                                  const std::vector<GmfStart>& extra_starts = {}) {
  cfg.schedule.validate();
  const ForneyGM gm = normalized(input);
  const std::size_t ne = gm.num_edges();

  std::vector<GmfStart> starts;
  GaugeSet g0 = GaugeSet::identity(ne);
  try {
    g0 = initial_gauges(gm, uniform_weights(gm, 1.0), cfg.seed, cfg.opt.det_floor);
  } catch (const InfeasibleStart&) {
    // identity keeps every entry non-negative, so it is still a valid start
  }
  starts.push_back({g0, ProductDistribution::uniform(ne), "identity"});
  for (std::size_t k = 0; k < cfg.restarts; ++k) {
    if (auto g = detail::random_start(gm, detail::restart_seed(cfg.seed, k), 0.05, cfg.opt.det_floor)) {
      starts.push_back({*g, ProductDistribution::uniform(ne), "restart"});
    }
  }
  for (const auto& s : extra_starts) {
    if (s.gauges.size() != ne || s.q.size() != ne) throw MissingGauge("G-MF start does not cover the model");
    if (!detail::all_nonnegative(apply_gauge(gm, s.gauges))) throw InfeasibleStart("G-MF start has negative entries");
    starts.push_back(s);
  }

  std::optional<LowerBoundResult> best;
  for (const auto& s : starts) detail::keep_best(best, detail::gmf_single_start(gm, s, cfg));
  if (!std::isfinite(best->log_lower_bound)) throw InfeasibleStart("no G-MF start gave a finite bound");
  return std::move(*best);
}

/// G-BP: maximize sum_a log f_{a,G}(0) + delta_t * sum_a mean_x log f_{a,G}(x)
/// over decreasing delta_t. Every accepted gauge keeps all transformed entries
/// strictly positive, so the zero-configuration mass is a lower bound on Z.
inline LowerBoundResult gbp_solve(const ForneyGM& input, const GaugedConfig& cfg = {}) {
  cfg.schedule.validate();
  const ForneyGM gm = normalized(input);
  std::optional<LowerBoundResult> best;
  detail::keep_best(best, detail::gbp_single_start(
                              gm, initial_gauges(gm, uniform_weights(gm, 1.0), cfg.seed, cfg.opt.det_floor), cfg));
  // Swap the two values of every edge the mean-field solution prefers at 1,
  // so that the all-zeros configuration sits at the rounded MF mode.
  if (cfg.mf_mode_start) {
    const auto q = mf_solve(gm, ProductDistribution::uniform(gm.num_edges()), cfg.mf).q;
    std::vector<Mat2> mats(gm.num_edges());
    bool any = false;
    for (EdgeId e = 0; e < gm.num_edges(); ++e) {
      if (q.p1[e] > 0.5) {
        mats[e] = Mat2::swap();
        any = true;
      }
    }
    GaugeSet flips(std::move(mats));
    if (any && gauge_feasible(gm, flips, uniform_weights(gm, 1.0), cfg.opt.det_floor)) {
      detail::keep_best(best, detail::gbp_single_start(gm, std::move(flips), cfg));
    }
  }
  for (std::size_t k = 0; k < cfg.restarts; ++k) {
    if (auto g = detail::random_start(gm, detail::restart_seed(cfg.seed, k), 0.05, cfg.opt.det_floor)) {
      detail::keep_best(best, detail::gbp_single_start(gm, std::move(*g), cfg));
    }
  }
  return std::move(*best);
}

/// G-MF with the G-BP warm start added: gauges from `gbp` and q = point mass
/// at the all-zeros configuration. Its bound is never below gbp's.
inline LowerBoundResult gmf_solve_with_gbp_start(const ForneyGM& gm, const LowerBoundResult& gbp,
                                                 const GaugedConfig& cfg = {}) {
  return gmf_solve(gm, cfg, {{gbp.gauges, ProductDistribution::point_mass_at_zero(gm.num_edges()), "gbp"}});
}

}  // namespace gaugegm
