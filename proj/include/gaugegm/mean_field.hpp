#pragma once

// Mean-field lower bound over fully factorized edge distributions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

/// Independent Bernoulli marginal per edge; p1[e] = q_e(1).
struct ProductDistribution {
  std::vector<double> p1;

  static ProductDistribution uniform(std::size_t num_edges) { return {std::vector<double>(num_edges, 0.5)}; }
  static ProductDistribution point_mass_at_zero(std::size_t num_edges) {
    return {std::vector<double>(num_edges, 0.0)};
  }

  double q(EdgeId e, int x) const { return x ? p1[e] : 1.0 - p1[e]; }
  std::size_t size() const { return p1.size(); }
};

namespace detail {

inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// Expected log of node a's table under q, conditioned on local position
// `fixed_pos` taking `fixed_val` (fixed_pos == degree means no conditioning).
// Returns -inf if an entry with positive weight is not positive.
inline double expected_log(const Node& node, const ProductDistribution& q, std::size_t fixed_pos, int fixed_val) {
  const std::size_t d = node.degree();
  double acc = 0.0;
  for (std::size_t x = 0; x < node.table.size(); ++x) {
    double w = 1.0;
    for (std::size_t pos = 0; pos < d && w > 0.0; ++pos) {
      const int xv = (x & local_bit(d, pos)) ? 1 : 0;
      if (pos == fixed_pos) {
        if (xv != fixed_val) w = 0.0;
      } else {
        w *= q.q(node.local_order[pos], xv);
      }
    }
    if (w == 0.0) continue;
    if (!(node.table[x] > 0.0)) return -std::numeric_limits<double>::infinity();
    acc += w * std::log(node.table[x]);
  }
  return acc;
}

}  // namespace detail

/// sum_a E_q[log f_a] + entropy(q) + log_scale, a lower bound on log Z for
/// non-negative tables. 0 log 0 is taken as 0. Throws
/// PositiveWeightOnZeroFactor if q puts mass on a non-positive entry.
inline double mf_objective(const ForneyGM& gm, const ProductDistribution& q) {
  double value = gm.log_scale();
  for (const Node& node : gm.nodes()) {
    const double el = detail::expected_log(node, q, node.degree(), 0);
    if (!std::isfinite(el)) {
      throw PositiveWeightOnZeroFactor("product distribution weights a non-positive entry of node " +
                                       std::to_string(node.id));
    }
    value += el;
  }
  for (EdgeId e = 0; e < gm.num_edges(); ++e) value -= detail::xlogx(q.q(e, 0)) + detail::xlogx(q.q(e, 1));
  return value;
}

struct MfConfig {
  double tol = 1e-10;  // on the largest marginal change in a sweep
  std::size_t max_sweeps = 2000;
};

struct MfResult {
  ProductDistribution q;
  double value = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each sweep, initial point first
};

/// Exact coordinate ascent, edges in ascending id order:
/// q_e(x) ~ exp(E[log f_a | x_e = x] + E[log f_b | x_e = x]).
/// Each update maximizes the objective in q_e, so the objective never
/// decreases.
inline MfResult mf_solve(const ForneyGM& gm, ProductDistribution init, const MfConfig& cfg = {}) {
  MfResult out;
  out.q = std::move(init);
  if (out.q.size() != gm.num_edges()) throw InvalidModel("product distribution size does not match model");
  for (double& p : out.q.p1) p = std::clamp(p, 0.0, 1.0);

  auto safe_objective = [&] {
    try {
      return mf_objective(gm, out.q);
    } catch (const PositiveWeightOnZeroFactor&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  out.trace.push_back(safe_objective());

  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (EdgeId e = 0; e < gm.num_edges(); ++e) {
      double score[2] = {0.0, 0.0};
      for (const EdgeSlot& s : gm.slots(e)) {
        const Node& node = gm.node(s.node);
        for (int v = 0; v < 2; ++v) score[v] += detail::expected_log(node, out.q, s.pos, v);
      }
      double p;
      if (!std::isfinite(score[0]) && !std::isfinite(score[1])) {
        continue;  // both states infeasible given the others; leave q_e alone
      } else if (!std::isfinite(score[0])) {
        p = 1.0;
      } else if (!std::isfinite(score[1])) {
        p = 0.0;
      } else {
        p = 1.0 / (1.0 + std::exp(score[0] - score[1]));
      }
      max_change = std::max(max_change, std::abs(p - out.q.p1[e]));
      out.q.p1[e] = p;
    }
    out.sweeps = sweep + 1;
    out.trace.push_back(safe_objective());
    if (max_change < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.value = out.trace.back();
  return out;
}

}  // namespace gaugegm
