#pragma once

// Sum-product belief propagation on the Forney graph and the Bethe free
// energy of its beliefs.

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

/// messages[2 * e + s] is the message sent from slot s of edge e to the
/// other endpoint; each sums to 1.
struct Messages {
  std::vector<std::array<double, 2>> m;

  const std::array<double, 2>& from(EdgeId e, int side) const { return m[2 * e + side]; }
  std::array<double, 2>& from(EdgeId e, int side) { return m[2 * e + side]; }
};

struct Beliefs {
  std::vector<std::vector<double>> node;     // over 2^deg(a)
  std::vector<std::array<double, 2>> edge;   // over {0, 1}
};

struct BpConfig {
  double damping = 0.5;  // weight kept on the previous message
  double tol = 1e-9;     // on the largest message change
  std::size_t max_iters = 10000;
  /// Initial messages are (0.5 + init_bias, 0.5 - init_bias). On models
  /// symmetric under a global 0/1 flip, uniform messages are an exact (and
  /// often unstable) fixed point; the small default moves off it.
  double init_bias = 0.01;
};

struct BpResult {
  Messages messages;
  Beliefs beliefs;
  double log_z = 0.0;  // -F_Bethe(beliefs) + log_scale
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline int side_of(const ForneyGM& gm, EdgeId e, NodeId a) { return gm.slots(e)[0].node == a ? 0 : 1; }

// Unnormalized product f_a(x) * prod_{pos != skip} incoming(pos)(x_pos).
inline std::vector<double> node_product(const ForneyGM& gm, const Messages& msg, NodeId a, std::size_t skip) {
  const Node& node = gm.node(a);
  const std::size_t d = node.degree();
  std::vector<double> out = node.table;
  for (std::size_t pos = 0; pos < d; ++pos) {
    if (pos == skip) continue;
    const EdgeId e = node.local_order[pos];
    const auto& in = msg.from(e, 1 - side_of(gm, e, a));
    const std::size_t bit = local_bit(d, pos);
    for (std::size_t x = 0; x < out.size(); ++x) out[x] *= in[(x & bit) ? 1 : 0];
  }
  return out;
}

inline void xlogy_accumulate(double& acc, double b, double denom) {
  if (b > 0.0) acc += b * std::log(b / denom);
}

}  // namespace detail

/// Beliefs from a set of messages.
inline Beliefs assemble_beliefs(const ForneyGM& gm, const Messages& msg) {
  Beliefs b;
  b.node.resize(gm.num_nodes());
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    auto p = detail::node_product(gm, msg, a, gm.node(a).degree());
    double z = 0.0;
    for (double v : p) z += v;
    for (double& v : p) v /= z;
    b.node[a] = std::move(p);
  }
  b.edge.resize(gm.num_edges());
  for (EdgeId e = 0; e < gm.num_edges(); ++e) {
    const auto& m0 = msg.from(e, 0);
    const auto& m1 = msg.from(e, 1);
    const double z = m0[0] * m1[0] + m0[1] * m1[1];
    b.edge[e] = {m0[0] * m1[0] / z, m0[1] * m1[1] / z};
  }
  return b;
}

namespace detail {

inline double bethe_value(const ForneyGM& gm, const Beliefs& b) {
  double f = 0.0;
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    const auto& t = gm.node(a).table;
    for (std::size_t x = 0; x < t.size(); ++x) {
      if (b.node[a][x] > 0.0 && !(t[x] > 0.0)) return std::numeric_limits<double>::infinity();
      xlogy_accumulate(f, b.node[a][x], t[x]);
    }
  }
  for (const auto& be : b.edge) {
    for (double v : be) {
      if (v > 0.0) f -= v * std::log(v);
    }
  }
  return f;
}

}  // namespace detail

/// F_Bethe(b) = sum_a sum b_a log(b_a / f_a) - sum_e sum b_e log b_e, with
/// 0 log 0 = 0. The model's log_scale is not included. Throws
/// InconsistentBeliefs if a node belief does not marginalize to its edge
/// belief within 1e-6 or a belief is not normalized.
inline double bethe_free_energy(const ForneyGM& gm, const Beliefs& b) {
  constexpr double kTol = 1e-6;
  if (b.node.size() != gm.num_nodes() || b.edge.size() != gm.num_edges()) {
    throw InconsistentBeliefs("belief count does not match the model");
  }
  for (EdgeId e = 0; e < gm.num_edges(); ++e) {
    if (std::abs(b.edge[e][0] + b.edge[e][1] - 1.0) > kTol) throw InconsistentBeliefs("edge belief not normalized");
    for (const EdgeSlot& s : gm.slots(e)) {
      const Node& node = gm.node(s.node);
      const std::size_t bit = local_bit(node.degree(), s.pos);
      double marg[2] = {0.0, 0.0};
      for (std::size_t x = 0; x < b.node[s.node].size(); ++x) marg[(x & bit) ? 1 : 0] += b.node[s.node][x];
      if (std::abs(marg[0] - b.edge[e][0]) > kTol || std::abs(marg[1] - b.edge[e][1]) > kTol) {
        throw InconsistentBeliefs("node " + std::to_string(s.node) + " belief disagrees with edge " +
                                  std::to_string(e));
      }
    }
  }
  return detail::bethe_value(gm, b);
}

/// Damped synchronous sum-product. Non-convergence is reported, and the last
/// iterate is used.
inline BpResult bp_solve(const ForneyGM& input, const BpConfig& cfg = {}) {
  const ForneyGM gm = normalized(input);
  BpResult out;
  out.messages.m.assign(2 * gm.num_edges(), {0.5 + cfg.init_bias, 0.5 - cfg.init_bias});

  Messages next = out.messages;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    double max_change = 0.0;
    for (NodeId a = 0; a < gm.num_nodes(); ++a) {
      const Node& node = gm.node(a);
      const std::size_t d = node.degree();
      for (std::size_t pos = 0; pos < d; ++pos) {
        const EdgeId e = node.local_order[pos];
        const auto prod = detail::node_product(gm, out.messages, a, pos);
        const std::size_t bit = local_bit(d, pos);
        std::array<double, 2> m{0.0, 0.0};
        for (std::size_t x = 0; x < prod.size(); ++x) m[(x & bit) ? 1 : 0] += prod[x];
        const double z = m[0] + m[1];
        m = {m[0] / z, m[1] / z};
        const auto& old = out.messages.from(e, detail::side_of(gm, e, a));
        std::array<double, 2> damped{(1.0 - cfg.damping) * m[0] + cfg.damping * old[0],
                                     (1.0 - cfg.damping) * m[1] + cfg.damping * old[1]};
        const double dz = damped[0] + damped[1];
        damped = {damped[0] / dz, damped[1] / dz};
        max_change = std::max({max_change, std::abs(damped[0] - old[0]), std::abs(damped[1] - old[1])});
        next.from(e, detail::side_of(gm, e, a)) = damped;
      }
    }
    out.messages = next;
    out.iterations = it + 1;
    if (max_change < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.beliefs = assemble_beliefs(gm, out.messages);
  out.log_z = -detail::bethe_value(gm, out.beliefs) + gm.log_scale();
  return out;
}

}  // namespace gaugegm
