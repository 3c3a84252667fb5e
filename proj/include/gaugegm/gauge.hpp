#pragma once

// Gauge transformations of Forney-style models.
//
// Each undirected edge {a, b} with a < b carries one free invertible 2x2
// matrix G_ab, used at node a. Node b uses the conjugate G_ba = (G_ab^T)^-1,
// so G_ab^T G_ba = I holds by construction and the partition function is
// unchanged by the transformation.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

/// Row-major 2x2 real matrix: {m00, m01, m10, m11}.
struct Mat2 {
  std::array<double, 4> m{1.0, 0.0, 0.0, 1.0};

  static constexpr Mat2 identity() { return Mat2{{1.0, 0.0, 0.0, 1.0}}; }
  static constexpr Mat2 swap() { return Mat2{{0.0, 1.0, 1.0, 0.0}}; }

  double operator()(int i, int j) const { return m[2 * i + j]; }
  double& operator()(int i, int j) { return m[2 * i + j]; }

  double det() const { return m[0] * m[3] - m[1] * m[2]; }
  double trace() const { return m[0] + m[3]; }
  Mat2 transpose() const { return Mat2{{m[0], m[2], m[1], m[3]}}; }
  Mat2 inverse() const {
    const double d = det();
    return Mat2{{m[3] / d, -m[1] / d, -m[2] / d, m[0] / d}};
  }
  /// (M^T)^-1, the conjugate partner of a gauge matrix.
  Mat2 inverse_transpose() const {
    const double d = det();
    return Mat2{{m[3] / d, -m[2] / d, -m[1] / d, m[0] / d}};
  }

  friend Mat2 operator*(const Mat2& a, const Mat2& b) {
    return Mat2{{a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
                 a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]}};
  }
  friend Mat2 operator*(double s, const Mat2& a) {
    return Mat2{{s * a.m[0], s * a.m[1], s * a.m[2], s * a.m[3]}};
  }
  friend Mat2 operator+(const Mat2& a, const Mat2& b) {
    return Mat2{{a.m[0] + b.m[0], a.m[1] + b.m[1], a.m[2] + b.m[2], a.m[3] + b.m[3]}};
  }
  friend bool operator==(const Mat2&, const Mat2&) = default;
};

inline double max_abs_diff(const Mat2& a, const Mat2& b) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
  return d;
}

/// One free matrix per edge (primary direction: lower node id -> higher).
/// The conjugate is always derived, never stored.
class GaugeSet {
 public:
  GaugeSet() = default;
  explicit GaugeSet(std::vector<Mat2> primary) : primary_(std::move(primary)) {}

  static GaugeSet identity(std::size_t num_edges) { return GaugeSet(std::vector<Mat2>(num_edges)); }

  /// Parameter vector view: 4 reals per edge, row-major.
  static GaugeSet from_params(std::span<const double> params) {
    std::vector<Mat2> mats(params.size() / 4);
    for (std::size_t e = 0; e < mats.size(); ++e) {
      for (int k = 0; k < 4; ++k) mats[e].m[k] = params[4 * e + k];
    }
    return GaugeSet(std::move(mats));
  }
  std::vector<double> params() const {
    std::vector<double> out(4 * primary_.size());
    for (std::size_t e = 0; e < primary_.size(); ++e) {
      for (int k = 0; k < 4; ++k) out[4 * e + k] = primary_[e].m[k];
    }
    return out;
  }

  std::size_t size() const { return primary_.size(); }
  const Mat2& primary(EdgeId e) const { return primary_[e]; }
  Mat2& primary(EdgeId e) { return primary_[e]; }
  Mat2 conjugate(EdgeId e) const { return primary_[e].inverse_transpose(); }

  /// Matrix used at `side` of edge e (0 = lower-id endpoint, 1 = higher).
  Mat2 at(EdgeId e, int side) const { return side == 0 ? primary_[e] : conjugate(e); }

  double min_abs_det() const {
    double d = std::numeric_limits<double>::infinity();
    for (const Mat2& g : primary_) d = std::min(d, std::abs(g.det()));
    return d;
  }

  friend bool operator==(const GaugeSet&, const GaugeSet&) = default;

 private:
  std::vector<Mat2> primary_;
};

/// Applying g then h equals applying compose(g, h).
inline GaugeSet compose(const GaugeSet& g, const GaugeSet& h) {
  std::vector<Mat2> out(g.size());
  for (EdgeId e = 0; e < g.size(); ++e) out[e] = h.primary(e) * g.primary(e);
  return GaugeSet(std::move(out));
}

/// In-place mode product along local position `pos`:
/// t'(.., x_pos = i, ..) = sum_j m(i, j) t(.., x_pos = j, ..).
inline void mode_product(std::span<double> table, std::size_t degree, std::size_t pos, const Mat2& m) {
  const std::size_t bit = local_bit(degree, pos);
  for (std::size_t i0 = 0; i0 < table.size(); ++i0) {
    if (i0 & bit) continue;
    const std::size_t i1 = i0 | bit;
    const double t0 = table[i0];
    const double t1 = table[i1];
    table[i0] = m.m[0] * t0 + m.m[1] * t1;
    table[i1] = m.m[2] * t0 + m.m[3] * t1;
  }
}

/// Node-side matrices of every incident edge, in local order.
inline std::vector<Mat2> node_matrices(const ForneyGM& gm, const GaugeSet& g, NodeId a) {
  const Node& node = gm.node(a);
  std::vector<Mat2> out;
  out.reserve(node.degree());
  for (EdgeId e : node.local_order) out.push_back(g.at(e, gm.slots(e)[0].node == a ? 0 : 1));
  return out;
}

inline std::vector<double> transformed_table(const ForneyGM& gm, const GaugeSet& g, NodeId a) {
  const Node& node = gm.node(a);
  std::vector<double> t = node.table;
  const auto mats = node_matrices(gm, g, a);
  for (std::size_t pos = 0; pos < node.degree(); ++pos) mode_product(t, node.degree(), pos, mats[pos]);
  return t;
}

inline std::vector<std::vector<double>> transformed_tables(const ForneyGM& gm, const GaugeSet& g) {
  if (g.size() != gm.num_edges()) {
    throw MissingGauge("gauge set covers " + std::to_string(g.size()) + " edges, model has " +
                       std::to_string(gm.num_edges()));
  }
  std::vector<std::vector<double>> out;
  out.reserve(gm.num_nodes());
  for (NodeId a = 0; a < gm.num_nodes(); ++a) out.push_back(transformed_table(gm, g, a));
  return out;
}

/// Contracts each node table with its node-side gauge matrices. The result is
/// flagged as gauged and may carry negative entries. log_scale is unchanged.
inline ForneyGM apply_gauge(const ForneyGM& gm, const GaugeSet& g) {
  return gm.with_tables(transformed_tables(gm, g), gm.log_scale(), true);
}

/// Identity everywhere except the swap matrix on both sides of `edge`.
inline GaugeSet flip_gauge(const ForneyGM& gm, EdgeId edge) {
  GaugeSet g = GaugeSet::identity(gm.num_edges());
  g.primary(edge) = Mat2::swap();
  return g;
}

/// Left-multiplies each primary gauge by a diagonal D = diag(c0, c1) chosen so
/// that, for each value i of the edge, the largest |entry| of the two endpoint
/// tables' x_e = i slices match (slice i at node a is scaled by c_i, at node b
/// by 1 / c_i). Objectives whose weights at each node sum over every slice pair
/// identically (the mean-field, zero-configuration and per-node barrier
/// objectives) are unchanged; the point is to stop drift along these flat
/// directions from ruining the conditioning.
inline GaugeSet balanced(const ForneyGM& gm, const GaugeSet& g, int sweeps = 2) {
  GaugeSet h = g;
  auto tables = transformed_tables(gm, h);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (EdgeId e = 0; e < gm.num_edges(); ++e) {
      const auto& slots = gm.slots(e);
      double norm[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [side][value]
      for (int side = 0; side < 2; ++side) {
        const std::size_t d = gm.node(slots[side].node).degree();
        const std::size_t bit = local_bit(d, slots[side].pos);
        const auto& t = tables[slots[side].node];
        for (std::size_t x = 0; x < t.size(); ++x) {
          double& n = norm[side][(x & bit) ? 1 : 0];
          n = std::max(n, std::abs(t[x]));
        }
      }
      double c[2];
      for (int i = 0; i < 2; ++i) {
        c[i] = (norm[0][i] > 0.0 && norm[1][i] > 0.0) ? std::sqrt(norm[1][i] / norm[0][i]) : 1.0;
        if (!std::isfinite(c[i]) || c[i] <= 0.0) c[i] = 1.0;
      }
      Mat2& m = h.primary(e);
      m = Mat2{{c[0] * m.m[0], c[0] * m.m[1], c[1] * m.m[2], c[1] * m.m[3]}};
      for (int side = 0; side < 2; ++side) {
        const std::size_t d = gm.node(slots[side].node).degree();
        const std::size_t bit = local_bit(d, slots[side].pos);
        auto& t = tables[slots[side].node];
        for (std::size_t x = 0; x < t.size(); ++x) {
          const double ci = c[(x & bit) ? 1 : 0];
          t[x] = side == 0 ? t[x] * ci : t[x] / ci;
        }
      }
    }
  }
  return h;
}

/// Per-node weights w_a(x_a) over table entries.
using NodeWeights = std::vector<std::vector<double>>;

/// Unit weight on each node's all-zeros entry.
inline NodeWeights zero_config_weights(const ForneyGM& gm) {
  NodeWeights w(gm.num_nodes());
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    w[a].assign(gm.node(a).table.size(), 0.0);
    w[a][0] = 1.0;
  }
  return w;
}

inline NodeWeights uniform_weights(const ForneyGM& gm, double value) {
  NodeWeights w(gm.num_nodes());
  for (NodeId a = 0; a < gm.num_nodes(); ++a) w[a].assign(gm.node(a).table.size(), value);
  return w;
}

/// w_a(x_a) = prod_{e in a} q_e(x_e), with q_e(1) = p1[e].
inline NodeWeights product_weights(const ForneyGM& gm, std::span<const double> p1) {
  NodeWeights w(gm.num_nodes());
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    const Node& node = gm.node(a);
    const std::size_t d = node.degree();
    w[a].assign(node.table.size(), 1.0);
    for (std::size_t x = 0; x < w[a].size(); ++x) {
      for (std::size_t pos = 0; pos < d; ++pos) {
        const double p = p1[node.local_order[pos]];
        w[a][x] *= (x & local_bit(d, pos)) ? p : 1.0 - p;
      }
    }
  }
  return w;
}

/// a + s * b, elementwise.
inline NodeWeights add_weights(NodeWeights a, const NodeWeights& b, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += s * b[i][j];
  }
  return a;
}

struct GaugeObjective {
  double value = 0.0;
  std::vector<double> gradient;  // 4 per edge, matching GaugeSet::params()
};

namespace detail {

// Gradient of L(f_G) = sum_x c(x) f_G(x) for one node with respect to the
// node-side matrix at each local position, accumulated into the free
// parameters. For the higher-id endpoint the node matrix is H = (G^T)^-1 and
// dH = -H dG^T H, which maps the matrix gradient Gamma to -H Gamma^T H.
inline void accumulate_linear_gradient(const ForneyGM& gm, const GaugeSet& g, NodeId a,
                                       std::span<const double> coeff, std::span<double> grad) {
  const Node& node = gm.node(a);
  const std::size_t d = node.degree();
  const auto mats = node_matrices(gm, g, a);
  std::vector<double> partial(node.table.size());
  for (std::size_t k = 0; k < d; ++k) {
    partial = node.table;
    for (std::size_t pos = 0; pos < d; ++pos) {
      if (pos != k) mode_product(partial, d, pos, mats[pos]);
    }
    const std::size_t bit = local_bit(d, k);
    Mat2 gamma{{0.0, 0.0, 0.0, 0.0}};
    for (std::size_t x = 0; x < coeff.size(); ++x) {
      if (coeff[x] == 0.0) continue;
      const int i = (x & bit) ? 1 : 0;
      const std::size_t base = x & ~bit;
      gamma(i, 0) += coeff[x] * partial[base];
      gamma(i, 1) += coeff[x] * partial[base | bit];
    }
    const EdgeId e = node.local_order[k];
    Mat2 dg = gamma;
    if (gm.slots(e)[0].node != a) {
      const Mat2& h = mats[k];
      dg = -1.0 * (h * gamma.transpose() * h);
    }
    for (int t = 0; t < 4; ++t) grad[4 * e + t] += dg.m[t];
  }
}

}  // namespace detail

/// sum_a sum_x w_a(x) log f_{a,G}(x) and, optionally, its gradient with
/// respect to the free gauge parameters. Returns nullopt when an entry with
/// positive weight is not strictly positive.
inline std::optional<GaugeObjective> try_gauge_objective(const ForneyGM& gm, const GaugeSet& g,
                                                         const NodeWeights& weights, bool with_gradient) {
  GaugeObjective out;
  if (with_gradient) out.gradient.assign(4 * gm.num_edges(), 0.0);
  std::vector<double> coeff;
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    const auto t = transformed_table(gm, g, a);
    const auto& w = weights[a];
    coeff.assign(t.size(), 0.0);
    for (std::size_t x = 0; x < t.size(); ++x) {
      if (w[x] == 0.0) continue;
      if (!(t[x] > 0.0)) return std::nullopt;
      out.value += w[x] * std::log(t[x]);
      coeff[x] = w[x] / t[x];
    }
    if (with_gradient) detail::accumulate_linear_gradient(gm, g, a, coeff, out.gradient);
  }
  return out;
}

/// Throwing variant of try_gauge_objective.
inline GaugeObjective gauge_objective_and_gradient(const ForneyGM& gm, const GaugeSet& g,
                                                   const NodeWeights& weights) {
  if (g.size() != gm.num_edges()) throw MissingGauge("gauge set does not cover the model");
  auto r = try_gauge_objective(gm, g, weights, true);
  if (!r) throw NonPositiveFactorAtWeightedEntry("transformed factor is not positive at a weighted entry");
  return *r;
}

/// True when every entry with positive weight is strictly positive after the
/// transformation and every gauge clears det_floor.
inline bool gauge_feasible(const ForneyGM& gm, const GaugeSet& g, const NodeWeights& relevance,
                           double det_floor) {
  if (g.min_abs_det() < det_floor) return false;
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    const auto t = transformed_table(gm, g, a);
    for (std::size_t x = 0; x < t.size(); ++x) {
      if (relevance[a][x] > 0.0 && !(t[x] > 0.0)) return false;
    }
  }
  return true;
}

/// Starting gauges: identity if it is feasible for `relevance`; otherwise
/// identity plus uniform noise in [-0.05, 0.05], resampled up to 100 times.
inline GaugeSet initial_gauges(const ForneyGM& gm, const NodeWeights& relevance, std::uint64_t seed,
                               double det_floor = 1e-8) {
  GaugeSet g = GaugeSet::identity(gm.num_edges());
  if (gauge_feasible(gm, g, relevance, det_floor)) return g;
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Mat2> mats(gm.num_edges());
    for (Mat2& m : mats) {
      for (int k = 0; k < 4; ++k) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        m.m[k] += -0.05 + 0.1 * u;
      }
    }
    GaugeSet cand(std::move(mats));
    if (gauge_feasible(gm, cand, relevance, det_floor)) return cand;
  }
  throw InfeasibleStart("no feasible starting gauge after 100 resamples");
}

}  // namespace gaugegm
