#pragma once

// Closed-form gauges for single cycles of degree-2 factors, and the reduction
// of a line model to such a cycle.

#include <cmath>
#include <optional>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/gauge.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

/// Degree-2 table as a matrix with rows indexed by `row_edge`.
inline Mat2 oriented_matrix(const Node& node, EdgeId row_edge) {
  Mat2 f{{node.table[0], node.table[1], node.table[2], node.table[3]}};
  return node.local_order[0] == row_edge ? f : f.transpose();
}

/// A cycle walked once: nodes[i] sits between edges[i-1] and edges[i]
/// (indices mod n).
struct CycleWalk {
  std::vector<NodeId> nodes;
  std::vector<EdgeId> edges;
  std::vector<Mat2> factors;  // rows: previous edge, columns: next edge
};

/// Throws InvalidModel unless gm is one cycle of degree-2 nodes.
inline CycleWalk walk_cycle(const ForneyGM& gm) {
  const std::size_t n = gm.num_nodes();
  if (n < 2 || gm.num_edges() != n) throw InvalidModel("model is not a single cycle");
  for (const Node& node : gm.nodes()) {
    if (node.degree() != 2) throw InvalidModel("cycle nodes must have degree 2");
  }
  CycleWalk w;
  NodeId cur = 0;
  EdgeId prev = gm.node(0).local_order[0];
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = gm.node(cur);
    const EdgeId next = node.local_order[0] == prev ? node.local_order[1] : node.local_order[0];
    w.nodes.push_back(cur);
    w.edges.push_back(next);
    w.factors.push_back(oriented_matrix(node, prev));
    const auto& s = gm.slots(next);
    cur = s[0].node == cur ? s[1].node : s[0].node;
    prev = next;
  }
  if (cur != 0) throw InvalidModel("model is not a single cycle");
  std::vector<bool> seen(n, false);
  for (NodeId a : w.nodes) seen[a] = true;
  for (bool s : seen) {
    if (!s) throw InvalidModel("model is not a single cycle");
  }
  return w;
}

namespace detail {

inline bool is_singular(const Mat2& f) {
  double scale = 0.0;
  for (double v : f.m) scale = std::max(scale, std::abs(v));
  return std::abs(f.det()) <= 1e-12 * scale * scale;
}

// Eigenvector of m for eigenvalue lambda, picking the better conditioned of
// the two row-derived candidates.
inline std::array<double, 2> eigenvector(const Mat2& m, double lambda) {
  const std::array<double, 2> a{m(0, 1), lambda - m(0, 0)};
  const std::array<double, 2> b{lambda - m(1, 1), m(1, 0)};
  const double na = std::hypot(a[0], a[1]);
  const double nb = std::hypot(b[0], b[1]);
  const auto& v = na >= nb ? a : b;
  const double n = std::max(na, nb);
  return {v[0] / n, v[1] / n};
}

}  // namespace detail

/// Eigenvalues (l1 > l2) of the product of the oriented cycle factors.
struct CycleSpectrum {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

/// Gauges that turn one factor of an alternating cycle into
/// [[l1 + l2, l1], [-l2, 0]] and every other factor into the identity, so
/// the all-zeros configuration carries the whole partition function
/// l1 + l2 = trace(prod f_i).
///
/// Accepts prod det(f_i) <= 0 with at most one singular factor (a rank-one
/// junction from line_to_alternating_cycle is allowed).
inline GaugeSet alternating_cycle_exact_gauge(const ForneyGM& gm, CycleSpectrum* spectrum = nullptr) {
  CycleWalk w = walk_cycle(gm);
  const std::size_t n = w.nodes.size();

  // Rotate so the singular factor, if any, comes first.
  std::size_t singular = 0;
  std::optional<std::size_t> first_singular;
  int sign = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::is_singular(w.factors[i])) {
      ++singular;
      if (!first_singular) first_singular = i;
    } else if (w.factors[i].det() < 0.0) {
      sign = -sign;
    }
  }
  if (singular > 1) throw Decomposable("more than one non-invertible factor on the cycle");
  if (singular == 0 && sign > 0) throw NotAlternating("product of factor determinants is positive");
  if (first_singular) {
    const std::size_t r = *first_singular;
    std::rotate(w.nodes.begin(), w.nodes.begin() + r, w.nodes.end());
    std::rotate(w.factors.begin(), w.factors.begin() + r, w.factors.end());
    // edges[i] follows nodes[i]; the edge preceding the new nodes[0] moves last.
    std::rotate(w.edges.begin(), w.edges.begin() + r, w.edges.end());
  }

  Mat2 m = Mat2::identity();
  for (const Mat2& f : w.factors) m = m * f;
  const double tr = m.trace();
  const double det = singular ? 0.0 : m.det();
  if (!(tr > 0.0)) throw NotAlternating("trace of the cycle product is not positive");
  const double disc = tr * tr - 4.0 * det;
  const double root = std::sqrt(std::max(disc, 0.0));
  const double l1 = 0.5 * (tr + root);
  const double l2 = 0.5 * (tr - root);
  if (root <= 1e-12 * std::max(1.0, std::abs(l1))) throw DegenerateEigenpair("repeated eigenvalue");
  if (spectrum) *spectrum = {l1, l2};

  const auto v1 = detail::eigenvector(m, l1);
  const auto v2 = detail::eigenvector(m, l2);
  const Mat2 q1{{v1[0], v2[0], v1[1], v2[1]}};
  const Mat2 q2{{l1, 1.0, -l2, -1.0}};
  const Mat2 s = q2 * q1.inverse();

  // p[k] is the matrix of nodes[k] on edges[k]; the far side uses its
  // conjugate. p[n-1] conjugates the product into the target form, the rest
  // follow from p[k-1] = p[k] f_k^T.
  std::vector<Mat2> p(n);
  p[n - 1] = s.inverse_transpose();
  for (std::size_t k = n - 1; k >= 1; --k) p[k - 1] = p[k] * w.factors[k].transpose();

  GaugeSet g = GaugeSet::identity(gm.num_edges());
  for (std::size_t k = 0; k < n; ++k) {
    const EdgeId e = w.edges[k];
    g.primary(e) = gm.slots(e)[0].node == w.nodes[k] ? p[k] : p[k].inverse_transpose();
  }
  return g;
}

/// Outcome of joining the endpoints of a line model.
struct LineJoin {
  /// Every interior factor is singular: the line is a product model and no
  /// cycle is built.
  bool product_model = false;
  /// Edge (original id) whose flip gauge was applied, if any.
  std::optional<EdgeId> flipped_edge;
  /// Cycle on n-1 nodes: node 0 is the junction f_first f_last^T, nodes
  /// 1..n-2 the interior factors in path order. Edge k joins path positions
  /// k and k+1.
  std::optional<ForneyGM> cycle;
};

/// Flips the first invertible interior factor if the count of
/// negative-determinant interior factors is even, then joins the two
/// endpoints into one rank-one factor. The cycle has the line's
/// partition function.
inline LineJoin line_to_alternating_cycle(const ForneyGM& gm) {
  const std::size_t n = gm.num_nodes();
  if (n < 3 || gm.num_edges() != n - 1) throw InvalidModel("line model needs at least 3 nodes");

  // Walk the path from the lower-id endpoint.
  std::optional<NodeId> start;
  for (const Node& node : gm.nodes()) {
    if (node.degree() == 1) {
      start = node.id;
      break;
    }
    if (node.degree() != 2) throw InvalidModel("line interior nodes must have degree 2");
  }
  if (!start) throw InvalidModel("line model has no endpoint");
  std::vector<NodeId> path{*start};
  std::vector<EdgeId> path_edges;
  EdgeId e = gm.node(*start).local_order[0];
  while (true) {
    path_edges.push_back(e);
    const auto& s = gm.slots(e);
    const NodeId next = s[0].node == path.back() ? s[1].node : s[0].node;
    path.push_back(next);
    const Node& node = gm.node(next);
    if (node.degree() == 1) break;
    if (node.degree() != 2) throw InvalidModel("line interior nodes must have degree 2");
    e = node.local_order[0] == e ? node.local_order[1] : node.local_order[0];
    if (path.size() > n) throw InvalidModel("model is not a line");
  }
  if (path.size() != n) throw InvalidModel("model is not connected");

  LineJoin out;
  std::size_t singular = 0;
  std::size_t negative = 0;
  std::optional<std::size_t> first_invertible;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Mat2 f = oriented_matrix(gm.node(path[i]), path_edges[i - 1]);
    if (detail::is_singular(f)) {
      ++singular;
    } else {
      if (!first_invertible) first_invertible = i;
      if (f.det() < 0.0) ++negative;
    }
  }
  if (singular == n - 2) {
    out.product_model = true;
    return out;
  }
  if (singular > 1) throw Decomposable("more than one non-invertible interior factor");

  ForneyGM line = gm;
  if (negative % 2 == 0) {
    const EdgeId flip = path_edges[*first_invertible - 1];
    line = apply_gauge(gm, flip_gauge(gm, flip));
    out.flipped_edge = flip;
  }

  std::vector<EdgeId> new_edge(gm.num_edges());
  for (std::size_t k = 0; k < path_edges.size(); ++k) new_edge[path_edges[k]] = k;

  ModelParts parts;
  parts.log_scale = line.log_scale();
  const std::size_t m = n - 1;  // cycle length
  for (std::size_t k = 0; k < m; ++k) parts.edges.push_back(Edge{k, {k, (k + 1) % m}});

  const auto& first = line.node(path.front()).table;
  const auto& last = line.node(path.back()).table;
  Node junction;
  junction.id = 0;
  junction.local_order = {m - 1, 0};
  junction.table = {last[0] * first[0], last[0] * first[1], last[1] * first[0], last[1] * first[1]};
  parts.nodes.push_back(junction);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Node& src = line.node(path[i]);
    Node node;
    node.id = i;
    node.table = src.table;
    for (EdgeId le : src.local_order) node.local_order.push_back(new_edge[le]);
    parts.nodes.push_back(std::move(node));
  }
  out.cycle = ForneyGM(std::move(parts), line.has_negative_entry());
  return out;
}

}  // namespace gaugegm
