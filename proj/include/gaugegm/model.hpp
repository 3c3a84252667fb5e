#pragma once

// Forney-style graphical models over binary edge variables.
//
// Variables live on edges, factors on nodes. Every edge touches exactly two
// nodes. A node of degree d carries a dense table of 2^d reals indexed
// big-endian over its local edge order: for the local configuration
// (x_1, ..., x_d) the index is sum_k x_k * 2^(d-k), so the first incident
// edge is the most significant bit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gaugegm/errors.hpp"

namespace gaugegm {

using EdgeId = std::size_t;
using NodeId = std::size_t;

struct Edge {
  EdgeId id = 0;
  std::array<NodeId, 2> endpoints{};
};

struct Node {
  NodeId id = 0;
  std::vector<EdgeId> local_order;
  std::vector<double> table;

  std::size_t degree() const { return local_order.size(); }
};

/// Raw, unvalidated model description. `ForneyGM` wraps one of these after
/// checking every structural invariant.
struct ModelParts {
  std::vector<Edge> edges;
  std::vector<Node> nodes;
  double log_scale = 0.0;
};

/// Where an edge attaches to a node: the node and the edge's position in the
/// node's local order.
struct EdgeSlot {
  NodeId node = 0;
  std::size_t pos = 0;
};

/// Bit mask selecting local position `pos` of a degree-`degree` table index.
constexpr std::size_t local_bit(std::size_t degree, std::size_t pos) {
  return std::size_t{1} << (degree - 1 - pos);
}

/// Structural diagnostics. Returns an empty list for a valid model.
/// `allow_negative` is set for gauge-transformed tables.
inline std::vector<std::string> validate(const ModelParts& parts,
                                         bool allow_negative = false) {
  std::vector<std::string> out;
  auto report = [&out](auto&&... pieces) {
    std::ostringstream os;
    (os << ... << pieces);
    out.push_back(os.str());
  };

  const std::size_t n_edges = parts.edges.size();
  const std::size_t n_nodes = parts.nodes.size();

  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (parts.nodes[i].id != i) report("node at position ", i, ": id ", parts.nodes[i].id, " is not contiguous");
  }
  for (std::size_t i = 0; i < n_edges; ++i) {
    if (parts.edges[i].id != i) report("edge at position ", i, ": id ", parts.edges[i].id, " is not contiguous");
  }

  // Which nodes reference each edge in their local order.
  std::vector<std::vector<NodeId>> seen(n_edges);
  for (const Node& node : parts.nodes) {
    const std::size_t deg = node.local_order.size();
    if (deg == 0) {
      report("node ", node.id, ": no incident edges");
    } else if (deg >= 8 * sizeof(std::size_t) - 1 || node.table.size() != (std::size_t{1} << deg)) {
      report("node ", node.id, ": table length ", node.table.size(), " does not match degree ", deg);
    }
    for (EdgeId e : node.local_order) {
      if (e >= n_edges) {
        report("node ", node.id, ": references unknown edge ", e);
      } else {
        seen[e].push_back(node.id);
      }
    }
    bool any_nonzero = false;
    bool finite = true;
    bool negative = false;
    for (double v : node.table) {
      if (!std::isfinite(v)) finite = false;
      if (v != 0.0) any_nonzero = true;
      if (v < 0.0) negative = true;
    }
    if (!finite) report("node ", node.id, ": non-finite table entry");
    if (!node.table.empty() && !any_nonzero) report("node ", node.id, ": all-zero table");
    if (negative && !allow_negative) report("node ", node.id, ": negative table entry in untransformed model");
  }

  for (const Edge& edge : parts.edges) {
    if (edge.id >= n_edges) continue;
    const auto [u, v] = edge.endpoints;
    std::vector<NodeId> refs = seen[edge.id];
    std::sort(refs.begin(), refs.end());
    if (u == v || u >= n_nodes || v >= n_nodes) {
      report("edge ", edge.id, ": needs two distinct existing endpoints");
    } else if (refs != std::vector<NodeId>{std::min(u, v), std::max(u, v)}) {
      report("edge ", edge.id, ": must appear exactly once in the local order of each endpoint");
    }
  }
  if (!std::isfinite(parts.log_scale) && !(parts.log_scale == -std::numeric_limits<double>::infinity())) {
    report("log_scale is not finite");
  }
  return out;
}

/// Immutable Forney-style model. The unnormalized mass of configuration x is
/// exp(log_scale) * prod_a table_a(x_a).
class ForneyGM {
 public:
  ForneyGM() = default;

  /// Throws InvalidModel listing every violation.
  explicit ForneyGM(ModelParts parts, bool gauged = false)
      : parts_(std::move(parts)), gauged_(gauged) {
    auto problems = validate(parts_, gauged_);
    if (!problems.empty()) {
      std::string msg = "invalid model:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw InvalidModel(msg);
    }
    slots_.resize(parts_.edges.size());
    for (const Node& node : parts_.nodes) {
      for (std::size_t pos = 0; pos < node.local_order.size(); ++pos) {
        const EdgeId e = node.local_order[pos];
        const Edge& edge = parts_.edges[e];
        const bool primary = node.id == std::min(edge.endpoints[0], edge.endpoints[1]);
        slots_[e][primary ? 0 : 1] = EdgeSlot{node.id, pos};
      }
    }
  }

  const ModelParts& parts() const { return parts_; }
  const std::vector<Edge>& edges() const { return parts_.edges; }
  const std::vector<Node>& nodes() const { return parts_.nodes; }
  const Node& node(NodeId a) const { return parts_.nodes[a]; }
  const Edge& edge(EdgeId e) const { return parts_.edges[e]; }
  std::size_t num_edges() const { return parts_.edges.size(); }
  std::size_t num_nodes() const { return parts_.nodes.size(); }
  double log_scale() const { return parts_.log_scale; }

  /// True when tables came out of a gauge transformation and may be signed.
  bool gauged() const { return gauged_; }

  /// slots(e)[0] is the lower-id endpoint (the primary direction of a gauge),
  /// slots(e)[1] the higher-id one.
  const std::array<EdgeSlot, 2>& slots(EdgeId e) const { return slots_[e]; }

  /// Same structure, new tables. Throws InvalidModel on bad tables.
  ForneyGM with_tables(std::vector<std::vector<double>> tables, double log_scale, bool gauged) const {
    ModelParts p = parts_;
    for (std::size_t a = 0; a < p.nodes.size(); ++a) p.nodes[a].table = std::move(tables[a]);
    p.log_scale = log_scale;
    return ForneyGM(std::move(p), gauged);
  }

  std::vector<std::vector<double>> tables() const {
    std::vector<std::vector<double>> out;
    out.reserve(parts_.nodes.size());
    for (const Node& n : parts_.nodes) out.push_back(n.table);
    return out;
  }

  bool has_negative_entry() const {
    for (const Node& n : parts_.nodes) {
      for (double v : n.table) {
        if (v < 0.0) return true;
      }
    }
    return false;
  }

 private:
  ModelParts parts_;
  bool gauged_ = false;
  std::vector<std::array<EdgeSlot, 2>> slots_;
};

inline std::vector<std::string> validate(const ForneyGM& gm) { return validate(gm.parts(), gm.gauged()); }

/// Divides every table by its largest absolute entry and moves the divisor
/// into log_scale. The represented measure is unchanged.
inline ForneyGM normalized(const ForneyGM& gm) {
  auto tables = gm.tables();
  double log_scale = gm.log_scale();
  for (auto& t : tables) {
    double m = 0.0;
    for (double v : t) m = std::max(m, std::abs(v));
    if (m > 0.0 && m != 1.0) {
      for (double& v : t) v /= m;
      log_scale += std::log(m);
    }
  }
  return gm.with_tables(std::move(tables), log_scale, gm.gauged());
}

/// Local table index of node `a` under a full edge assignment.
inline std::size_t local_index(const Node& node, std::span<const std::uint8_t> assignment) {
  std::size_t idx = 0;
  for (EdgeId e : node.local_order) idx = (idx << 1) | assignment[e];
  return idx;
}

/// log of prod_a table_a(x_a) for a single full configuration, plus
/// log_scale. Returns -inf when some factor is zero; requires non-negative
/// values at the configuration.
inline double log_config_mass(const ForneyGM& gm, std::span<const std::uint8_t> assignment) {
  double acc = gm.log_scale();
  for (const Node& node : gm.nodes()) {
    const double v = node.table[local_index(node, assignment)];
    if (v < 0.0) throw NegativeMass("negative factor value at requested configuration");
    if (v == 0.0) return -std::numeric_limits<double>::infinity();
    acc += std::log(v);
  }
  return acc;
}

}  // namespace gaugegm
