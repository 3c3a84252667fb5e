#pragma once

// Bipartite factor graph -> equivalent Forney-style model.

#include <cmath>
#include <string>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

struct Factor {
  std::vector<std::size_t> scope;  // variable ids, big-endian index order
  std::vector<double> table;
};

struct FactorGraph {
  std::size_t num_variables = 0;
  std::vector<Factor> factors;
};

/// Variables become equality nodes (value 1 on all-zeros and all-ones, 0
/// elsewhere); factors keep their tables. Forney node ids: variables first,
/// then factors. One edge per (factor, scope slot), numbered in factor order.
/// A variable no factor touches contributes log 2 to log_scale; a constant
/// factor contributes the log of its value.
inline ForneyGM factor_to_forney(const FactorGraph& fg) {
  ModelParts parts;
  const std::size_t nv = fg.num_variables;
  parts.nodes.resize(nv + fg.factors.size());
  for (std::size_t i = 0; i < parts.nodes.size(); ++i) parts.nodes[i].id = i;

  for (std::size_t f = 0; f < fg.factors.size(); ++f) {
    const Factor& factor = fg.factors[f];
    const NodeId fnode = nv + f;
    if (factor.table.size() != (std::size_t{1} << factor.scope.size())) {
      throw InvalidModel("factor " + std::to_string(f) + ": table length does not match scope");
    }
    if (factor.scope.empty()) {
      if (!(factor.table[0] > 0.0)) throw InvalidModel("factor " + std::to_string(f) + ": non-positive constant");
      parts.log_scale += std::log(factor.table[0]);
      continue;
    }
    for (std::size_t i = 0; i < factor.scope.size(); ++i) {
      const std::size_t v = factor.scope[i];
      if (v >= nv) throw InvalidModel("factor " + std::to_string(f) + ": unknown variable");
      for (std::size_t j = 0; j < i; ++j) {
        if (factor.scope[j] == v) throw InvalidModel("factor " + std::to_string(f) + ": repeated variable");
      }
      const EdgeId e = parts.edges.size();
      parts.edges.push_back(Edge{e, {v, fnode}});
      parts.nodes[v].local_order.push_back(e);
      parts.nodes[fnode].local_order.push_back(e);
    }
    parts.nodes[fnode].table = factor.table;
  }

  // Drop isolated variables and constant factors, then renumber.
  std::vector<NodeId> remap(parts.nodes.size(), 0);
  std::vector<Node> kept;
  for (Node& node : parts.nodes) {
    if (node.local_order.empty()) {
      if (node.id < nv) parts.log_scale += std::log(2.0);
      continue;
    }
    if (node.id < nv) {
      const std::size_t d = node.degree();
      node.table.assign(std::size_t{1} << d, 0.0);
      node.table.front() = 1.0;
      node.table.back() = 1.0;
    }
    remap[node.id] = kept.size();
    node.id = kept.size();
    kept.push_back(std::move(node));
  }
  parts.nodes = std::move(kept);
  for (Edge& e : parts.edges) e.endpoints = {remap[e.endpoints[0]], remap[e.endpoints[1]]};
  return ForneyGM(std::move(parts));
}

}  // namespace gaugegm
