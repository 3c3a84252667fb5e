#pragma once

// Random benchmark models.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by the
// standard. Uniforms are (bits >> 11) * 2^-53 and normals use Box-Muller, so a
// seed gives the same model on every platform. Graph structure and factor
// tables use separate streams derived from the seed with splitmix64.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

enum class GraphFamily { complete, regular3, grid, line, altcycle };
enum class InteractionMode { generic, log_supermodular };

inline std::string to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::complete: return "complete";
    case GraphFamily::regular3: return "regular3";
    case GraphFamily::grid: return "grid";
    case GraphFamily::line: return "line";
    case GraphFamily::altcycle: return "altcycle";
  }
  return "?";
}

inline std::string to_string(InteractionMode m) {
  return m == InteractionMode::generic ? "generic" : "logsupermodular";
}

inline GraphFamily parse_family(const std::string& s) {
  if (s == "complete") return GraphFamily::complete;
  if (s == "regular3") return GraphFamily::regular3;
  if (s == "grid") return GraphFamily::grid;
  if (s == "line") return GraphFamily::line;
  if (s == "altcycle") return GraphFamily::altcycle;
  throw InvalidRecipe("unknown graph family '" + s + "'");
}

inline InteractionMode parse_mode(const std::string& s) {
  if (s == "generic") return InteractionMode::generic;
  if (s == "logsupermodular" || s == "log-supermodular") return InteractionMode::log_supermodular;
  throw InvalidRecipe("unknown interaction mode '" + s + "'");
}

struct ModelRecipe {
  GraphFamily family = GraphFamily::complete;
  std::size_t size = 4;  // node count; for grids rows * cols
  std::size_t rows = 0;  // grid only
  std::size_t cols = 0;  // grid only
  InteractionMode mode = InteractionMode::generic;
  double T = 1.0;
  std::uint64_t seed = 0;
  int sign = +1;  // exponent sign of the factor formula
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Portable draws on top of mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool coin() { return (eng_() >> 63) != 0; }
  double normal(double mean, double sd) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 eng_;
};

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

inline EdgeList complete_graph(std::size_t n) {
  EdgeList out;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

inline EdgeList line_graph(std::size_t n) {
  EdgeList out;
  for (NodeId i = 0; i + 1 < n; ++i) out.emplace_back(i, i + 1);
  return out;
}

/// Row-major nodes; per node the right edge, then the down edge.
inline EdgeList grid_graph(std::size_t rows, std::size_t cols) {
  EdgeList out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const NodeId v = r * cols + c;
      if (c + 1 < cols) out.emplace_back(v, v + 1);
      if (r + 1 < rows) out.emplace_back(v, v + cols);
    }
  }
  return out;
}

/// Configuration model with whole-graph rejection of loops and multi-edges.
/// Edges are sorted lexicographically.
inline EdgeList random_regular3(std::size_t n, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<NodeId> stubs;
    for (NodeId v = 0; v < n; ++v) stubs.insert(stubs.end(), 3, v);
    for (std::size_t i = stubs.size(); i > 1; --i) std::swap(stubs[i - 1], stubs[rng.below(i)]);
    EdgeList out;
    bool ok = true;
    for (std::size_t i = 0; i < stubs.size() && ok; i += 2) {
      auto [a, b] = std::minmax(stubs[i], stubs[i + 1]);
      if (a == b) ok = false;
      out.emplace_back(a, b);
    }
    if (!ok) continue;
    std::sort(out.begin(), out.end());
    if (std::adjacent_find(out.begin(), out.end()) != out.end()) continue;
    return out;
  }
  throw InvalidRecipe("could not sample a simple 3-regular graph");
}

/// Nodes 0..n-1 from an edge list; each node's local order is its incident
/// edges in ascending id.
inline ModelParts skeleton(std::size_t n, const EdgeList& edges) {
  ModelParts p;
  p.nodes.resize(n);
  for (NodeId v = 0; v < n; ++v) p.nodes[v].id = v;
  for (EdgeId e = 0; e < edges.size(); ++e) {
    auto [a, b] = std::minmax(edges[e].first, edges[e].second);
    p.edges.push_back({e, {a, b}});
    p.nodes[a].local_order.push_back(e);
    p.nodes[b].local_order.push_back(e);
  }
  return p;
}

/// f(x) = exp(sign * beta * |h0 - h1|), with h0/h1 the number of zeros/ones in
/// x plus the optional bias value.
inline std::vector<double> interaction_table(std::size_t degree, double beta, int bias, int sign) {
  std::vector<double> t(std::size_t{1} << degree);
  for (std::size_t x = 0; x < t.size(); ++x) {
    int h1 = std::popcount(x);
    int h0 = static_cast<int>(degree) - h1;
    if (bias == 0) ++h0;
    if (bias == 1) ++h1;
    t[x] = std::exp(sign * beta * std::abs(h0 - h1));
  }
  return t;
}

/// Cycle of n degree-2 factors with positive entries exp(U(-T, T)). Edge k
/// joins nodes k and k+1 (mod n); node i orders [edge i-1, edge i], so Z is
/// the trace of the factor product. If the determinants multiply to a
/// non-negative value, the columns of node 0's table are swapped, which flips
/// the sign of its determinant and keeps every entry positive.
inline ForneyGM gen_alternating_cycle(std::size_t n, double T, std::uint64_t seed) {
  if (n < 2) throw InvalidRecipe("alternating cycle needs at least 2 nodes");
  Rng rng(splitmix64(seed ^ 0xA17C1C1EULL));
  ModelParts p;
  for (EdgeId k = 0; k < n; ++k) {
    const NodeId next = (k + 1) % n;
    p.edges.push_back({k, {std::min(k, next), std::max(k, next)}});
  }
  double det_prod = 1.0;
  for (NodeId i = 0; i < n; ++i) {
    Node node;
    node.id = i;
    node.local_order = {(i + n - 1) % n, i};
    for (int k = 0; k < 4; ++k) node.table.push_back(std::exp(rng.uniform(-T, T)));
    det_prod *= node.table[0] * node.table[3] - node.table[1] * node.table[2];
    p.nodes.push_back(std::move(node));
  }
  if (det_prod >= 0.0) {
    auto& t = p.nodes[0].table;
    std::swap(t[0], t[1]);
    std::swap(t[2], t[3]);
  }
  return ForneyGM(std::move(p));
}

inline void validate(const ModelRecipe& r) {
  if (!std::isfinite(r.T) || r.T < 0.0) throw InvalidRecipe("T must be finite and non-negative");
  if (r.sign != 1 && r.sign != -1) throw InvalidRecipe("sign must be +1 or -1");
  switch (r.family) {
    case GraphFamily::complete:
      if (r.size < 2) throw InvalidRecipe("complete graph needs at least 2 nodes");
      break;
    case GraphFamily::regular3:
      if (r.size < 4 || r.size % 2 != 0) throw InvalidRecipe("3-regular graph needs an even size >= 4");
      break;
    case GraphFamily::grid:
      if (r.rows == 0 || r.cols == 0 || r.rows * r.cols != r.size || r.size < 2) {
        throw InvalidRecipe("grid needs rows * cols == size >= 2");
      }
      break;
    case GraphFamily::line:
    case GraphFamily::altcycle:
      if (r.size < 2) throw InvalidRecipe("need at least 2 nodes");
      break;
  }
}

inline ForneyGM gen_model(const ModelRecipe& r) {
  validate(r);
  if (r.family == GraphFamily::altcycle) return gen_alternating_cycle(r.size, r.T, r.seed);

  Rng graph_rng(splitmix64(r.seed ^ 0x6A7F00D1ULL));
  EdgeList edges;
  switch (r.family) {
    case GraphFamily::complete: edges = complete_graph(r.size); break;
    case GraphFamily::regular3: edges = random_regular3(r.size, graph_rng); break;
    case GraphFamily::grid: edges = grid_graph(r.rows, r.cols); break;
    case GraphFamily::line: edges = line_graph(r.size); break;
    case GraphFamily::altcycle: break;
  }
  ModelParts p = skeleton(r.size, edges);

  Rng rng(splitmix64(r.seed ^ 0x7AB1E5ULL));
  for (Node& node : p.nodes) {
    double beta;
    int bias = -1;
    if (r.mode == InteractionMode::generic) {
      beta = rng.uniform(-r.T, r.T);
      bias = rng.coin() ? 1 : 0;
    } else {
      beta = rng.normal(r.T, 1e-2);  // variance 1e-4
    }
    node.table = interaction_table(node.local_order.size(), beta, bias, r.sign);
  }
  return ForneyGM(std::move(p));
}

}  // namespace gaugegm
