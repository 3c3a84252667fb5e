#pragma once

// Brute-force partition sums over the free edges of a model.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

inline constexpr std::size_t kDefaultEnumerationCap = 25;

/// Per-edge state: free, clamped to 0 or clamped to 1.
class ConditioningMask {
 public:
  static constexpr std::int8_t kFree = -1;

  ConditioningMask() = default;
  explicit ConditioningMask(std::size_t num_edges) : state_(num_edges, kFree) {}

  static ConditioningMask all_free(const ForneyGM& gm) { return ConditioningMask(gm.num_edges()); }

  ConditioningMask& clamp(EdgeId e, int value) {
    state_.at(e) = static_cast<std::int8_t>(value ? 1 : 0);
    return *this;
  }
  ConditioningMask& release(EdgeId e) {
    state_.at(e) = kFree;
    return *this;
  }

  std::size_t size() const { return state_.size(); }
  bool is_free(EdgeId e) const { return state_[e] == kFree; }
  int value(EdgeId e) const { return state_[e]; }
  std::size_t free_count() const {
    std::size_t n = 0;
    for (auto s : state_) n += (s == kFree);
    return n;
  }
  std::size_t clamped_count() const { return state_.size() - free_count(); }

  friend bool operator==(const ConditioningMask&, const ConditioningMask&) = default;

 private:
  std::vector<std::int8_t> state_;
};

/// A real number stored as (log|S|, sign(S)). sign is -1, 0 or +1; log_abs is
/// -inf when sign is 0.
struct SignedLogValue {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 0;
};

namespace detail {

struct EnumerationSum {
  long double sum = 0.0L;
  double log_offset = 0.0;  // log of the divisors pulled out of the tables
  bool any_negative = false;
};

// Gray-code walk over all assignments of the free edges. Node indices are
// updated incrementally; each step multiplies the node values afresh so zero
// entries need no special casing.
inline EnumerationSum enumerate(const ForneyGM& gm, const ConditioningMask& mask, std::size_t cap) {
  if (mask.size() != gm.num_edges()) throw InvalidModel("conditioning mask size does not match model");
  std::vector<EdgeId> free_edges;
  for (EdgeId e = 0; e < gm.num_edges(); ++e) {
    if (mask.is_free(e)) free_edges.push_back(e);
  }
  if (free_edges.size() > cap) {
    throw TooManyFreeEdges(std::to_string(free_edges.size()) + " free edges exceed enumeration cap " +
                           std::to_string(cap));
  }

  EnumerationSum out;
  const std::size_t n = gm.num_nodes();
  std::vector<std::vector<double>> tables(n);
  std::vector<std::size_t> index(n, 0);
  for (NodeId a = 0; a < n; ++a) {
    const Node& node = gm.node(a);
    double m = 0.0;
    for (double v : node.table) m = std::max(m, std::abs(v));
    tables[a] = node.table;
    if (m > 0.0) {
      for (double& v : tables[a]) v /= m;
      out.log_offset += std::log(m);
    }
    // Clamped edges contribute a fixed part of the index; free edges start at 0.
    for (std::size_t pos = 0; pos < node.degree(); ++pos) {
      const EdgeId e = node.local_order[pos];
      if (!mask.is_free(e) && mask.value(e) == 1) index[a] |= local_bit(node.degree(), pos);
    }
  }

  // Flipping free edge k toggles one bit in each endpoint's index.
  struct Flip {
    NodeId node;
    std::size_t bit;
  };
  std::vector<std::array<Flip, 2>> flips;
  flips.reserve(free_edges.size());
  for (EdgeId e : free_edges) {
    const auto& s = gm.slots(e);
    flips.push_back({Flip{s[0].node, local_bit(gm.node(s[0].node).degree(), s[0].pos)},
                     Flip{s[1].node, local_bit(gm.node(s[1].node).degree(), s[1].pos)}});
  }

  const std::uint64_t total = std::uint64_t{1} << free_edges.size();
  for (std::uint64_t i = 0; i < total; ++i) {
    if (i > 0) {
      const auto k = static_cast<std::size_t>(std::countr_zero(i));
      for (const Flip& f : flips[k]) index[f.node] ^= f.bit;
    }
    double prod = 1.0;
    for (NodeId a = 0; a < n; ++a) {
      prod *= tables[a][index[a]];
      if (prod == 0.0) break;
    }
    if (prod < 0.0) out.any_negative = true;
    out.sum += prod;
  }
  return out;
}

}  // namespace detail

/// Signed configuration sum over free edges. Gauge-transformed tables may be
/// negative; this is the routine that checks invariance for them.
inline SignedLogValue signed_log_partition(const ForneyGM& gm, const ConditioningMask& mask,
                                           std::size_t cap = kDefaultEnumerationCap) {
  const auto r = detail::enumerate(gm, mask, cap);
  SignedLogValue out;
  if (r.sum == 0.0L) return out;
  out.sign = r.sum > 0.0L ? 1 : -1;
  out.log_abs = static_cast<double>(std::log(std::abs(r.sum))) + r.log_offset + gm.log_scale();
  return out;
}

inline SignedLogValue signed_log_partition(const ForneyGM& gm, std::size_t cap = kDefaultEnumerationCap) {
  return signed_log_partition(gm, ConditioningMask::all_free(gm), cap);
}

/// log Z restricted to the mask. -inf when the sum is zero. Throws
/// NegativeMass if any configuration carries negative mass.
inline double exact_log_partition(const ForneyGM& gm, const ConditioningMask& mask,
                                  std::size_t cap = kDefaultEnumerationCap) {
  const auto r = detail::enumerate(gm, mask, cap);
  if (r.any_negative) throw NegativeMass("configuration with negative mass; use signed_log_partition");
  if (r.sum == 0.0L) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(std::log(r.sum)) + r.log_offset + gm.log_scale();
}

inline double exact_log_partition(const ForneyGM& gm, std::size_t cap = kDefaultEnumerationCap) {
  return exact_log_partition(gm, ConditioningMask::all_free(gm), cap);
}

/// Slices every table at the clamped edges and drops those edges. Nodes left
/// without edges are folded into log_scale. Ids are renumbered densely in the
/// original order. Throws NegativeMass if a folded node evaluates negative;
/// a folded zero yields log_scale = -inf.
inline ForneyGM condition(const ForneyGM& gm, const ConditioningMask& mask) {
  if (mask.size() != gm.num_edges()) throw InvalidModel("conditioning mask size does not match model");

  std::vector<EdgeId> new_edge_id(gm.num_edges(), 0);
  ModelParts out;
  out.log_scale = gm.log_scale();
  for (EdgeId e = 0; e < gm.num_edges(); ++e) {
    if (mask.is_free(e)) {
      new_edge_id[e] = out.edges.size();
      out.edges.push_back(Edge{out.edges.size(), {0, 0}});
    }
  }

  std::vector<NodeId> new_node_id(gm.num_nodes(), 0);
  for (const Node& node : gm.nodes()) {
    const std::size_t deg = node.degree();
    std::vector<std::size_t> free_pos;
    std::size_t fixed = 0;
    for (std::size_t pos = 0; pos < deg; ++pos) {
      const EdgeId e = node.local_order[pos];
      if (mask.is_free(e)) {
        free_pos.push_back(pos);
      } else if (mask.value(e) == 1) {
        fixed |= local_bit(deg, pos);
      }
    }
    if (free_pos.empty()) {
      const double v = node.table[fixed];
      if (v < 0.0) throw NegativeMass("conditioning folds a negative factor value into the scale");
      out.log_scale += v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
      continue;
    }
    Node sliced;
    sliced.id = out.nodes.size();
    new_node_id[node.id] = sliced.id;
    const std::size_t k = free_pos.size();
    sliced.table.resize(std::size_t{1} << k);
    for (std::size_t j = 0; j < sliced.table.size(); ++j) {
      std::size_t idx = fixed;
      for (std::size_t t = 0; t < k; ++t) {
        if (j & local_bit(k, t)) idx |= local_bit(deg, free_pos[t]);
      }
      sliced.table[j] = node.table[idx];
    }
    for (std::size_t p : free_pos) sliced.local_order.push_back(new_edge_id[node.local_order[p]]);
    out.nodes.push_back(std::move(sliced));
  }

  for (EdgeId e = 0; e < gm.num_edges(); ++e) {
    if (!mask.is_free(e)) continue;
    const auto& s = gm.slots(e);
    out.edges[new_edge_id[e]].endpoints = {new_node_id[s[0].node], new_node_id[s[1].node]};
  }
  return ForneyGM(std::move(out), gm.gauged());
}

}  // namespace gaugegm
