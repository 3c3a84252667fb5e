#pragma once

// Test-side reference computations, written without the library's
// enumeration or index helpers.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "gaugegm/gauge.hpp"
#include "gaugegm/model.hpp"

namespace oracle {

using gaugegm::ForneyGM;

// Table entry of node `a` under full assignment x (first local edge is the
// most significant bit).
inline double entry(const gaugegm::Node& n, const std::vector<int>& x) {
  std::size_t idx = 0;
  for (auto e : n.local_order) idx = idx * 2 + static_cast<std::size_t>(x[e]);
  return n.table[idx];
}

// Signed sum over every assignment of prod_a f_a, times exp(log_scale).
// `keep` filters assignments.
inline double partition(const ForneyGM& gm, const std::function<bool(const std::vector<int>&)>& keep = {}) {
  const std::size_t ne = gm.num_edges();
  std::vector<int> x(ne, 0);
  double z = 0.0;
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << ne); ++k) {
    for (std::size_t e = 0; e < ne; ++e) x[e] = static_cast<int>((k >> e) & 1U);
    if (keep && !keep(x)) continue;
    double w = 1.0;
    for (const auto& n : gm.nodes()) w *= entry(n, x);
    z += w;
  }
  return z * std::exp(gm.log_scale());
}

inline double log_partition(const ForneyGM& gm) { return std::log(partition(gm)); }

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Central differences with step h.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> p, double h = 1e-5) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    p[i] = v + h;
    const double up = f(p);
    p[i] = v - h;
    const double dn = f(p);
    p[i] = v;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, max_i |b_i|).
inline double gradient_mismatch(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

// argmax over lo, lo + step, ..., hi.
inline std::pair<double, double> grid_max(const std::function<double(double)>& f, double lo, double hi,
                                          double step) {
  double best_x = lo, best = f(lo);
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  for (std::size_t k = 1; k <= n; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return {best_x, best};
}

// Gauges with entries U(-2, 2) and |det| >= min_det.
inline gaugegm::GaugeSet random_gauges(std::size_t num_edges, std::mt19937_64& rng, double min_det = 0.1) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<gaugegm::Mat2> mats(num_edges);
  for (auto& m : mats) {
    do {
      for (double& v : m.m) v = u(rng);
    } while (std::abs(m.det()) < min_det);
  }
  return gaugegm::GaugeSet(std::move(mats));
}

inline gaugegm::ModelParts one_edge_parts(std::vector<double> fa, std::vector<double> fb) {
  gaugegm::ModelParts p;
  p.edges.push_back({0, {0, 1}});
  p.nodes.push_back({0, {0}, std::move(fa)});
  p.nodes.push_back({1, {0}, std::move(fb)});
  return p;
}

inline ForneyGM one_edge(std::vector<double> fa, std::vector<double> fb) {
  return ForneyGM(one_edge_parts(std::move(fa), std::move(fb)));
}

// Random tree on n nodes (node k > 0 attaches to a uniform earlier node),
// positive tables exp(U(-1, 1)).
inline ForneyGM random_tree(std::size_t n, std::mt19937_64& rng) {
  gaugegm::ModelParts p;
  p.nodes.resize(n);
  for (std::size_t v = 0; v < n; ++v) p.nodes[v].id = v;
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
    const std::size_t e = k - 1;
    p.edges.push_back({e, {parent, k}});
    p.nodes[parent].local_order.push_back(e);
    p.nodes[k].local_order.push_back(e);
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& node : p.nodes) {
    node.table.resize(std::size_t{1} << node.local_order.size());
    for (double& v : node.table) v = std::exp(u(rng));
  }
  return ForneyGM(std::move(p));
}

}  // namespace oracle
