#pragma once

// Bethe approximation as a gauge optimization: find gauges that make
// sum_a log f_{a,G}(0, ..., 0) stationary, with no sign constraints.
//
// The objective has no maximum (one edge already shows it: pushing det(G)
// toward 0 drives f_a,G(0) f_b,G(0) to +inf while the other configuration
// goes negative), so its BP-equivalent points are saddles. Stationarity is
// equivalent to f_{a,G}(x) = 0 for every configuration x with a single
// one-valued edge, at every node. We solve that square-ish nonlinear system
// with damped Gauss-Newton (Levenberg-Marquardt) on the scale-free residuals
// f_{a,G}(1_e) / f_{a,G}(0), two angles per edge.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gaugegm/errors.hpp"
#include "gaugegm/gauge.hpp"
#include "gaugegm/model.hpp"

namespace gaugegm {

struct BetheGaugeConfig {
  std::size_t max_iters = 500;
  double residual_tol = 1e-12;  // on the largest |f(1_e) / f(0)|
  double det_floor = 1e-8;      // lower bound on cos(a - b)
  double initial_damping = 1e-3;
  std::uint64_t seed = 0;
};

struct BetheGaugeResult {
  GaugeSet gauges;
  double log_z = 0.0;  // sum_a log f_{a,G}(0) + log_scale
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

namespace detail {

struct BetheResiduals {
  std::vector<double> r;
  std::vector<double> zero_entries;  // f_{a,G}(0) per node
  bool feasible = true;
};

inline BetheResiduals bethe_residuals(const ForneyGM& gm, const GaugeSet& g) {
  BetheResiduals out;
  for (NodeId a = 0; a < gm.num_nodes(); ++a) {
    const auto t = transformed_table(gm, g, a);
    const std::size_t d = gm.node(a).degree();
    out.zero_entries.push_back(t[0]);
    if (!(t[0] > 0.0)) out.feasible = false;
    for (std::size_t pos = 0; pos < d; ++pos) out.r.push_back(t[local_bit(d, pos)] / t[0]);
  }
  return out;
}

// The residual zeros depend on an edge's gauge only through the directions
// of its two row-0 vectors: u (primary) and v (conjugate). With
// u = (cos a, sin a), v = (cos b, sin b) and c = cos(a - b) > 0,
//   G = [u; (-sin b, cos b)] / sqrt(c),   G^{-T} = [v; (-sin a, cos a)] / sqrt(c).
// Both endpoint ratios f(1_e) / f(0) are then free of c, so c -> 0 cannot
// fake a root.
inline Mat2 angle_gauge(double a, double b) {
  const double s = 1.0 / std::sqrt(std::cos(a - b));
  return Mat2{{s * std::cos(a), s * std::sin(a), -s * std::sin(b), s * std::cos(b)}};
}

// d G / d a and d G / d b, entries in Mat2 order.
inline std::array<Mat2, 2> angle_gauge_partials(double a, double b) {
  const double c = std::cos(a - b);
  const double s = 1.0 / std::sqrt(c);
  const double ds = 0.5 * std::sin(a - b) * s / c;  // d s / d a = -d s / d b
  const Mat2 m{{std::cos(a), std::sin(a), -std::sin(b), std::cos(b)}};
  const Mat2 da = ds * m + Mat2{{-s * std::sin(a), s * std::cos(a), 0.0, 0.0}};
  const Mat2 db = -ds * m + Mat2{{0.0, 0.0, -s * std::cos(b), -s * std::sin(b)}};
  return {da, db};
}

inline GaugeSet angle_gauges(const std::vector<double>& theta) {
  std::vector<Mat2> mats(theta.size() / 2);
  for (std::size_t e = 0; e < mats.size(); ++e) mats[e] = angle_gauge(theta[2 * e], theta[2 * e + 1]);
  return GaugeSet(std::move(mats));
}

inline bool angles_ok(const std::vector<double>& theta, double floor) {
  for (std::size_t e = 0; 2 * e < theta.size(); ++e) {
    if (!(std::cos(theta[2 * e] - theta[2 * e + 1]) > floor)) return false;
  }
  return true;
}

}  // namespace detail

/// Gauge-side Bethe estimate of log Z: drive every f_{a,G}(1_e) / f_{a,G}(0)
/// to zero. Starts from uniform messages (all angles pi/4), or near them
/// when some f_a(0) <= 0; throws InfeasibleStart if none of 100 starts
/// has every f_{a,G}(0) > 0.
inline BetheGaugeResult bethe_gauge_solve(const ForneyGM& input, const BetheGaugeConfig& cfg = {}) {
  const ForneyGM gm = normalized(input);
  BetheGaugeResult out;
  const std::size_t ne = gm.num_edges();
  const std::size_t p = 2 * ne;

  // Uniform messages: u = v = (1, 1) / sqrt(2).
  const double quarter = std::atan(1.0);
  std::vector<double> theta(p, quarter);
  auto res = detail::bethe_residuals(gm, detail::angle_gauges(theta));
  if (!res.feasible) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int attempt = 0; attempt < 100 && !res.feasible; ++attempt) {
      for (double& v : theta) v = quarter + u(rng);
      res = detail::bethe_residuals(gm, detail::angle_gauges(theta));
    }
    if (!res.feasible) throw InfeasibleStart("no start with every f_{a,G}(0) > 0");
  }

  auto sq = [](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
  };
  double cost = sq(res.r);
  double mu = cfg.initial_damping;
  const auto rows = static_cast<Eigen::Index>(res.r.size());

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    double max_r = 0.0;
    for (double v : res.r) max_r = std::max(max_r, std::abs(v));
    out.residual = max_r;
    if (max_r < cfg.residual_tol) {
      out.converged = true;
      break;
    }

    // Jacobian in gauge entries, then chained to the angles.
    const GaugeSet g = detail::angle_gauges(theta);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(p));
    std::vector<double> grad(4 * ne);
    std::vector<std::array<Mat2, 2>> partials(ne);
    for (EdgeId e = 0; e < ne; ++e) partials[e] = detail::angle_gauge_partials(theta[2 * e], theta[2 * e + 1]);
    Eigen::Index row = 0;
    for (NodeId a = 0; a < gm.num_nodes(); ++a) {
      const std::size_t d = gm.node(a).degree();
      const double f0 = res.zero_entries[a];
      std::vector<double> coeff(gm.node(a).table.size(), 0.0);
      for (std::size_t pos = 0; pos < d; ++pos, ++row) {
        std::fill(coeff.begin(), coeff.end(), 0.0);
        coeff[0] = -res.r[static_cast<std::size_t>(row)] / f0;
        coeff[local_bit(d, pos)] = 1.0 / f0;
        std::fill(grad.begin(), grad.end(), 0.0);
        detail::accumulate_linear_gradient(gm, g, a, coeff, grad);
        for (EdgeId e : gm.node(a).local_order) {
          for (int k = 0; k < 2; ++k) {
            double v = 0.0;
            for (int t = 0; t < 4; ++t) v += grad[4 * e + t] * partials[e][k].m[t];
            jac(row, static_cast<Eigen::Index>(2 * e + k)) = v;
          }
        }
      }
    }
    const Eigen::Map<const Eigen::VectorXd> r(res.r.data(), rows);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;

    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal().array() += mu * (1.0 + jtj.diagonal().array());
      const Eigen::VectorXd step = lhs.ldlt().solve(-jtr);
      std::vector<double> cand = theta;
      for (std::size_t j = 0; j < p; ++j) cand[j] += step(static_cast<Eigen::Index>(j));
      if (detail::angles_ok(cand, cfg.det_floor)) {
        auto cres = detail::bethe_residuals(gm, detail::angle_gauges(cand));
        const double ccost = sq(cres.r);
        if (cres.feasible && std::isfinite(ccost) && ccost < cost) {
          theta = std::move(cand);
          res = std::move(cres);
          cost = ccost;
          mu = std::max(mu / 3.0, 1e-12);
          accepted = true;
          break;
        }
      }
      mu *= 4.0;
    }
    out.iterations = it + 1;
    if (!accepted) break;
  }

  out.log_z = gm.log_scale();
  for (double f0 : res.zero_entries) out.log_z += std::log(f0);
  out.gauges = detail::angle_gauges(theta);
  return out;
}

}  // namespace gaugegm
