#pragma once

// Gradient-type ascent with Armijo backtracking. Feasibility is the caller's
// business: the objective returns nullopt for points it rejects, and the
// line search treats those like a failed sufficient-increase test.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace gaugegm {

struct OptimizerConfig {
  std::size_t max_iters = 500;
  double grad_tol = 1e-9;
  double shrink = 0.5;     // backtracking factor, in (0, 1)
  double armijo = 1e-4;    // sufficient-increase constant
  double growth = 2.0;     // step enlargement after an accepted step
  double initial_step = 1e-2;
  double min_step = 1e-18;
  double det_floor = 1e-8;
  std::size_t memory = 8;  // L-BFGS pairs; 0 gives plain steepest ascent
};

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;  // empty when not requested
};

/// Returns nullopt at infeasible points. The bool asks for the gradient.
using AscentObjective = std::function<std::optional<Evaluation>(std::span<const double>, bool)>;

struct AscentDiagnostics {
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;  // gradient norm fell below grad_tol
  bool stalled = false;    // line search could not find an increasing step
  std::vector<double> trace;  // objective after each accepted step, starting point first
};

struct AscentResult {
  std::vector<double> point;
  double value = 0.0;
  AscentDiagnostics diagnostics;
};

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace detail {

// Two-loop recursion for the ascent direction H * g, with H the limited-memory
// inverse Hessian estimate of -f. Pairs are (s, y) with y = g_old - g_new.
inline std::vector<double> lbfgs_direction(const std::vector<double>& g, const std::deque<std::vector<double>>& s,
                                           const std::deque<std::vector<double>>& y) {
  std::vector<double> q = g;
  std::vector<double> alpha(s.size());
  for (std::size_t k = s.size(); k-- > 0;) {
    alpha[k] = dot(s[k], q) / dot(y[k], s[k]);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * y[k][i];
  }
  if (!s.empty()) {
    const double gamma = dot(s.back(), y.back()) / dot(y.back(), y.back());
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double beta = dot(y[k], q) / dot(y[k], s[k]);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * s[k][i];
  }
  return q;
}

}  // namespace detail

/// Requires the objective to be finite (feasible) at `start`. With
/// cfg.memory == 0 the search direction is the gradient; otherwise it is the
/// L-BFGS direction, falling back to the gradient when that is not an ascent
/// direction. Every accepted step passes the Armijo test.
inline AscentResult inner_ascent(const AscentObjective& objective, std::vector<double> start,
                                 const OptimizerConfig& cfg) {
  AscentResult out;
  auto current = objective(start, true);
  ++out.diagnostics.evaluations;
  out.point = std::move(start);
  if (!current) {
    out.value = -std::numeric_limits<double>::infinity();
    out.diagnostics.stalled = true;
    return out;
  }
  out.diagnostics.trace.push_back(current->value);

  std::deque<std::vector<double>> mem_s, mem_y;
  double step = cfg.initial_step;
  std::vector<double> trial(out.point.size());
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const double gnorm = norm2(current->gradient);
    if (gnorm < cfg.grad_tol) {
      out.diagnostics.converged = true;
      break;
    }
    std::vector<double> dir;
    bool quasi_newton = false;
    if (cfg.memory > 0 && !mem_s.empty()) {
      dir = detail::lbfgs_direction(current->gradient, mem_s, mem_y);
      quasi_newton = dot(dir, current->gradient) > 1e-12 * gnorm * norm2(dir);
    }
    if (!quasi_newton) dir = current->gradient;
    const double slope = dot(dir, current->gradient);
    double alpha = quasi_newton ? 1.0 : step;

    bool accepted = false;
    while (alpha >= cfg.min_step) {
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = out.point[i] + alpha * dir[i];
      auto cand = objective(trial, false);
      ++out.diagnostics.evaluations;
      if (cand && std::isfinite(cand->value) && cand->value >= current->value + cfg.armijo * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= cfg.shrink;
    }
    if (!accepted && quasi_newton) {
      // retry along the gradient before giving up
      mem_s.clear();
      mem_y.clear();
      --it;
      continue;
    }
    if (!accepted) {
      out.diagnostics.stalled = true;
      break;
    }
    auto next = objective(trial, true);
    ++out.diagnostics.evaluations;
    if (!next) {
      out.diagnostics.stalled = true;
      break;
    }
    if (cfg.memory > 0) {
      std::vector<double> sv(trial.size()), yv(trial.size());
      for (std::size_t i = 0; i < trial.size(); ++i) {
        sv[i] = trial[i] - out.point[i];
        yv[i] = current->gradient[i] - next->gradient[i];
      }
      if (dot(sv, yv) > 1e-12 * norm2(sv) * norm2(yv)) {
        mem_s.push_back(std::move(sv));
        mem_y.push_back(std::move(yv));
        if (mem_s.size() > cfg.memory) {
          mem_s.pop_front();
          mem_y.pop_front();
        }
      }
    }
    out.point.swap(trial);
    current = std::move(next);
    out.diagnostics.trace.push_back(current->value);
    out.diagnostics.iterations = it + 1;
    if (!quasi_newton) step = alpha * cfg.growth;
  }
  out.value = current->value;
  return out;
}

}  // namespace gaugegm
