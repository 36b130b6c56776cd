// Box-constrained limited-memory quasi-Newton minimizer.
//
// Each iteration identifies the active set from the projected gradient,
// computes a two-loop L-BFGS direction on the free variables and runs a
// strong-Wolfe line search along that ray, capped at the first bound it
// reaches. If that fails a projected Armijo backtracking search is tried,
// then projected steepest descent. Iterates always lie inside the box.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

#include "r1glm/core.hpp"

namespace r1glm {

struct SolverConfig {
  int memory = 10;
  double grad_tol = 1e-6;  // on the projected-gradient infinity norm
  int max_iter = 500;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch_steps = 40;
  /// Relative decrease below which progress counts as stagnation.
  double rel_ftol = 1e-15;

  void validate() const {
    require(memory >= 1, "solver memory must be >= 1");
    require(grad_tol > 0.0, "gradient tolerance must be positive");
    require(max_iter >= 0, "max_iter must be >= 0");
    require(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0,
            "Wolfe constants must satisfy 0 < c1 < c2 < 1");
    require(max_linesearch_steps >= 1, "max_linesearch_steps must be >= 1");
  }
};

struct SolverResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double projected_grad_norm = 0.0;
};

struct CurvaturePair {
  Vector s;
  Vector y;
  double rho;
};

/// Mutable per-run state. `step` is the last accepted step length.
struct SolverState {
  Vector x;
  Vector g;
  double f = 0.0;
  double step = 0.0;
  std::deque<CurvaturePair> history;
  int iteration = 0;
};

inline Vector project_to_box(const Vector &x, const Vector &lower, const Vector &upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

/// Infinity norm of P(x - g) - x.
inline double projected_gradient_norm(const Vector &x, const Vector &g, const Vector &lower,
                                      const Vector &upper) {
  double norm = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double stepped = std::clamp(x[i] - g[i], lower[i], upper[i]);
    norm = std::max(norm, std::abs(stepped - x[i]));
  }
  return norm;
}

namespace detail {

/// H * v by the two-loop recursion, H0 = (s'y / y'y) I from the newest pair.
inline Vector two_loop(const std::deque<CurvaturePair> &history, const Vector &v) {
  Vector q = v;
  const std::size_t m = history.size();
  std::vector<double> alpha(m);
  for (std::size_t i = m; i-- > 0;) {
    alpha[i] = history[i].rho * history[i].s.dot(q);
    q -= alpha[i] * history[i].y;
  }
  if (m > 0) {
    const auto &last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = history[i].rho * history[i].y.dot(q);
    q += (alpha[i] - beta) * history[i].s;
  }
  return q;
}

/// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db);
/// falls back to bisection when the cubic is degenerate.
inline double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0.0) return 0.5 * (a + b);
  return b - (b - a) * (db + d2 - d1) / denom;
}

struct LinePoint {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
  Vector x;
  Vector g;
};

/// Strong-Wolfe search on phi(t) = f(P(x + t d)) for t in (0, max_step].
/// When the cap is reached with sufficient decrease and the slope still
/// negative, the capped point is accepted. Returns nullopt on failure.
template <class Objective>
std::optional<LinePoint> strong_wolfe_search(Objective &f, const Vector &x, double fx,
                                             const Vector &gx, const Vector &d, double initial,
                                             double max_step, const Vector &lower,
                                             const Vector &upper, const SolverConfig &cfg,
                                             int &evaluations) {
  const double slope0 = gx.dot(d);
  auto eval = [&](double t) {
    LinePoint p;
    p.step = t;
    p.x = project_to_box(x + t * d, lower, upper);
    p.g.resize(x.size());
    p.f = f(p.x, p.g);
    p.slope = p.g.dot(d);
    ++evaluations;
    return p;
  };
  auto armijo = [&](const LinePoint &p) {
    return std::isfinite(p.f) && p.f <= fx + cfg.wolfe_c1 * p.step * slope0;
  };
  auto curvature = [&](const LinePoint &p) {
    return std::abs(p.slope) <= -cfg.wolfe_c2 * slope0;
  };

  LinePoint prev{0.0, fx, slope0, x, gx};
  double t = std::min(initial, max_step);
  int steps = 0;

  auto zoom = [&](LinePoint lo, LinePoint hi) -> std::optional<LinePoint> {
    while (steps < cfg.max_linesearch_steps) {
      const double width = hi.step - lo.step;
      double trial = cubic_minimizer(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope);
      const double left = std::min(lo.step, hi.step);
      const double right = std::max(lo.step, hi.step);
      const double margin = 0.1 * (right - left);
      if (!std::isfinite(trial) || trial < left + margin || trial > right - margin)
        trial = 0.5 * (lo.step + hi.step);
      if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      ++steps;
      LinePoint p = eval(trial);
      if (!armijo(p) || p.f >= lo.f) {
        hi = std::move(p);
      } else {
        if (curvature(p)) return p;
        if (p.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(p);
      }
    }
    if (lo.step > 0.0) return lo;
    return std::nullopt;
  };

  while (steps < cfg.max_linesearch_steps) {
    ++steps;
    LinePoint p = eval(t);
    if (!armijo(p) || (prev.step > 0.0 && p.f >= prev.f)) return zoom(std::move(prev), std::move(p));
    if (curvature(p)) return p;
    if (p.slope >= 0.0) return zoom(std::move(p), std::move(prev));
    if (t >= max_step) return p;
    prev = std::move(p);
    t = std::min(2.0 * t, max_step);
  }
  if (prev.step > 0.0) return prev;
  return std::nullopt;
}

/// Armijo backtracking on the projected path P(x + t d).
template <class Objective>
std::optional<LinePoint> projected_backtracking(Objective &f, const Vector &x, double fx,
                                                const Vector &gx, const Vector &d, double initial,
                                                const Vector &lower, const Vector &upper,
                                                const SolverConfig &cfg, int &evaluations) {
  double t = initial;
  for (int i = 0; i < 2 * cfg.max_linesearch_steps; ++i, t *= 0.5) {
    LinePoint p;
    p.step = t;
    p.x = project_to_box(x + t * d, lower, upper);
    const Vector s = p.x - x;
    const double decrease = gx.dot(s);
    if (!(decrease < 0.0)) continue;
    p.g.resize(x.size());
    p.f = f(p.x, p.g);
    ++evaluations;
    if (std::isfinite(p.f) && p.f <= fx + cfg.wolfe_c1 * decrease) return p;
  }
  return std::nullopt;
}

}  // namespace detail

/// Minimizes f over the box lower <= x <= upper (entries may be infinite).
/// `f(x, grad)` returns the value and writes the gradient into `grad`.
template <class Objective>
SolverResult lbfgs_box_minimize(Objective &&f, const Vector &x0, const Vector &lower,
                                const Vector &upper, const SolverConfig &cfg = {}) {
  cfg.validate();
  const Index n = x0.size();
  require(lower.size() == n && upper.size() == n, "bound dimensions do not match x0");
  for (Index i = 0; i < n; ++i) {
    require(lower[i] <= upper[i], "lower bound exceeds upper bound");
    require(x0[i] >= lower[i] && x0[i] <= upper[i], "x0 violates the bounds");
  }

  SolverState st;
  st.x = x0;
  st.g.resize(n);
  SolverResult out;
  st.f = f(st.x, st.g);
  out.evaluations = 1;
  require(std::isfinite(st.f), "objective is not finite at x0");

  double pg = projected_gradient_norm(st.x, st.g, lower, upper);
  const double eps = std::numeric_limits<double>::epsilon();
  bool converged = pg <= cfg.grad_tol;

  while (!converged && st.iteration < cfg.max_iter) {
    // Variables held at a bound by the gradient are fixed for this step.
    Vector free_g = st.g;
    for (Index i = 0; i < n; ++i) {
      const bool at_lower = st.x[i] <= lower[i] && st.g[i] > 0.0;
      const bool at_upper = st.x[i] >= upper[i] && st.g[i] < 0.0;
      if (at_lower || at_upper) free_g[i] = 0.0;
    }

    Vector d = -detail::two_loop(st.history, free_g);
    for (Index i = 0; i < n; ++i)
      if (free_g[i] == 0.0) d[i] = 0.0;
    if (!(d.dot(st.g) < -eps * d.norm() * st.g.norm())) {
      st.history.clear();
      d = -free_g;
    }

    double max_step = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (d[i] < 0.0 && std::isfinite(lower[i]))
        max_step = std::min(max_step, (lower[i] - st.x[i]) / d[i]);
      else if (d[i] > 0.0 && std::isfinite(upper[i]))
        max_step = std::min(max_step, (upper[i] - st.x[i]) / d[i]);
    }
    const double initial = st.history.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;

    std::optional<detail::LinePoint> accepted;
    if (max_step > 0.0)
      accepted = detail::strong_wolfe_search(f, st.x, st.f, st.g, d, initial, max_step, lower,
                                             upper, cfg, out.evaluations);
    if (!accepted)
      accepted = detail::projected_backtracking(f, st.x, st.f, st.g, d, initial, lower, upper,
                                                cfg, out.evaluations);
    if (!accepted) {
      st.history.clear();
      const Vector steepest = -st.g;
      accepted = detail::projected_backtracking(f, st.x, st.f, st.g, steepest,
                                                1.0 / std::max(steepest.norm(), eps), lower, upper,
                                                cfg, out.evaluations);
    }
    if (!accepted) break;

    const Vector s = accepted->x - st.x;
    const Vector y = accepted->g - st.g;
    const double sy = s.dot(y);
    if (sy > eps * y.squaredNorm()) {
      st.history.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(st.history.size()) > cfg.memory) st.history.pop_front();
    }

    const double previous = st.f;
    st.x = std::move(accepted->x);
    st.g = std::move(accepted->g);
    st.f = accepted->f;
    st.step = accepted->step;
    ++st.iteration;

    pg = projected_gradient_norm(st.x, st.g, lower, upper);
    converged = pg <= cfg.grad_tol;
    // No representable progress left: stop and report as converged.
    if (!converged &&
        previous - st.f <= cfg.rel_ftol * std::max({std::abs(previous), std::abs(st.f), 1.0}))
      converged = true;
  }

  out.x = std::move(st.x);
  out.value = st.f;
  out.iterations = st.iteration;
  out.converged = converged;
  out.projected_grad_norm = pg;
  return out;
}

/// Worst per-coordinate relative error between the analytic gradient and
/// central differences with the given step. The denominator is
/// max(|analytic|, |numeric|, 1).
template <class Objective>
double check_gradient(Objective &&f, const Vector &x, double step) {
  require(step > 0.0, "finite-difference step must be positive");
  Vector g(x.size());
  f(x, g);
  Vector scratch(x.size());
  Vector probe = x;
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe, scratch);
    probe[i] = x[i] - step;
    const double down = f(probe, scratch);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1.0});
    worst = std::max(worst, std::abs(g[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace r1glm
