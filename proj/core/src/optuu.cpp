#include "koopuq/optuu.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace koopuq {

namespace {

Vec clip_to_box(const OptProblem& p, Vec u) {
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = std::clamp(u[i], p.decisions[i].lower, p.decisions[i].upper);
  return u;
}

double inf_norm_rel_change(const Vec& a, const Vec& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    r = std::max(r, std::fabs(a[i] - b[i]) / std::max(1.0, std::fabs(a[i])));
  return r;
}

struct Evaluator {
  const OptProblem& p;
  std::size_t n_objective_evals = 0;

  // Expected objective and constraints in one pass (single vector-valued
  // expectation per point, one simulation per quadrature node).
  struct Values {
    double objective;
    double error;
    Vec constraints;
  };

  Values eval(const Vec& u, double rtol, double atol) {
    ++n_objective_evals;
    const UncertaintyProblem prob = p.bind(u);
    const std::size_t nc = p.constraints.size();

    Observable all;
    all.dim_out = 1 + nc;
    all.eval = [this](const Vec& y, double t) {
      Vec out;
      out.reserve(1 + p.constraints.size());
      out.push_back(p.objective.eval(y, t)[0]);
      for (const auto& con : p.constraints) out.push_back(con.c.eval(y, t)[0]);
      return out;
    };

    const ExpectationResult e = koopman_expectation(prob, all, rtol, atol);
    if (!e.converged)
      throw std::runtime_error("expected_objective: quadrature failed to converge");
    Values v;
    v.objective = e.value[0];
    v.error = e.error[0];
    v.constraints.assign(e.value.begin() + 1, e.value.end());
    return v;
  }

  // Augmented-Lagrangian merit for inequality constraints E[c_i] <= lambda_i.
  double merit(const Values& v, const Vec& mult, double mu) const {
    double m = v.objective;
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      const double viol = v.constraints[i] - p.constraints[i].threshold;
      const double t = std::max(0.0, mult[i] + mu * viol);
      m += (t * t - mult[i] * mult[i]) / (2.0 * mu);
    }
    return m;
  }
};

}  // namespace

std::pair<double, double> expected_objective(const OptProblem& p, const Vec& u) {
  if (u.size() != p.decisions.size())
    throw std::invalid_argument("expected_objective: decision dimension mismatch");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < p.decisions[i].lower || u[i] > p.decisions[i].upper)
      throw std::invalid_argument("expected_objective: u outside bounds");
  }
  Evaluator ev{p};
  const auto v = ev.eval(u, p.rtol, p.atol);
  return {v.objective, v.error};
}

Vec gradient(const OptProblem& p, const Vec& u, double h) {
  Evaluator ev{p};
  const std::size_t n = u.size();
  Vec g(n, 0.0);
  const Vec empty_mult(p.constraints.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = h * std::max(1.0, std::fabs(u[i]));
    Vec up = u, um = u;
    up[i] = std::min(u[i] + hi, p.decisions[i].upper);
    um[i] = std::max(u[i] - hi, p.decisions[i].lower);
    if (up[i] == um[i]) continue;  // degenerate box face
    const double fp = ev.eval(up, p.rtol / 10.0, p.atol / 10.0).objective;
    const double fm = ev.eval(um, p.rtol / 10.0, p.atol / 10.0).objective;
    g[i] = (fp - fm) / (up[i] - um[i]);
  }
  return g;
}

namespace {

OptReport optimize_from(const OptProblem& p, const Vec& start, Evaluator& ev) {
  const std::size_t n = p.decisions.size();
  const std::size_t nc = p.constraints.size();

  OptReport rep;
  Vec u = start;
  Vec mult(nc, 0.0);
  double mu = 10.0;
  const std::size_t outer_rounds = nc == 0 ? 1 : 8;

  // Merit gradient by central differences at the (tighter) gradient
  // tolerance; shares the augmented-Lagrangian state.
  auto merit_at = [&](const Vec& x, double rtol, double atol) {
    return ev.merit(ev.eval(x, rtol, atol), mult, mu);
  };
  auto merit_grad = [&](const Vec& x) {
    Vec g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double hi = p.fd_step * std::max(1.0, std::fabs(x[i]));
      Vec up = x, um = x;
      up[i] = std::min(x[i] + hi, p.decisions[i].upper);
      um[i] = std::max(x[i] - hi, p.decisions[i].lower);
      if (up[i] == um[i]) continue;
      g[i] = (merit_at(up, p.rtol / 10.0, p.atol / 10.0) -
              merit_at(um, p.rtol / 10.0, p.atol / 10.0)) /
             (up[i] - um[i]);
    }
    ++rep.n_gradient_evals;
    return g;
  };

  Evaluator::Values vals = ev.eval(u, p.rtol, p.atol);
  rep.trace.emplace_back(u, vals.objective);

  bool inner_converged = false;
  std::size_t total_iters = 0;

  for (std::size_t outer = 0; outer < outer_rounds; ++outer) {
    double f = ev.merit(vals, mult, mu);
    Vec g = merit_grad(u);

    inner_converged = false;
    while (total_iters < p.max_iterations) {
      ++total_iters;

      // Steepest-descent direction. Deliberately no quasi-Newton model: the
      // expectation landscapes here have narrow curved valleys separated by
      // low ridges, and curvature-accelerated steps were observed to tunnel
      // out of the basin the seed selected. Projected gradient with a
      // monotone line search stays put and the effective dimension after
      // bound activity is low, so the linear rate is not a problem.
      Vec d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];

      // Backtracking projected line search (Armijo on the merit).
      const double f_prev = f;
      double alpha = 1.0;
      Vec u_new;
      Evaluator::Values v_new{};
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        Vec cand(n);
        for (std::size_t i = 0; i < n; ++i) cand[i] = u[i] + alpha * d[i];
        cand = clip_to_box(p, cand);
        double gdot = 0.0;
        for (std::size_t i = 0; i < n; ++i) gdot += g[i] * (cand[i] - u[i]);
        if (gdot >= 0.0) {  // projection killed the direction at this scale
          alpha *= 0.5;
          continue;
        }
        const auto v = ev.eval(cand, p.rtol, p.atol);
        const double m = ev.merit(v, mult, mu);
        if (m <= f + 1e-4 * gdot) {
          u_new = std::move(cand);
          v_new = v;
          f = m;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {  // no admissible descent step: stationary within the box
        inner_converged = true;
        break;
      }

      const Vec g_new = merit_grad(u_new);

      const double du = inf_norm_rel_change(u_new, u);
      const double df = std::fabs(f - f_prev) / std::max(1e-12, std::fabs(f));
      u = u_new;
      g = g_new;
      vals = v_new;
      rep.trace.emplace_back(u, vals.objective);
      // The decision-change test alone can trigger prematurely on a steep
      // valley wall, so the merit must have flattened out as well.
      if (du <= p.ftol_rel && df <= p.ftol_rel) {
        inner_converged = true;
        break;
      }
    }

    if (nc == 0) break;

    // Multiplier update; stop when feasible and the inner loop settled.
    double max_viol = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      const double viol = vals.constraints[i] - p.constraints[i].threshold;
      mult[i] = std::max(0.0, mult[i] + mu * viol);
      max_viol = std::max(max_viol, viol / std::max(1.0, std::fabs(p.constraints[i].threshold)));
    }
    if (inner_converged && max_viol <= 1e-6) break;
    mu *= 5.0;
    if (total_iters >= p.max_iterations) break;
  }

  rep.u_star = u;
  rep.objective_value = vals.objective;
  rep.constraint_values = vals.constraints;
  rep.converged = inner_converged;
  for (std::size_t i = 0; i < nc; ++i) {
    const double tol = 1e-6 * std::max(1.0, std::fabs(p.constraints[i].threshold));
    if (vals.constraints[i] > p.constraints[i].threshold + tol) rep.feasible = false;
  }
  return rep;
}

}  // namespace

OptReport optimize(const OptProblem& p) {
  const std::size_t n = p.decisions.size();
  if (n == 0) throw std::invalid_argument("optimize: no decision variables");
  for (const auto& d : p.decisions) {
    if (!(d.lower < d.upper) || !std::isfinite(d.lower) || !std::isfinite(d.upper))
      throw std::invalid_argument("optimize: decision bounds must be finite with lower < upper");
    if (d.initial < d.lower || d.initial > d.upper)
      throw std::invalid_argument("optimize: initial value outside bounds");
  }

  Evaluator ev{p};

  // Seeding pass: the expected objective is typically multimodal in the
  // decisions (event counts jump), so a descent from an arbitrary start is
  // not trustworthy. Sweep each coordinate on a fixed fine grid through the
  // start (classical cyclic line-scan seeding), rank the samples at loose
  // quadrature tolerance, and polish the best seed alongside the user start.
  // Fully deterministic.
  Vec start(n);
  for (std::size_t i = 0; i < n; ++i) start[i] = p.decisions[i].initial;

  const Vec zero_mult(p.constraints.size(), 0.0);
  auto seed_merit = [&](const Vec& u) {
    // Looser tolerance: ranking only needs the leading digits.
    const auto v = ev.eval(u, std::max(p.rtol, 1e-2), std::max(p.atol, 1e-2));
    return ev.merit(v, zero_mult, 10.0);
  };

  constexpr std::size_t kSweep = 201;  // grid points per coordinate
  double best_seed_merit = seed_merit(start);
  Vec best_seed = start;
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t k = 0; k < kSweep; ++k) {
      Vec u = start;
      u[d] = p.decisions[d].lower + (p.decisions[d].upper - p.decisions[d].lower) *
                                        static_cast<double>(k) /
                                        static_cast<double>(kSweep - 1);
      const double m = seed_merit(u);
      if (m < best_seed_merit) {
        best_seed_merit = m;
        best_seed = std::move(u);
      }
    }
  }

  std::vector<Vec> starts = {start};  // the user start always gets a full solve
  if (inf_norm_rel_change(start, best_seed) >= 1e-6) starts.push_back(best_seed);

  OptReport best;
  bool have_best = false;
  std::size_t grad_evals = 0;
  for (const Vec& s : starts) {
    OptReport r = optimize_from(p, s, ev);
    grad_evals += r.n_gradient_evals;
    const bool better =
        !have_best || (r.feasible && !best.feasible) ||
        (r.feasible == best.feasible && r.objective_value < best.objective_value);
    if (better) {
      best = std::move(r);
      have_best = true;
    }
  }
  best.n_objective_evals = ev.n_objective_evals;
  best.n_gradient_evals = grad_evals;
  return best;
}

}  // namespace koopuq
