#pragma once

#include <functional>
#include <string>
#include <vector>

#include "koopuq/koopman.hpp"
#include "koopuq/types.hpp"

namespace koopuq {

struct Decision {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double initial = 0.0;
};

struct ExpectedConstraint {
  Observable c;
  double threshold = 0.0;  // E[c] <= threshold
};

/// Optimization in the Koopman Expectation Form: minimize E[g o S] over the
/// decision box, subject to expected-constraint bounds. `bind` realizes
/// f0(.|u) by mapping a decision vector to a fully bound problem.
struct OptProblem {
  std::vector<Decision> decisions;
  std::function<UncertaintyProblem(const Vec& u)> bind;
  Observable objective;
  std::vector<ExpectedConstraint> constraints;
  double rtol = 1e-4;
  double atol = 1e-4;
  double ftol_rel = 1e-3;       // stop on relative decision change
  double fd_step = 1e-5;        // central-difference step scale
  std::size_t max_iterations = 200;
};

struct OptReport {
  Vec u_star;
  double objective_value = 0.0;
  Vec constraint_values;
  std::size_t n_objective_evals = 0;
  std::size_t n_gradient_evals = 0;
  bool converged = false;
  bool feasible = true;
  std::vector<std::pair<Vec, double>> trace;  // (u, expected objective)
};

/// Expected objective at u, with the quadrature error estimate.
/// Deterministic in u, which is what makes finite differences meaningful.
std::pair<double, double> expected_objective(const OptProblem& p, const Vec& u);

/// Central finite-difference gradient with per-coordinate step
/// h * max(1, |u_i|); one-sided at the box faces. The inner quadrature runs
/// a decade tighter than the objective's.
Vec gradient(const OptProblem& p, const Vec& u, double h);

/// Deterministic two-stage solver: per-coordinate line sweeps through the
/// start seed a monotone projected-gradient descent with Armijo
/// backtracking; expected constraints enter through an augmented-Lagrangian
/// outer loop. Monotone gradient steps are used on purpose — the expected
/// objectives here have narrow valleys behind low ridges, and
/// curvature-accelerated steps tunnel between basins.
OptReport optimize(const OptProblem& p);

}  // namespace koopuq
