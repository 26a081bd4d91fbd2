#include <doctest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "koopuq/optuu.hpp"
#include "koopuq/scenarios.hpp"

using namespace koopuq;

namespace {

/// y = u + x with x ~ Uniform(-1/2, 1/2): the expected objective of any
/// polynomial in y has a closed form, so optima are known exactly.
UncertaintyProblem shifted_uniform(double u) {
  UncertaintyProblem p;
  DirectMap d;
  d.run = [u](const Vec& x, const Vec&) {
    return std::make_pair(Vec{u + x[0]}, 0.0);
  };
  p.map.system = d;
  p.fixed_state = {0.0};
  p.uncertain = {{CoordKind::State, 0, Uniform(-0.5, 0.5)}};
  return p;
}

}  // namespace

TEST_SUITE("optuu") {

TEST_CASE("unconstrained quadratic: interior optimum found to tolerance") {
  // E[(y - 1.3)^2] = (u - 1.3)^2 + 1/12, minimized at u = 1.3.
  OptProblem p;
  p.decisions = {{"u", -2.0, 3.0, 0.0}};
  p.bind = [](const Vec& u) { return shifted_uniform(u[0]); };
  p.objective = Observable::scalar(
      [](const Vec& y, double) { return (y[0] - 1.3) * (y[0] - 1.3); });
  p.rtol = 1e-8;
  p.atol = 1e-10;
  p.ftol_rel = 1e-6;

  const OptReport r = optimize(p);
  CHECK(r.converged);
  CHECK(r.feasible);
  CHECK(r.u_star[0] == doctest::Approx(1.3).epsilon(1e-3));
  CHECK(r.objective_value == doctest::Approx(1.0 / 12.0).epsilon(1e-5));
  CHECK(r.n_objective_evals > 0);
  CHECK(r.n_gradient_evals > 0);
  CHECK_FALSE(r.trace.empty());
}

TEST_CASE("two decisions: separable quadratic") {
  // Terminal state (u0 + x, u1); objective (y0 - 0.4)^2 + (y1 + 0.7)^2.
  OptProblem p;
  p.decisions = {{"u0", -1.0, 1.0, 0.9}, {"u1", -1.0, 1.0, 0.9}};
  p.bind = [](const Vec& u) {
    UncertaintyProblem q;
    DirectMap d;
    const double u1 = u[1];
    d.run = [u1](const Vec& x, const Vec&) {
      return std::make_pair(Vec{x[0], u1}, 0.0);
    };
    q.map.system = d;
    q.fixed_state = {u[0], 0.0};
    q.uncertain = {{CoordKind::State, 0, Uniform(u[0] - 0.5, u[0] + 0.5)}};
    return q;
  };
  p.objective = Observable::scalar([](const Vec& y, double) {
    return (y[0] - 0.4) * (y[0] - 0.4) + (y[1] + 0.7) * (y[1] + 0.7);
  });
  p.rtol = 1e-8;
  p.atol = 1e-10;
  p.ftol_rel = 1e-6;

  const OptReport r = optimize(p);
  CHECK(r.converged);
  CHECK(r.u_star[0] == doctest::Approx(0.4).epsilon(2e-3));
  CHECK(r.u_star[1] == doctest::Approx(-0.7).epsilon(2e-3));
  CHECK(r.objective_value == doctest::Approx(1.0 / 12.0).epsilon(1e-4));
}

TEST_CASE("expected constraint is enforced and ends active") {
  // min E[y^2] = u^2 + 1/12 subject to E[y] = u <= -1: optimum at u = -1.
  OptProblem p;
  p.decisions = {{"u", -3.0, 3.0, 0.5}};
  p.bind = [](const Vec& u) { return shifted_uniform(u[0]); };
  p.objective = Observable::scalar([](const Vec& y, double) { return y[0] * y[0]; });
  ExpectedConstraint c;
  c.c = Observable::scalar([](const Vec& y, double) { return y[0]; });
  c.threshold = -1.0;
  p.constraints = {c};
  p.rtol = 1e-8;
  p.atol = 1e-10;
  p.ftol_rel = 1e-6;
  // The multiplier loop re-runs the inner descent several times, so it needs
  // more than the default shared iteration budget at this tolerance.
  p.max_iterations = 2000;

  const OptReport r = optimize(p);
  CHECK(r.converged);
  CHECK(r.feasible);
  REQUIRE(r.constraint_values.size() == 1);
  CHECK(r.constraint_values[0] <= -1.0 + 1e-3);
  CHECK(r.u_star[0] == doctest::Approx(-1.0).epsilon(2e-3));
  CHECK(r.objective_value == doctest::Approx(1.0 + 1.0 / 12.0).epsilon(1e-2));
}

TEST_CASE("optimum on a box face stays on the face") {
  // E[(y - 3)^2] over u in [0, 2] decreases toward u = 3: the box clips it.
  OptProblem p;
  p.decisions = {{"u", 0.0, 2.0, 0.5}};
  p.bind = [](const Vec& u) { return shifted_uniform(u[0]); };
  p.objective = Observable::scalar(
      [](const Vec& y, double) { return (y[0] - 3.0) * (y[0] - 3.0); });
  p.rtol = 1e-8;
  p.atol = 1e-10;
  p.ftol_rel = 1e-6;

  const OptReport r = optimize(p);
  CHECK(r.converged);
  CHECK(r.u_star[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.objective_value == doctest::Approx(1.0 + 1.0 / 12.0).epsilon(1e-4));
}

TEST_CASE("finite-difference gradient agrees with the analytic derivative") {
  OptProblem p;
  p.decisions = {{"u", -2.0, 3.0, 0.0}};
  p.bind = [](const Vec& u) { return shifted_uniform(u[0]); };
  p.objective = Observable::scalar(
      [](const Vec& y, double) { return (y[0] - 1.3) * (y[0] - 1.3); });
  p.rtol = 1e-9;
  p.atol = 1e-11;

  for (double u : {-1.0, 0.2, 2.5}) {
    const Vec g = gradient(p, {u}, 1e-5);
    CHECK(g[0] == doctest::Approx(2.0 * (u - 1.3)).epsilon(1e-5));
  }
  // One-sided at a face: still the right sign and magnitude.
  const Vec g_face = gradient(p, {3.0}, 1e-5);
  CHECK(g_face[0] == doctest::Approx(2.0 * (3.0 - 1.3)).epsilon(1e-4));
}

TEST_CASE("expected_objective returns value and error estimate") {
  OptProblem p;
  p.decisions = {{"u", -2.0, 3.0, 0.0}};
  p.bind = [](const Vec& u) { return shifted_uniform(u[0]); };
  p.objective = Observable::scalar([](const Vec& y, double) { return y[0] * y[0]; });
  p.rtol = 1e-10;
  p.atol = 1e-12;
  const auto [val, err] = expected_objective(p, {0.5});
  CHECK(val == doctest::Approx(0.25 + 1.0 / 12.0).epsilon(1e-9));
  CHECK(err >= 0.0);
  CHECK_THROWS_AS((void)expected_objective(p, {5.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)expected_objective(p, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("invalid problems are rejected") {
  OptProblem p;  // no decisions, no bind
  CHECK_THROWS_AS((void)optimize(p), std::invalid_argument);
  p.decisions = {{"u", 1.0, -1.0, 0.0}};  // inverted bounds
  p.bind = [](const Vec& u) { return shifted_uniform(u[0]); };
  p.objective = Observable::scalar([](const Vec& y, double) { return y[0]; });
  CHECK_THROWS_AS((void)optimize(p), std::invalid_argument);
}

}  // TEST_SUITE
