#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "koopuq/types.hpp"

namespace koopuq {

/// Vector-valued integrand, point -> component values.
using Integrand = std::function<Vec(const Vec&)>;

struct QuadResult {
  Vec value;
  Vec error;          // component-wise >= 0
  std::size_t evals = 0;
  bool converged = false;
};

struct QuadOptions {
  double rtol = 1e-6;
  double atol = 1e-6;
  std::size_t max_evals = 1'000'000;
};

/// Evaluates f at every point, order-preserving. Evaluations may run on
/// several workers but each result lands in its pre-assigned slot, so the
/// output is identical to a sequential run. The first integrand failure is
/// rethrown with the offending point's coordinates.
std::vector<Vec> batch_eval(const Integrand& f, const std::vector<Vec>& points);

/// Adaptive 1-D quadrature: 15-point Kronrod / 7-point Gauss pair with
/// bisection of the worst-error interval.
QuadResult integrate_1d(const Integrand& f, double lo, double hi,
                        const QuadOptions& opt = {});

/// Adaptive cubature over a box: Genz-Malik degree-7/5 embedded rule,
/// repeatedly splitting the worst region along its largest scaled
/// fourth-difference axis. 1-D boxes are routed to the Gauss-Kronrod rule.
/// Deterministic for a given integrand: heap ties break on insertion order.
QuadResult integrate_nd(const Integrand& f, const SupportBox& box,
                        const QuadOptions& opt = {});

}  // namespace koopuq
