#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <variant>

#include "koopuq/koopman.hpp"
#include "koopuq/types.hpp"

namespace koopuq {

/// Diffusion term psi(t, y, p), one component per state.
using DiffusionFn = std::function<Vec(double t, const Vec& y, const Vec& p)>;

/// Wiener path from i.i.d. increments dW_i ~ N(0, dt) on a fixed grid,
/// piecewise-linear in between (the Brownian-bridge mean).
struct FixedStepNoise {
  double dt = 0.0;
  std::size_t n_steps = 0;
};

/// Truncated Karhunen-Loeve parameterization of W on [0, T] with K standard
/// normal coefficients. Smooth in the coefficients, which is what the
/// quadrature wants; the default choice.
struct KLNoise {
  double horizon = 0.0;  // T
  std::size_t order = 4;  // K
};

using NoiseModel = std::variant<FixedStepNoise, KLNoise>;

/// W(t) of the truncated KL series:
///   W(t) = sqrt(2 T) * sum_{k=1..K} z_k sin((k-1/2) pi t / T) / ((k-1/2) pi)
double kl_path(const Vec& z, double t, double T);

/// Path derivative of the KL series (cosine series).
double kl_path_derivative(const Vec& z, double t, double T);

/// Cumulative-sum path at grid times, linear interpolation between.
double fixed_step_path(const Vec& increments, double dt, double t);

/// Piecewise-constant path derivative, dW_i / dt on [i dt, (i+1) dt).
double fixed_step_path_derivative(const Vec& increments, double dt, double t);

/// Variance of the truncated KL representation at t = T:
///   2 T * sum_{k<=K} ((k-1/2) pi)^-2, increasing toward T with K.
double kl_truncated_variance(std::size_t order, double T);

/// Extends the problem's uncertain coordinates by the noise parameterization
/// and rewrites the drift as phi(y) + psi(y) * Wdot(t) (pathwise RODE form).
/// Throws if the noise horizon does not cover the map horizon. Warns-by-throw
/// is avoided; dimension growth past 10 is the caller's concern (the quad
/// module rejects it).
UncertaintyProblem noisy_problem(const UncertaintyProblem& base, const NoiseModel& noise,
                                 DiffusionFn diffusion);

/// Deterministic map S~ = E[S]: seeded Monte Carlo average of n_inner noisy
/// simulations per call. Reproducible for a fixed seed; the expensive
/// alternative to direct noise-coordinate quadrature.
SystemMap averaged_map(const UncertaintyProblem& base, const NoiseModel& noise,
                       DiffusionFn diffusion, std::size_t n_inner, std::uint64_t seed);

}  // namespace koopuq
