#include "koopuq/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace koopuq {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

std::size_t noise_dim(const NoiseModel& noise) {
  if (const auto* fs = std::get_if<FixedStepNoise>(&noise)) return fs->n_steps;
  return std::get<KLNoise>(noise).order;
}

double noise_horizon(const NoiseModel& noise) {
  if (const auto* fs = std::get_if<FixedStepNoise>(&noise))
    return fs->dt * static_cast<double>(fs->n_steps);
  return std::get<KLNoise>(noise).horizon;
}

// Path derivative at time t given the noise coordinates z.
double path_derivative(const NoiseModel& noise, const Vec& z, double t) {
  if (const auto* fs = std::get_if<FixedStepNoise>(&noise))
    return fixed_step_path_derivative(z, fs->dt, t);
  const auto& kl = std::get<KLNoise>(noise);
  return kl_path_derivative(z, t, kl.horizon);
}

Marginal noise_marginal(const NoiseModel& noise) {
  if (const auto* fs = std::get_if<FixedStepNoise>(&noise))
    return TruncatedNormal::unbounded(0.0, std::sqrt(fs->dt));
  return TruncatedNormal::unbounded(0.0, 1.0);
}

}  // namespace

double kl_path(const Vec& z, double t, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("kl_path: horizon must be > 0");
  if (t < 0.0 || t > T) throw std::invalid_argument("kl_path: t outside [0, T]");
  double w = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double freq = (static_cast<double>(k) + 0.5) * kPi;
    w += z[k] * std::sin(freq * t / T) / freq;
  }
  return std::sqrt(2.0 * T) * w;
}

double kl_path_derivative(const Vec& z, double t, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("kl_path_derivative: horizon must be > 0");
  if (t < 0.0 || t > T) throw std::invalid_argument("kl_path_derivative: t outside [0, T]");
  double w = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double freq = (static_cast<double>(k) + 0.5) * kPi;
    w += z[k] * std::cos(freq * t / T);
  }
  return std::sqrt(2.0 / T) * w;
}

double fixed_step_path(const Vec& increments, double dt, double t) {
  if (!(dt > 0.0)) throw std::invalid_argument("fixed_step_path: dt must be > 0");
  const double horizon = dt * static_cast<double>(increments.size());
  if (t < 0.0 || t > horizon * (1.0 + 1e-12))
    throw std::invalid_argument("fixed_step_path: t out of range");
  double w = 0.0;
  double grid = 0.0;
  for (std::size_t i = 0; i < increments.size(); ++i) {
    if (t <= grid + dt) {
      return w + increments[i] * (t - grid) / dt;
    }
    w += increments[i];
    grid += dt;
  }
  return w;
}

double fixed_step_path_derivative(const Vec& increments, double dt, double t) {
  if (!(dt > 0.0)) throw std::invalid_argument("fixed_step_path_derivative: dt must be > 0");
  const double horizon = dt * static_cast<double>(increments.size());
  if (t < 0.0 || t > horizon * (1.0 + 1e-12))
    throw std::invalid_argument("fixed_step_path_derivative: t out of range");
  std::size_t i = static_cast<std::size_t>(t / dt);
  if (i >= increments.size()) i = increments.size() - 1;
  return increments[i] / dt;
}

double kl_truncated_variance(std::size_t order, double T) {
  double s = 0.0;
  for (std::size_t k = 0; k < order; ++k) {
    const double freq = (static_cast<double>(k) + 0.5) * kPi;
    s += 1.0 / (freq * freq);
  }
  return 2.0 * T * s;
}

UncertaintyProblem noisy_problem(const UncertaintyProblem& base, const NoiseModel& noise,
                                 DiffusionFn diffusion) {
  const auto* ode = std::get_if<OdeSystem>(&base.map.system);
  if (ode == nullptr)
    throw std::invalid_argument("noisy_problem: base map must be an ODE system");
  if (noise_horizon(noise) < base.map.t_max - base.map.t0)
    throw std::invalid_argument("noisy_problem: noise horizon does not cover the map horizon");

  const std::size_t nd = noise_dim(noise);
  const std::size_t p_base = base.fixed_params.size();
  const double t0 = base.map.t0;

  UncertaintyProblem out = base;
  out.fixed_params.resize(p_base + nd, 0.0);

  const Marginal marg = noise_marginal(noise);
  for (std::size_t i = 0; i < nd; ++i)
    out.uncertain.push_back({CoordKind::Parameter, p_base + i, marg});

  const DriftFn base_drift = ode->drift;
  const std::size_t dim = ode->dim;
  OdeSystem forced;
  forced.dim = dim;
  forced.drift = [base_drift, diffusion = std::move(diffusion), noise, p_base, nd, t0, dim](
                     double t, const Vec& y, const Vec& p, Vec& dydt) {
    // Strip the noise coordinates before handing params to user code.
    Vec p_user(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(p_base));
    base_drift(t, y, p_user, dydt);
    const Vec z(p.begin() + static_cast<std::ptrdiff_t>(p_base), p.end());
    (void)nd;
    const double wdot = path_derivative(noise, z, t - t0);
    const Vec psi = diffusion(t, y, p_user);
    if (psi.size() != dim)
      throw std::runtime_error("noisy_problem: diffusion returned wrong dimension");
    for (std::size_t i = 0; i < dim; ++i) dydt[i] += psi[i] * wdot;
  };
  out.map.system = std::move(forced);
  return out;
}

SystemMap averaged_map(const UncertaintyProblem& base, const NoiseModel& noise,
                       DiffusionFn diffusion, std::size_t n_inner, std::uint64_t seed) {
  if (n_inner < 1) throw std::invalid_argument("averaged_map: n_inner must be >= 1");

  // Build the forced problem once; the direct map samples its noise
  // coordinates from seeded substreams and averages terminal states.
  UncertaintyProblem forced = noisy_problem(base, noise, std::move(diffusion));
  const std::size_t nd = noise_dim(noise);
  const std::size_t p_base = base.fixed_params.size();
  const Marginal marg = noise_marginal(noise);

  DirectMap dm;
  dm.run = [forced, nd, p_base, marg, n_inner, seed](const Vec& x0, const Vec& p) {
    const auto* ode = std::get_if<OdeSystem>(&forced.map.system);
    Vec mean;
    double mean_t = 0.0;
    for (std::size_t i = 0; i < n_inner; ++i) {
      Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
      Vec params(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(
                                            std::min(p.size(), p_base)));
      params.resize(p_base + nd, 0.0);
      for (std::size_t k = 0; k < nd; ++k) params[p_base + k] = sample(marg, rng);
      IntegrateOptions opt;
      opt.rtol = forced.map.rtol;
      opt.atol = forced.map.atol;
      const IntegrateResult r =
          integrate(*ode, forced.map.events, x0, params, forced.map.t0, forced.map.t_max, opt);
      if (mean.empty()) mean.assign(r.state.size(), 0.0);
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += r.state[j];
      mean_t += r.time;
    }
    for (double& m : mean) m /= static_cast<double>(n_inner);
    return std::make_pair(mean, mean_t / static_cast<double>(n_inner));
  };

  SystemMap out = base.map;
  out.system = std::move(dm);
  out.events.clear();
  return out;
}

}  // namespace koopuq
