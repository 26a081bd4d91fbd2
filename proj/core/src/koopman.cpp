#include "koopuq/koopman.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace koopuq {

namespace {

double binom_d(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Observable vector_powers(const Observable& g, int n) {
  if (g.dim_out != 1)
    throw std::invalid_argument("central_moments: observable must be scalar");
  Observable pw;
  pw.dim_out = static_cast<std::size_t>(n);
  pw.eval = [g, n](const Vec& y, double t) {
    const double z = g.eval(y, t)[0];
    Vec out(static_cast<std::size_t>(n));
    double zk = 1.0;
    for (int k = 0; k < n; ++k) {
      zk *= z;
      out[static_cast<std::size_t>(k)] = zk;
    }
    return out;
  };
  return pw;
}

}  // namespace

ProductDensity UncertaintyProblem::joint_density() const {
  std::vector<Marginal> marginals;
  marginals.reserve(uncertain.size());
  for (const auto& u : uncertain) marginals.push_back(u.density);
  return ProductDensity(std::move(marginals));
}

SupportBox UncertaintyProblem::domain() const { return joint_density().support(); }

IntegrateResult UncertaintyProblem::simulate(const Vec& x) const {
  if (x.size() != uncertain.size())
    throw std::invalid_argument("UncertaintyProblem::simulate: point dimension mismatch");
  Vec state = fixed_state;
  Vec params = fixed_params;
  for (std::size_t i = 0; i < uncertain.size(); ++i) {
    const auto& u = uncertain[i];
    if (u.kind == CoordKind::State) {
      if (u.index >= state.size())
        throw std::invalid_argument("UncertaintyProblem: state index out of range");
      state[u.index] = x[i];
    } else {
      if (u.index >= params.size())
        throw std::invalid_argument("UncertaintyProblem: parameter index out of range");
      params[u.index] = x[i];
    }
  }
  return map.run(state, params);
}

std::function<Vec(const Vec&)> koopman_apply(const UncertaintyProblem& p,
                                             const Observable& g) {
  return [&p, &g](const Vec& x) {
    const IntegrateResult sim = p.simulate(x);
    return g.eval(sim.state, sim.time);
  };
}

ExpectationResult koopman_expectation(const UncertaintyProblem& p, const Observable& g,
                                      double rtol, double atol, std::size_t max_evals) {
  if (!(rtol > 0.0) || !(atol > 0.0))
    throw std::invalid_argument("koopman_expectation: tolerances must be > 0");
  if (p.uncertain.empty())
    throw std::invalid_argument("koopman_expectation: no uncertain coordinates");

  const ProductDensity density = p.joint_density();
  const SupportBox box = density.support();

  // The inner ODE tolerance sits two decades under the quadrature tolerance
  // so integrand noise stays below the error estimator's resolution.
  UncertaintyProblem tight = p;
  if (auto* ode = std::get_if<OdeSystem>(&tight.map.system); ode != nullptr) {
    tight.map.rtol = std::min(tight.map.rtol, rtol / 100.0);
    tight.map.atol = std::min(tight.map.atol, tight.map.rtol * 1e-4);
  }

  Integrand integrand = [&tight, &g, &density](const Vec& x) {
    const double w = density.pdf(x);
    const IntegrateResult sim = tight.simulate(x);
    Vec v = g.eval(sim.state, sim.time);
    if (v.size() != g.dim_out)
      throw std::runtime_error("observable returned wrong dimension");
    for (double& vi : v) vi *= w;
    return v;
  };

  QuadOptions opt;
  opt.rtol = rtol;
  opt.atol = atol;
  opt.max_evals = max_evals;

  const auto start = std::chrono::steady_clock::now();
  const QuadResult q = integrate_nd(integrand, box, opt);
  const auto stop = std::chrono::steady_clock::now();

  ExpectationResult res;
  res.value = q.value;
  res.error = q.error;
  res.evals = q.evals;
  res.converged = q.converged;
  res.wall_time = std::chrono::duration<double>(stop - start).count();
  return res;
}

CentralMoments central_moments(const UncertaintyProblem& p, const Observable& g,
                               int n, double rtol, double atol,
                               std::size_t max_evals) {
  if (n < 2 || n > 8)
    throw std::invalid_argument("central_moments: n must be in 2..8");

  const Observable powers = vector_powers(g, n);
  const ExpectationResult e = koopman_expectation(p, powers, rtol, atol, max_evals);

  CentralMoments cm;
  cm.raw = e.value;
  cm.raw_error = e.error;
  cm.evals = e.evals;
  cm.converged = e.converged;
  cm.mean = e.value[0];

  // Binomial recombination in extended precision; the coefficients grow
  // fast with the moment order and cancellation is severe.
  const long double mu = static_cast<long double>(e.value[0]);
  cm.moments.resize(static_cast<std::size_t>(n - 1));
  for (int order = 2; order <= n; ++order) {
    long double acc = 0.0L;
    long double mu_pow = 1.0L;  // mu^{order-k}, filled from k = order down to 0
    for (int k = order; k >= 0; --k) {
      const long double raw_k =
          (k == 0) ? 1.0L : static_cast<long double>(e.value[static_cast<std::size_t>(k - 1)]);
      const long double sign = ((order - k) % 2 == 0) ? 1.0L : -1.0L;
      acc += sign * static_cast<long double>(binom_d(order, k)) * mu_pow * raw_k;
      mu_pow *= mu;
    }
    cm.moments[static_cast<std::size_t>(order - 2)] = static_cast<double>(acc);
  }
  return cm;
}

namespace {

// One vector expectation of the monomials needed by covariance/correlation.
Vec pair_expectation(const UncertaintyProblem& p, const Observable& g1,
                     const Observable& g2, bool with_squares, double rtol,
                     double atol) {
  Observable joint;
  joint.dim_out = with_squares ? 5 : 3;
  joint.eval = [&g1, &g2, with_squares](const Vec& y, double t) {
    const double z1 = g1.eval(y, t)[0];
    const double z2 = g2.eval(y, t)[0];
    if (with_squares) return Vec{z1, z1 * z1, z2, z2 * z2, z1 * z2};
    return Vec{z1, z2, z1 * z2};
  };
  return koopman_expectation(p, joint, rtol, atol).value;
}

}  // namespace

double covariance(const UncertaintyProblem& p, const Observable& g1,
                  const Observable& g2, double rtol, double atol) {
  if (g1.dim_out != 1 || g2.dim_out != 1)
    throw std::invalid_argument("covariance: observables must be scalar");
  const Vec e = pair_expectation(p, g1, g2, false, rtol, atol);
  return e[2] - e[0] * e[1];
}

double correlation(const UncertaintyProblem& p, const Observable& g1,
                   const Observable& g2, double rtol, double atol) {
  if (g1.dim_out != 1 || g2.dim_out != 1)
    throw std::invalid_argument("correlation: observables must be scalar");
  const Vec e = pair_expectation(p, g1, g2, true, rtol, atol);
  const double var1 = e[1] - e[0] * e[0];
  const double var2 = e[3] - e[2] * e[2];
  if (!(var1 > 0.0) || !(var2 > 0.0))
    throw std::runtime_error("correlation: degenerate observable (zero variance)");
  const double cov = e[4] - e[0] * e[2];
  double rho = cov / (std::sqrt(var1) * std::sqrt(var2));
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;
  return rho;
}

FpPushforward1D::FpPushforward1D(std::function<double(double)> forward,
                                 std::function<double(double)> inverse,
                                 std::function<double(double)> inverse_deriv,
                                 Marginal base)
    : inverse_(std::move(inverse)),
      inverse_deriv_(std::move(inverse_deriv)),
      base_(std::move(base)) {
  const double a = marginal_lo(base_);
  const double b = marginal_hi(base_);
  const double fa = forward(a);
  const double fb = forward(b);
  // Monotonicity check on a grid of the support.
  const bool increasing = fb > fa;
  double prev = fa;
  for (int i = 1; i <= 64; ++i) {
    const double x = a + (b - a) * i / 64.0;
    const double fx = forward(x);
    if (increasing ? fx <= prev : fx >= prev)
      throw std::invalid_argument("FpPushforward1D: map is not strictly monotone");
    prev = fx;
  }
  lo_ = std::min(fa, fb);
  hi_ = std::max(fa, fb);
}

double FpPushforward1D::pdf(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  return koopuq::pdf(base_, inverse_(x)) * std::fabs(inverse_deriv_(x));
}

std::vector<Monomial> mean_observable_decomposition(StatKind stat, int n) {
  std::vector<Monomial> out;
  switch (stat) {
    case StatKind::CentralMoment: {
      if (n < 2) throw std::invalid_argument("mean_observable_decomposition: n must be >= 2");
      for (int k = 1; k <= n; ++k)
        out.push_back({k, 0, k == 1 ? "z" : "z^" + std::to_string(k)});
      break;
    }
    case StatKind::Covariance:
      out = {{1, 0, "z1"}, {0, 1, "z2"}, {1, 1, "z1*z2"}};
      break;
    case StatKind::Correlation:
      out = {{1, 0, "z1"}, {2, 0, "z1^2"}, {0, 1, "z2"}, {0, 2, "z2^2"}, {1, 1, "z1*z2"}};
      break;
  }
  return out;
}

}  // namespace koopuq
