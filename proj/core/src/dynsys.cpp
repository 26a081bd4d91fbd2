#include "koopuq/dynsys.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace koopuq {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                 a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
// Error weights: b - bhat.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output coefficients (Hairer & Wanner).
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

void check_finite(const Vec& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::runtime_error(std::string(what) + " produced NaN/Inf");
  }
}

// Continuous extension of one accepted step.
struct DenseStep {
  double t, h;
  Vec r1, r2, r3, r4, r5;

  void eval(double ti, Vec& out) const {
    const double theta = (ti - t) / h;
    const double theta1 = 1.0 - theta;
    out.resize(r1.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
      out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
    }
  }
};

struct Stepper {
  const OdeSystem& sys;
  const Vec& p;
  double rtol, atol;
  std::size_t n;
  Vec k1, k2, k3, k4, k5, k6, k7, ytmp, yerr;

  Stepper(const OdeSystem& s, const Vec& params, double rt, double at)
      : sys(s), p(params), rtol(rt), atol(at), n(s.dim) {
    k1.resize(n); k2.resize(n); k3.resize(n); k4.resize(n);
    k5.resize(n); k6.resize(n); k7.resize(n);
    ytmp.resize(n); yerr.resize(n);
  }

  // Classic Hairer initial step-size heuristic.
  double initial_step(double t, const Vec& y, double t_span) {
    sys.drift(t, y, p, k1);
    check_finite(k1, "drift");
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = atol + rtol * std::fabs(y[i]);
      dnf += (k1[i] / sk) * (k1[i] / sk);
      dny += (y[i] / sk) * (y[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    h = std::min(h, t_span);
    // One explicit Euler probe to bound the second derivative.
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * k1[i];
    sys.drift(t + h, ytmp, p, k2);
    check_finite(k2, "drift");
    double der2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = atol + rtol * std::fabs(y[i]);
      const double d = (k2[i] - k1[i]) / sk;
      der2 += d * d;
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(der2, std::sqrt(dnf));
    double h1 = (der12 <= 1e-15) ? std::max(1e-6, h * 1e-3)
                                 : std::pow(0.01 / der12, 0.2);
    return std::min({100.0 * h, h1, t_span});
  }

  // Attempts one step of size h from (t, y); k1 must hold drift(t, y).
  // On acceptance fills ynew, dense, and the scaled error norm.
  double try_step(double t, const Vec& y, double h, Vec& ynew, DenseStep& dense) {
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    sys.drift(t + c2 * h, ytmp, p, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    sys.drift(t + c3 * h, ytmp, p, k3);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    sys.drift(t + c4 * h, ytmp, p, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    sys.drift(t + c5 * h, ytmp, p, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    sys.drift(t + h, ytmp, p, k6);
    ynew.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    sys.drift(t + h, ynew, p, k7);  // FSAL
    check_finite(k7, "drift");

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                             e6 * k6[i] + e7 * k7[i]);
      const double sk = atol + rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      err += (ei / sk) * (ei / sk);
    }
    err = std::sqrt(err / static_cast<double>(n));

    dense.t = t;
    dense.h = h;
    dense.r1 = y;
    dense.r2.resize(n);
    dense.r3.resize(n);
    dense.r4.resize(n);
    dense.r5.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ydiff = ynew[i] - y[i];
      const double bspl = h * k1[i] - ydiff;
      dense.r2[i] = ydiff;
      dense.r3[i] = bspl;
      dense.r4[i] = ydiff - h * k7[i] - bspl;
      dense.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                         d6 * k6[i] + d7 * k7[i]);
    }
    return err;
  }
};

struct EventState {
  bool armed = true;
  double last_value = 0.0;
};

bool crossing_accepted(double s0, double s1, int direction) {
  if (direction >= 0 && s0 < 0.0 && s1 >= 0.0) return true;
  if (direction <= 0 && s0 > 0.0 && s1 <= 0.0) return true;
  return false;
}

}  // namespace

std::optional<double> locate_event(const std::function<double(double)>& condition,
                                   double ta, double tb, double tol_t,
                                   std::size_t max_iter) {
  double fa = condition(ta);
  double fb = condition(tb);
  if (fa == 0.0) return ta;
  if (fb == 0.0) return tb;
  if ((fa > 0.0) == (fb > 0.0)) return std::nullopt;

  // Illinois variant of regula falsi.
  double t = tb;
  int side = 0;
  for (std::size_t it = 0; it < max_iter && tb - ta > tol_t; ++it) {
    t = (fa * tb - fb * ta) / (fa - fb);
    // Keep the iterate strictly inside the bracket.
    const double margin = 0.01 * (tb - ta);
    t = std::clamp(t, ta + margin, tb - margin);
    const double ft = condition(t);
    if (ft == 0.0) return t;
    if ((ft > 0.0) == (fa > 0.0)) {
      ta = t;
      fa = ft;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      tb = t;
      fb = ft;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (ta + tb);
}

Vec iterate_discrete(const std::function<Vec(const Vec&)>& map, const Vec& x0,
                     std::size_t n) {
  Vec x = x0;
  for (std::size_t i = 0; i < n; ++i) {
    x = map(x);
    check_finite(x, "discrete map");
  }
  return x;
}

IntegrateResult integrate(const OdeSystem& sys, const std::vector<Event>& events,
                          const Vec& x0, const Vec& p, double t0, double t_max,
                          const IntegrateOptions& opt) {
  if (x0.size() != sys.dim) throw std::invalid_argument("integrate: state dimension mismatch");
  if (!(t_max > t0)) throw std::invalid_argument("integrate: t_max must be > t0");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0))
    throw std::invalid_argument("integrate: tolerances must be > 0");
  check_finite(x0, "initial state");

  const double event_tol_t = opt.event_tol_t_rel * (t_max - t0);
  Stepper st(sys, p, opt.rtol, opt.atol);

  IntegrateResult res;
  res.state = x0;
  res.time = t0;

  std::vector<EventState> estate(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    estate[e].last_value = events[e].condition(t0, x0, p);
    if (std::fabs(estate[e].last_value) <= opt.event_deadband) estate[e].armed = false;
  }

  if (opt.trace) {
    opt.trace->times.push_back(t0);
    opt.trace->states.push_back(x0);
  }

  double h = st.initial_step(t0, res.state, t_max - t0);  // also fills k1

  Vec ynew;
  DenseStep dense;
  Vec probe;

  // PI step-size controller state.
  double err_old = 1e-4;
  constexpr double kBeta = 0.04, kAlpha = 0.2 - kBeta * 0.75;
  constexpr double kSafety = 0.9, kMinFactor = 0.2, kMaxFactor = 10.0;

  while (res.time < t_max) {
    if (res.n_steps >= opt.max_steps)
      throw std::runtime_error("integrate: step budget exhausted at t = " +
                               std::to_string(res.time));
    if (res.time + h > t_max) h = t_max - res.time;
    if (!(h > std::fabs(res.time) * 1e-15 + 1e-300))
      throw std::runtime_error("integrate: step size underflow at t = " +
                               std::to_string(res.time));

    const double err = st.try_step(res.time, res.state, h, ynew, dense);
    ++res.n_steps;

    if (err > 1.0) {  // reject
      const double factor =
          std::max(kMinFactor, kSafety * std::pow(err, -0.2));
      h *= factor;
      continue;
    }

    const double t_end = res.time + h;

    // Event scan across the accepted step.
    double t_hit = t_end;
    std::size_t hit_idx = events.size();
    for (std::size_t e = 0; e < events.size(); ++e) {
      const double s1 = events[e].condition(t_end, ynew, p);
      if (!estate[e].armed) continue;
      const double s0 = estate[e].last_value;
      if (crossing_accepted(s0, s1, events[e].direction)) {
        auto cond_of_t = [&](double ti) {
          dense.eval(ti, probe);
          return events[e].condition(ti, probe, p);
        };
        const auto tc = locate_event(cond_of_t, res.time, t_end, event_tol_t);
        if (tc && *tc < t_hit) {
          t_hit = *tc;
          hit_idx = e;
        }
      }
    }

    if (hit_idx < events.size()) {
      // Cut the step at the crossing, apply the effect, restart.
      dense.eval(t_hit, probe);
      res.time = t_hit;
      res.state = events[hit_idx].effect ? events[hit_idx].effect(t_hit, probe, p) : probe;
      check_finite(res.state, "event effect");
      res.events.push_back({t_hit, hit_idx});
      if (opt.trace) {
        opt.trace->times.push_back(res.time);
        opt.trace->states.push_back(res.state);
        opt.trace->events.push_back({t_hit, hit_idx});
      }
      if (events[hit_idx].terminal) return res;

      for (std::size_t e = 0; e < events.size(); ++e) {
        estate[e].last_value = events[e].condition(res.time, res.state, p);
        if (e == hit_idx || std::fabs(estate[e].last_value) <= opt.event_deadband)
          estate[e].armed = false;  // dead-band keeps the fired event from chattering
      }
      h = st.initial_step(res.time, res.state, t_max - res.time);  // refills k1
      err_old = 1e-4;
      continue;
    }

    // Plain acceptance.
    res.time = t_end;
    res.state = ynew;
    std::swap(st.k1, st.k7);  // FSAL
    for (std::size_t e = 0; e < events.size(); ++e) {
      const double s1 = events[e].condition(res.time, res.state, p);
      estate[e].last_value = s1;
      if (!estate[e].armed && std::fabs(s1) > opt.event_deadband) estate[e].armed = true;
    }
    if (opt.trace) {
      opt.trace->times.push_back(res.time);
      opt.trace->states.push_back(res.state);
    }

    // PI controller (Hairer's beta stabilization).
    double factor = kSafety * std::pow(err > 1e-14 ? err : 1e-14, -kAlpha) *
                    std::pow(err_old, kBeta);
    factor = std::clamp(factor, kMinFactor, kMaxFactor);
    h *= factor;
    err_old = std::max(err, 1e-4);
  }

  return res;
}

IntegrateResult integrate(const SystemMap& m, const Vec& x0, const Vec& p) {
  return m.run(x0, p);
}

IntegrateResult SystemMap::run(const Vec& x0, const Vec& p) const {
  if (const auto* ode = std::get_if<OdeSystem>(&system)) {
    IntegrateOptions opt;
    opt.rtol = rtol;
    opt.atol = atol;
    return integrate(*ode, events, x0, p, t0, t_max, opt);
  }
  if (const auto* dm = std::get_if<DiscreteMap>(&system)) {
    IntegrateResult res;
    res.state = iterate_discrete([&](const Vec& x) { return dm->step(x, p); }, x0,
                                 dm->n_iterations);
    res.time = static_cast<double>(dm->n_iterations);
    return res;
  }
  const auto& direct = std::get<DirectMap>(system);
  IntegrateResult res;
  auto [state, time] = direct.run(x0, p);
  res.state = std::move(state);
  res.time = time;
  return res;
}

}  // namespace koopuq
