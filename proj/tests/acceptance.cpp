// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and prints the measured numbers
// so a failing run is diagnosable from the log alone.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "koopuq/koopman.hpp"
#include "koopuq/mc.hpp"
#include "koopuq/noise.hpp"
#include "koopuq/optuu.hpp"
#include "koopuq/quad.hpp"
#include "koopuq/scenarios.hpp"

using namespace koopuq;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s: criterion %d (%s) — %s\n", pass ? "PASS" : "FAIL", idx, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// Shared across criteria: the headline scenario and its closed-form value.
const BouncingBallParams kBall{};
const double kClosedForm = analytic_expectation(kBall);

// Cached expensive results reused by several criteria.
struct Shared {
  ExpectationResult koopman_loose;   // criterion 1/6
  MCResult mc_100k;                  // criterion 3/6
  std::optional<OptReport> opt;      // criterion 4/5
  double opt_wall = 0.0;
};
Shared g;

// ---------------------------------------------------------------------------

void criterion1() {
  const UncertaintyProblem p = bouncing_ball_problem(kBall);
  const Observable obj = bouncing_ball_objective(kBall);
  const double t0 = now_seconds();
  g.koopman_loose = koopman_expectation(p, obj, 1e-2, 1e-2);
  const double wall = now_seconds() - t0;

  const double err = std::fabs(g.koopman_loose.value[0] - kClosedForm);
  const bool pass = g.koopman_loose.converged && err <= 1e-2 * kClosedForm &&
                    g.koopman_loose.evals <= 100 && wall < 1.0 &&
                    std::fabs(kClosedForm - 36.008) <= 1e-3;
  report(1, "expected squared miss by quadrature", pass,
         "value " + fmt(g.koopman_loose.value[0]) + " vs closed form " + fmt(kClosedForm) +
             ", " + std::to_string(g.koopman_loose.evals) + " simulations, " + fmt(wall) +
             " s");
}

void criterion2() {
  const UncertaintyProblem p = bouncing_ball_problem(kBall);
  const Observable obj = bouncing_ball_objective(kBall);
  const ExpectationResult r = koopman_expectation(p, obj, 1e-6, 1e-8);
  const double rel = std::fabs(r.value[0] - kClosedForm) / kClosedForm;
  const bool pass = r.converged && rel <= 1e-5;
  report(2, "tight-tolerance agreement with the closed form", pass,
         "relative error " + fmt(rel) + " at rtol 1e-6 (" + std::to_string(r.evals) +
             " simulations)");
}

void criterion3() {
  const UncertaintyProblem p = bouncing_ball_problem(kBall);
  const Observable obj = bouncing_ball_objective(kBall);
  const double t0 = now_seconds();
  g.mc_100k = mc_expectation(p, obj, 100'000, 7);
  const double wall = now_seconds() - t0;

  const double mc_err = std::fabs(g.mc_100k.estimate[0] - kClosedForm);
  const ExpectationResult tight = koopman_expectation(p, obj, 1e-6, 1e-8);
  const double k_err = std::fabs(tight.value[0] - kClosedForm);
  const bool pass = g.mc_100k.valid && mc_err <= 4.0 * g.mc_100k.std_error[0] &&
                    mc_err >= 100.0 * k_err && wall < 30.0;
  report(3, "Monte Carlo baseline is consistent but far less accurate", pass,
         "MC error " + fmt(mc_err) + " (se " + fmt(g.mc_100k.std_error[0]) +
             "), quadrature error " + fmt(k_err) + ", " + fmt(wall) + " s");
}

const OptReport& optimized() {
  if (!g.opt) {
    OptProblem prob = bouncing_ball_opt_problem(kBall, {-100.0, 1.0, 10.0},
                                                {0.0, 3.0, 50.0}, {0.0, 2.0, 50.0}, 1e-3);
    prob.rtol = 1e-5;
    prob.atol = 1e-6;
    const double t0 = now_seconds();
    g.opt = optimize(prob);
    g.opt_wall = now_seconds() - t0;
  }
  return *g.opt;
}

void criterion4() {
  // Distribution of the miss distance at the optimized design: central
  // moments from one vector expectation, cross-checked against a large MC
  // run on the same design.
  const OptReport& opt = optimized();
  BouncingBallParams p = kBall;
  p.x0 = opt.u_star[0];
  p.xdot0 = opt.u_star[1];
  p.z0 = opt.u_star[2];
  const UncertaintyProblem prob = bouncing_ball_problem(p);
  const Observable obj = bouncing_ball_objective(p);

  const double t0 = now_seconds();
  const CentralMoments cm = central_moments(prob, obj, 5, 1e-5, 1e-7);
  const double wall_q = now_seconds() - t0;
  const MCResult mc = mc_expectation(prob, obj, 1'000'000, 13);
  const double wall = now_seconds() - t0;

  // Reference distribution of the optimized design (variance through the
  // fifth central moment).
  const double ref[4] = {9.007e-2, 3.924e-1, 3.428, 44.536};
  bool pass = cm.converged && wall_q < 10.0;
  std::ostringstream detail;
  detail << "mean " << fmt(cm.mean) << ", moments [";
  for (int k = 0; k < 4; ++k) {
    detail << (k ? ", " : "") << fmt(cm.moments[k]);
    if (std::fabs(cm.moments[k] - ref[k]) > 0.02 * std::fabs(ref[k])) pass = false;
  }
  detail << "] vs reference [0.09007, 0.3924, 3.428, 44.536]";
  // MC agreement on the mean of the same design.
  if (std::fabs(cm.mean - mc.estimate[0]) > 4.0 * mc.std_error[0]) pass = false;
  detail << "; MC mean " << fmt(mc.estimate[0]) << " +/- " << fmt(mc.std_error[0]) << ", "
         << fmt(wall) << " s";
  report(4, "moment set of the optimized design", pass, detail.str());
}

void criterion5() {
  const OptReport& opt = optimized();
  const double wall = g.opt_wall;
  const bool pass = opt.converged && opt.feasible && opt.objective_value <= 0.1 &&
                    wall < 60.0;
  report(5, "optimization under uncertainty meets the accuracy target", pass,
         "u* = (" + fmt(opt.u_star[0]) + ", " + fmt(opt.u_star[1]) + ", " +
             fmt(opt.u_star[2]) + "), E = " + fmt(opt.objective_value) + ", " +
             std::to_string(opt.n_objective_evals) + " expectation evals, " + fmt(wall) +
             " s");
}

void criterion6() {
  // Wall-clock ratio between the criterion-1 quadrature and the
  // criterion-3 MC run, both already measured on this machine.
  const double k_wall = g.koopman_loose.wall_time;
  const double mc_wall = g.mc_100k.wall_time;
  const bool pass = k_wall > 0.0 && mc_wall >= 100.0 * k_wall;
  report(6, "quadrature is at least 100x faster than 100k-sample MC", pass,
         "quadrature " + fmt(k_wall) + " s vs MC " + fmt(mc_wall) + " s (ratio " +
             fmt(mc_wall / k_wall) + "x)");
}

void criterion7() {
  // Property bundle: the structural identities the method rests on.
  bool pass = true;
  std::ostringstream detail;

  // (a) Adjoint identity <P_S f, g> = <f, U_S g> on a monotone map.
  {
    UncertaintyProblem p;
    DirectMap d;
    d.run = [](const Vec& x, const Vec&) {
      return std::make_pair(Vec{x[0] * x[0] * x[0]}, 0.0);
    };
    p.map.system = d;
    p.fixed_state = {0.0};
    p.uncertain = {{CoordKind::State, 0, Uniform(0.5, 2.0)}};
    const Observable gy =
        Observable::scalar([](const Vec& y, double) { return y[0] + std::sin(y[0]); });
    const double lhs = koopman_expectation(p, gy, 1e-10, 1e-12).value[0];
    const FpPushforward1D pf([](double x) { return x * x * x; },
                             [](double y) { return std::cbrt(y); },
                             [](double y) { return 1.0 / (3.0 * std::cbrt(y * y)); },
                             Uniform(0.5, 2.0));
    QuadOptions qo;
    qo.rtol = 1e-11;
    qo.atol = 1e-13;
    const double rhs =
        integrate_1d([&](const Vec& y) { return Vec{(y[0] + std::sin(y[0])) * pf.pdf(y[0])}; },
                     pf.lo(), pf.hi(), qo)
            .value[0];
    const double err = std::fabs(lhs - rhs);
    if (err > 1e-8) pass = false;
    detail << "adjoint " << fmt(err);
  }

  // (b) E[1 o S] = 1 on the headline scenario.
  {
    const UncertaintyProblem p = bouncing_ball_problem(kBall);
    const Observable one = Observable::scalar([](const Vec&, double) { return 1.0; });
    const double e1 = koopman_expectation(p, one, 1e-8, 1e-10).value[0];
    if (std::fabs(e1 - 1.0) > 1e-8) pass = false;
    detail << ", E[1] err " << fmt(std::fabs(e1 - 1.0));
  }

  // (c) Closed-form truncated-normal moments vs quadrature.
  {
    const TruncatedNormal d = kBall.alpha_density;
    double worst = 0.0;
    for (int k = 1; k <= 6; ++k) {
      QuadOptions qo;
      qo.rtol = 1e-13;
      qo.atol = 1e-15;
      const double oracle =
          integrate_1d([&](const Vec& x) { return Vec{std::pow(x[0], k) * d.pdf(x[0])}; },
                       d.lo(), d.hi(), qo)
              .value[0];
      worst = std::max(worst, std::fabs(d.raw_moment(k) - oracle) / std::fabs(oracle));
    }
    if (worst > 1e-10) pass = false;
    detail << ", TN moments " << fmt(worst);
  }

  // (d) Degree-7 exactness of the cubature.
  {
    const SupportBox box({0.0, -1.0}, {1.0, 1.0});
    const double got =
        integrate_nd([](const Vec& x) { return Vec{std::pow(x[0], 5) * x[1] * x[1]}; }, box)
            .value[0];
    const double exact = (1.0 / 6.0) * (2.0 / 3.0);
    if (std::fabs(got - exact) > 1e-13) pass = false;
    detail << ", degree-7 " << fmt(std::fabs(got - exact));
  }

  // (e) Simulated bounce counts match the closed-form count on a grid.
  {
    const UncertaintyProblem p = bouncing_ball_problem(kBall);
    bool counts_ok = true;
    for (int i = 0; i < 25; ++i) {
      const double alpha = 0.84 + (1.0 - 0.84) * (i + 0.5) / 25.0;
      const IntegrateResult sim = p.simulate({alpha});
      int bounces = 0;
      for (const auto& e : sim.events)
        if (e.event_index == 0) ++bounces;
      if (bounces != bounce_count(alpha, kBall)) counts_ok = false;
    }
    if (!counts_ok) pass = false;
    detail << ", bounce counts " << (counts_ok ? "ok" : "MISMATCH");
  }

  // (f) MC error decays like n^{-1/2} over seeds.
  {
    UncertaintyProblem p;
    DirectMap d;
    d.run = [](const Vec& x, const Vec&) { return std::make_pair(x, 0.0); };
    p.map.system = d;
    p.fixed_state = {0.0};
    p.uncertain = {{CoordKind::State, 0, Uniform(0.0, 1.0)}};
    const Observable gid = Observable::scalar([](const Vec& y, double) { return y[0]; });
    const auto rms = [&](std::size_t n) {
      double acc = 0.0;
      for (std::uint64_t s = 1; s <= 32; ++s) {
        const double e = mc_expectation(p, gid, n, s).estimate[0] - 0.5;
        acc += e * e;
      }
      return std::sqrt(acc / 32.0);
    };
    const double slope = std::log(rms(16384) / rms(256)) / std::log(64.0);
    if (std::fabs(slope + 0.5) > 0.15) pass = false;
    detail << ", MC slope " << fmt(slope);
  }

  // (g) Bitwise determinism of quadrature and MC across worker counts.
  {
    const UncertaintyProblem p = bouncing_ball_problem(kBall);
    const Observable obj = bouncing_ball_objective(kBall);
    setenv("KOOPMAN_UQ_THREADS", "1", 1);
    const Vec q1 = koopman_expectation(p, obj, 1e-4, 1e-6).value;
    const Vec m1 = mc_expectation(p, obj, 400, 5).estimate;
    setenv("KOOPMAN_UQ_THREADS", "4", 1);
    const Vec q4 = koopman_expectation(p, obj, 1e-4, 1e-6).value;
    const Vec m4 = mc_expectation(p, obj, 400, 5).estimate;
    unsetenv("KOOPMAN_UQ_THREADS");
    const bool det = q1[0] == q4[0] && m1[0] == m4[0];
    if (!det) pass = false;
    detail << ", determinism " << (det ? "bitwise" : "MISMATCH");
  }

  report(7, "method property suite", pass, detail.str());
}

void criterion8() {
  // Process noise through the truncated KL parameterization: y' = Wdot,
  // K = 4 coefficients, so E[y(T)] = 0 and E[y(T)^2] equals the closed
  // truncated variance. The 4-D error estimator is conservative enough that
  // the quadrature rarely certifies convergence inside the budget, so the
  // gate is on the achieved values, not the converged flag.
  ScenarioConfig cfg;
  cfg.scenario = "brownian";
  const Scenario s = make_scenario(cfg);

  Observable g2;
  g2.dim_out = 2;
  g2.labels = {"y", "y^2"};
  g2.eval = [](const Vec& y, double) { return Vec{y[0], y[0] * y[0]}; };

  const double var = kl_truncated_variance(4, 1.0);
  const ExpectationResult r = koopman_expectation(s.problem, g2, 1e-5, 1e-6, 1'000'000);
  const double mean_abs = std::fabs(r.value[0]);
  const double var_rel = std::fabs(r.value[1] - var) / var;

  // Zero-diffusion reduction: with psi = 0 the forced solve is bitwise equal
  // to the unforced one.
  UncertaintyProblem base;
  OdeSystem ode;
  ode.dim = 1;
  ode.drift = [](double, const Vec& y, const Vec&, Vec& dy) { dy[0] = -y[0]; };
  base.map.system = ode;
  base.map.t_max = 1.0;
  base.fixed_state = {1.0};
  base.uncertain = {{CoordKind::State, 0, Uniform(0.5, 1.5)}};
  const UncertaintyProblem frozen = noisy_problem(
      base, KLNoise{1.0, 4}, [](double, const Vec&, const Vec&) { return Vec{0.0}; });
  const bool reduction = frozen.simulate({1.1, 0.4, -0.8, 1.6, 0.2}).state[0] ==
                         base.simulate({1.1}).state[0];

  const bool pass = mean_abs <= 1e-6 && var_rel <= 1e-6 && reduction;
  report(8, "process noise via KL coordinates", pass,
         "|E[y]| " + fmt(mean_abs) + ", E[y^2] rel err " + fmt(var_rel) + " vs " +
             fmt(var) + " (" + std::to_string(r.evals) + " sims, converged flag " +
             (r.converged ? "true" : "false") + "), zero-noise reduction " +
             (reduction ? "bitwise" : "MISMATCH"));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  return g_failures == 0 ? 0 : 1;
}
