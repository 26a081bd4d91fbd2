#include "koopuq/scenarios.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace koopuq {

namespace {

// Flight-time scale between bounces: a full arc launched at sqrt(2 g z0)
// lasts alpha^k * B with B = sqrt(8 z0 / g).
double arc_time(const BouncingBallParams& p) { return std::sqrt(8.0 * p.z0 / p.g_accel); }

// Launch speed off the ground from the initial drop height.
double launch_speed(const BouncingBallParams& p) { return std::sqrt(2.0 * p.g_accel * p.z0); }

void require_analytic_form(const BouncingBallParams& p) {
  if (p.zdot0 != 0.0)
    throw std::invalid_argument("bouncing ball analytics require zdot0 == 0");
}

}  // namespace

void BouncingBallParams::validate() const {
  if (!(target_x > 0.0)) throw std::invalid_argument("bouncing ball: wall distance must be > 0");
  if (!(xdot0 > 0.0)) throw std::invalid_argument("bouncing ball: xdot0 must be > 0");
  if (!(z0 > 0.0)) throw std::invalid_argument("bouncing ball: z0 must be > 0");
  if (!(g_accel > 0.0)) throw std::invalid_argument("bouncing ball: g must be > 0");
}

double bounce_count_real(double alpha, const BouncingBallParams& p) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("bounce_count: alpha must be in (0, 1]");
  p.validate();
  require_analytic_form(p);
  const double K = p.horizon() / arc_time(p) + 0.5;
  if (alpha == 1.0) return K;
  const double inner = 1.0 - (1.0 - alpha) * K;
  if (inner <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(inner) / std::log(alpha);
}

int bounce_count(double alpha, const BouncingBallParams& p) {
  const double b = bounce_count_real(alpha, p);
  if (!std::isfinite(b)) throw std::domain_error("bounce_count: ball settles before the wall");
  return static_cast<int>(std::floor(b));
}

double impact_height(double alpha, const BouncingBallParams& p) {
  const double b = bounce_count_real(alpha, p);
  if (!std::isfinite(b)) return 0.0;  // settled on the ground before the wall
  const int n = static_cast<int>(std::floor(b));
  const double B = arc_time(p);
  const double A = launch_speed(p);
  const double T = p.horizon();
  // Time of the n-th ground impact: half an arc for the initial drop, then
  // full arcs scaled by alpha^k.
  double geom = 0.0;  // 1 + alpha + ... + alpha^{n-1}
  double pw = 1.0;
  for (int k = 0; k < n; ++k, pw *= alpha) geom += pw;
  const double t_n = B * (geom - 0.5);
  const double t_r = T - t_n;
  const double zr = std::pow(alpha, n) * A;
  return zr * t_r - 0.5 * p.g_accel * t_r * t_r;
}

double impact_height_cubic(double alpha, const BouncingBallParams& p) {
  p.validate();
  require_analytic_form(p);
  const double B = arc_time(p);
  const double A = launch_speed(p);
  const double C = p.horizon() - 0.5 * B;
  const double a3 = -A * B;
  const double a2 = A * C - A * B;
  const double a1 = 2.0 * A * C;
  const double a0 = -0.5 * p.g_accel * C * C;
  return ((a3 * alpha + a2) * alpha + a1) * alpha + a0;
}

double two_bounce_threshold(const BouncingBallParams& p) {
  p.validate();
  require_analytic_form(p);
  const double K = p.horizon() / arc_time(p) + 0.5;
  if (K < 2.0 || K >= 3.0)
    throw std::domain_error("two_bounce_threshold: parameters do not admit a two-bounce range");
  // b(alpha) = 3 reduces to alpha^2 + alpha + 1 = K after factoring out the
  // alpha = 1 root.
  return 0.5 * (std::sqrt(4.0 * K - 3.0) - 1.0);
}

double analytic_expectation(const BouncingBallParams& p) {
  const double threshold = two_bounce_threshold(p);
  const double lo = p.alpha_density.lo();
  const double hi = p.alpha_density.hi();
  if (!(lo > threshold) || hi > 1.0)
    throw std::domain_error("analytic_expectation: density support leaves the two-bounce range");

  const double B = arc_time(p);
  const double A = launch_speed(p);
  const double C = p.horizon() - 0.5 * B;
  // (H(alpha) - z*)^2 as a degree-6 polynomial: square the cubic by
  // convolution in extended precision.
  const long double c[4] = {-0.5L * p.g_accel * C * C - p.target_z, 2.0L * A * C,
                            static_cast<long double>(A) * C - static_cast<long double>(A) * B,
                            -static_cast<long double>(A) * B};
  long double a[7] = {};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i + j] += c[i] * c[j];

  long double e = a[0];
  for (int k = 1; k <= 6; ++k) e += a[k] * static_cast<long double>(p.alpha_density.raw_moment(k));
  return static_cast<double>(e);
}

UncertaintyProblem bouncing_ball_problem(const BouncingBallParams& p) {
  p.validate();
  const double g = p.g_accel;
  const double wall_x = p.x0 + p.target_x;

  OdeSystem ode;
  ode.dim = 4;  // [x, z, xdot, zdot]
  ode.drift = [g](double, const Vec& y, const Vec&, Vec& dydt) {
    dydt[0] = y[2];
    dydt[1] = y[3];
    dydt[2] = 0.0;
    // Settled on the ground: no residual gravity, the ball slides.
    dydt[3] = (y[1] < 1e-9 && std::fabs(y[3]) < 1e-6) ? 0.0 : -g;
  };

  Event ground;
  ground.condition = [](double, const Vec& y, const Vec&) { return y[1]; };
  ground.direction = -1;
  ground.effect = [](double, const Vec& y, const Vec& p) {
    Vec out = y;
    const double rebound = -p[0] * y[3];
    if (std::fabs(rebound) < 1e-6) {  // Zeno tail: settle the ball
      out[1] = 0.0;
      out[3] = 0.0;
    } else {
      out[3] = rebound;
    }
    return out;
  };

  Event wall;
  wall.condition = [wall_x](double, const Vec& y, const Vec&) { return y[0] - wall_x; };
  wall.direction = +1;
  wall.terminal = true;

  UncertaintyProblem prob;
  prob.map.system = std::move(ode);
  prob.map.events = {std::move(ground), std::move(wall)};
  prob.map.t0 = 0.0;
  prob.map.t_max = 1.5 * p.horizon() + 1.0;
  prob.fixed_state = {p.x0, p.z0, p.xdot0, p.zdot0};
  prob.fixed_params = {p.alpha_density.mu()};
  prob.uncertain = {{CoordKind::Parameter, 0, p.alpha_density}};
  return prob;
}

Observable bouncing_ball_objective(const BouncingBallParams& p) {
  const double zt = p.target_z;
  return Observable::scalar(
      [zt](const Vec& y, double) {
        const double miss = y[1] - zt;
        return miss * miss;
      },
      "squared_miss");
}

OptProblem bouncing_ball_opt_problem(const BouncingBallParams& base, const Vec& lower,
                                     const Vec& upper, const Vec& initial,
                                     double ftol_rel) {
  if (lower.size() != 3 || upper.size() != 3 || initial.size() != 3)
    throw std::invalid_argument("bouncing_ball_opt_problem: u = (x0, xdot0, z0)");
  OptProblem opt;
  opt.decisions = {{"x0", lower[0], upper[0], initial[0]},
                   {"xdot0", lower[1], upper[1], initial[1]},
                   {"z0", lower[2], upper[2], initial[2]}};
  opt.bind = [base](const Vec& u) {
    BouncingBallParams p = base;
    p.x0 = u[0];
    p.xdot0 = u[1];
    p.z0 = u[2];
    return bouncing_ball_problem(p);
  };
  opt.objective = bouncing_ball_objective(base);
  opt.ftol_rel = ftol_rel;
  return opt;
}

// ---------------------------------------------------------------------------
// Config

ScenarioConfig ScenarioConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  ScenarioConfig cfg;
  for (const auto& [key, val] : j.items()) {
    if (key == "scenario") {
      cfg.scenario = val.get<std::string>();
    } else if (key == "params") {
      if (!val.is_object()) throw std::invalid_argument("config: params must be an object");
      for (const auto& [pk, pv] : val.items()) {
        if (!pv.is_number()) throw std::invalid_argument("config: params." + pk + " must be numeric");
        cfg.overrides[pk] = pv.get<double>();
      }
    } else if (key == "rtol") {
      cfg.rtol = val.get<double>();
    } else if (key == "atol") {
      cfg.atol = val.get<double>();
    } else if (key == "max_evals") {
      cfg.max_evals = val.get<std::size_t>();
    } else if (key == "n") {
      cfg.n = val.get<std::size_t>();
    } else if (key == "seed") {
      cfg.seed = val.get<std::uint64_t>();
    } else if (key == "csv_path") {
      cfg.csv_path = val.get<std::string>();
    } else {
      throw std::invalid_argument("config: unknown key \"" + key + "\"");
    }
  }
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0))
    throw std::invalid_argument("config: tolerances must be > 0");
  return cfg;
}

std::string ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["params"] = nlohmann::json::object();
  for (const auto& [k, v] : overrides) j["params"][k] = v;
  j["rtol"] = rtol;
  j["atol"] = atol;
  j["max_evals"] = max_evals;
  j["n"] = n;
  j["seed"] = seed;
  j["csv_path"] = csv_path;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Registry

namespace {

double take(std::map<std::string, double>& ov, const std::string& key, double dflt) {
  const auto it = ov.find(key);
  if (it == ov.end()) return dflt;
  const double v = it->second;
  ov.erase(it);
  return v;
}

void reject_leftovers(const std::map<std::string, double>& ov, const std::string& scenario) {
  if (!ov.empty())
    throw std::invalid_argument("config: unknown parameter \"" + ov.begin()->first +
                                "\" for scenario " + scenario);
}

Scenario make_bouncing_ball(ScenarioConfig cfg) {
  const BouncingBallParams p = bouncing_ball_params(cfg);
  Scenario s;
  s.name = "bouncing_ball";
  s.problem = bouncing_ball_problem(p);
  s.objective = bouncing_ball_objective(p);
  try {
    s.analytic = analytic_expectation(p);
  } catch (const std::domain_error&) {
    // Overridden parameters may leave the closed-form range; the scenario is
    // still simulable, it just has no oracle.
  }
  return s;
}

Scenario make_exp_decay(ScenarioConfig cfg) {
  auto& ov = cfg.overrides;
  const double y0 = take(ov, "y0", 1.0);
  const double lam_lo = take(ov, "lambda_lo", 0.1);
  const double lam_hi = take(ov, "lambda_hi", 2.0);
  const double T = take(ov, "horizon", 1.0);
  reject_leftovers(ov, "exp_decay");
  if (!(lam_lo < lam_hi)) throw std::invalid_argument("exp_decay: lambda_lo must be < lambda_hi");
  if (!(T > 0.0)) throw std::invalid_argument("exp_decay: horizon must be > 0");

  OdeSystem ode;
  ode.dim = 1;
  ode.drift = [](double, const Vec& y, const Vec& p, Vec& dydt) { dydt[0] = -p[0] * y[0]; };

  Scenario s;
  s.name = "exp_decay";
  s.problem.map.system = std::move(ode);
  s.problem.map.t0 = 0.0;
  s.problem.map.t_max = T;
  s.problem.fixed_state = {y0};
  s.problem.fixed_params = {lam_lo};
  s.problem.uncertain = {{CoordKind::Parameter, 0, Uniform(lam_lo, lam_hi)}};
  s.objective = Observable::scalar([](const Vec& y, double) { return y[0]; }, "y");
  s.analytic = y0 * (std::exp(-lam_lo * T) - std::exp(-lam_hi * T)) / ((lam_hi - lam_lo) * T);
  return s;
}

Scenario make_brownian(ScenarioConfig cfg) {
  auto& ov = cfg.overrides;
  const double T = take(ov, "horizon", 1.0);
  const auto order = static_cast<std::size_t>(take(ov, "kl_order", 4.0));
  reject_leftovers(ov, "brownian");
  if (!(T > 0.0)) throw std::invalid_argument("brownian: horizon must be > 0");
  if (order < 1) throw std::invalid_argument("brownian: kl_order must be >= 1");

  OdeSystem ode;
  ode.dim = 1;
  ode.drift = [](double, const Vec&, const Vec&, Vec& dydt) { dydt[0] = 0.0; };

  UncertaintyProblem base;
  base.map.system = std::move(ode);
  base.map.t0 = 0.0;
  base.map.t_max = T;
  base.fixed_state = {0.0};

  Scenario s;
  s.name = "brownian";
  s.problem = noisy_problem(base, KLNoise{T, order},
                            [](double, const Vec&, const Vec&) { return Vec{1.0}; });
  s.objective = Observable::scalar([](const Vec& y, double) { return y[0]; }, "y");
  s.analytic = 0.0;
  return s;
}

}  // namespace

std::vector<std::string> scenario_names() { return {"bouncing_ball", "exp_decay", "brownian"}; }

BouncingBallParams bouncing_ball_params(const ScenarioConfig& cfg) {
  auto ov = cfg.overrides;
  BouncingBallParams p;
  p.x0 = take(ov, "x0", p.x0);
  p.xdot0 = take(ov, "xdot0", p.xdot0);
  p.z0 = take(ov, "z0", p.z0);
  p.zdot0 = take(ov, "zdot0", p.zdot0);
  p.g_accel = take(ov, "g_accel", p.g_accel);
  p.target_x = take(ov, "target_x", p.target_x);
  p.target_z = take(ov, "target_z", p.target_z);
  const double mu = take(ov, "alpha_mu", p.alpha_density.mu());
  const double sigma = take(ov, "alpha_sigma", p.alpha_density.sigma());
  const double lo = take(ov, "alpha_lo", p.alpha_density.lo());
  const double hi = take(ov, "alpha_hi", p.alpha_density.hi());
  reject_leftovers(ov, "bouncing_ball");
  p.alpha_density = TruncatedNormal(mu, sigma, lo, hi);
  p.validate();
  return p;
}

Scenario make_scenario(const ScenarioConfig& cfg) {
  if (cfg.scenario == "bouncing_ball") return make_bouncing_ball(cfg);
  if (cfg.scenario == "exp_decay") return make_exp_decay(cfg);
  if (cfg.scenario == "brownian") return make_brownian(cfg);
  throw std::invalid_argument("unknown scenario \"" + cfg.scenario + "\"");
}

}  // namespace koopuq
