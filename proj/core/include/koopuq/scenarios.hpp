#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "koopuq/koopman.hpp"
#include "koopuq/noise.hpp"
#include "koopuq/optuu.hpp"
#include "koopuq/prob.hpp"
#include "koopuq/types.hpp"

namespace koopuq {

/// Ball launched horizontally toward a wall at horizontal distance target_x
/// from the launch point; bounces on the ground with a random restitution
/// coefficient; the quantity of interest is the squared miss distance
/// (z - target_z)^2 at wall impact.
struct BouncingBallParams {
  double x0 = 2.0;         // m
  double xdot0 = 2.0;      // m/s
  double z0 = 50.0;        // m
  double zdot0 = 0.0;      // m/s
  double g_accel = 9.807;  // m/s^2
  double target_x = 25.0;  // m, wall distance from launch
  double target_z = 25.0;  // m, desired impact height
  TruncatedNormal alpha_density{0.9, 0.02, 0.84, 1.0};

  /// Horizontal flight time to the wall (xdot is constant).
  double horizon() const { return target_x / xdot0; }

  void validate() const;
};

/// Real-valued bounce index b(alpha): the ball completes floor(b) bounces
/// before hitting the wall. Returns +inf when the bounce times sum below the
/// horizon (the ball settles on the ground first).
double bounce_count_real(double alpha, const BouncingBallParams& p);

/// floor(b(alpha)); requires alpha in (0, 1].
int bounce_count(double alpha, const BouncingBallParams& p);

/// Impact height at the wall from the closed-form flight/bounce algebra
/// (any bounce count; 0 when the ball settles before the wall).
double impact_height(double alpha, const BouncingBallParams& p);

/// The expanded cubic form of H(alpha), valid only on the two-bounce range.
double impact_height_cubic(double alpha, const BouncingBallParams& p);

/// Restitution value at which the third bounce lands exactly at the wall
/// time: the lower edge of the two-bounce validity range.
double two_bounce_threshold(const BouncingBallParams& p);

/// E[(H(alpha) - target_z)^2] as a weighted sum of the first six raw moments
/// of the restitution density. Requires the density support to sit inside
/// the two-bounce range.
double analytic_expectation(const BouncingBallParams& p);

/// The uncertain-restitution simulation problem (state [x, z, xdot, zdot],
/// ground-bounce and terminal wall events).
UncertaintyProblem bouncing_ball_problem(const BouncingBallParams& p);

/// (z - target_z)^2 at the terminal state.
Observable bouncing_ball_objective(const BouncingBallParams& p);

/// Decision problem over u = (x0, xdot0, z0) with the given box.
OptProblem bouncing_ball_opt_problem(const BouncingBallParams& base,
                                     const Vec& lower, const Vec& upper,
                                     const Vec& initial, double ftol_rel = 1e-3);

/// Scenario / method settings parsed from flags or a JSON config file.
/// Unknown keys are rejected; defaults reproduce the headline benchmark.
struct ScenarioConfig {
  std::string scenario = "bouncing_ball";
  std::map<std::string, double> overrides;  // scenario-specific numeric keys
  double rtol = 1e-2;
  double atol = 1e-2;
  std::size_t max_evals = 1'000'000;
  std::size_t n = 100'000;  // MC sample count
  std::uint64_t seed = 1;
  std::string csv_path;  // optional series artifact

  /// Parses the JSON text of a config file. Throws std::invalid_argument on
  /// unknown keys or malformed values.
  static ScenarioConfig from_json(const std::string& text);
  std::string to_json() const;
};

/// A named, fully bound benchmark case.
struct Scenario {
  std::string name;
  UncertaintyProblem problem;
  Observable objective;
  std::optional<double> analytic;  // closed-form E[g o S] when available
};

std::vector<std::string> scenario_names();

/// Builds a registry scenario with the config's parameter overrides applied.
/// Throws std::invalid_argument for unknown scenarios or override keys.
Scenario make_scenario(const ScenarioConfig& cfg);

/// The bouncing-ball parameters after applying config overrides (used by the
/// optimize subcommand, which needs the raw parameter struct).
BouncingBallParams bouncing_ball_params(const ScenarioConfig& cfg);

}  // namespace koopuq
