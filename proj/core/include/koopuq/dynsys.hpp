#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "koopuq/types.hpp"

namespace koopuq {

/// Right-hand side of an ODE: (t, y, p) -> dy/dt. Must be pure.
using DriftFn = std::function<void(double t, const Vec& y, const Vec& p, Vec& dydt)>;

struct OdeSystem {
  DriftFn drift;
  std::size_t dim = 0;
};

/// Zero-crossing trigger. `direction` restricts the accepted crossing sign:
/// -1 requires the condition to go positive -> negative, +1 the reverse,
/// 0 accepts both.
struct Event {
  std::function<double(double t, const Vec& y, const Vec& p)> condition;
  std::function<Vec(double t, const Vec& y, const Vec& p)> effect;  // null = identity
  bool terminal = false;
  int direction = 0;
};

/// One step's worth of discrete iteration, x -> f(x).
struct DiscreteMap {
  std::function<Vec(const Vec& x, const Vec& p)> step;
  std::size_t n_iterations = 0;
};

/// Arbitrary terminal-state map (used for averaged noisy maps).
struct DirectMap {
  std::function<std::pair<Vec, double>(const Vec& x, const Vec& p)> run;
};

struct EventRecord {
  double time;
  std::size_t event_index;
};

struct IntegrateResult {
  Vec state;
  double time = 0.0;
  std::vector<EventRecord> events;
  std::size_t n_steps = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<EventRecord> events;
};

/// A system map S: initial point -> terminal state. Integration runs until
/// the first terminal event or t_max.
struct SystemMap {
  std::variant<OdeSystem, DiscreteMap, DirectMap> system;
  std::vector<Event> events;
  double t0 = 0.0;
  double t_max = 0.0;
  double rtol = 1e-8;
  double atol = 1e-12;

  IntegrateResult run(const Vec& x0, const Vec& p) const;
};

struct IntegrateOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  /// Event time localization tolerance as a fraction of (t_max - t0).
  double event_tol_t_rel = 1e-10;
  /// An event stays disarmed after firing until |condition| exceeds this.
  double event_deadband = 1e-9;
  std::size_t max_steps = 1'000'000;
  /// When set, the dense solution is sampled into the trajectory.
  Trajectory* trace = nullptr;
};

/// Adaptive Dormand-Prince 5(4) with PI step control, quartic dense output,
/// and event localization on the step interpolant.
IntegrateResult integrate(const OdeSystem& sys, const std::vector<Event>& events,
                          const Vec& x0, const Vec& p, double t0, double t_max,
                          const IntegrateOptions& opt = {});

/// Convenience overload pulling tolerances from the map.
IntegrateResult integrate(const SystemMap& m, const Vec& x0, const Vec& p);

/// n-fold composition of a discrete map; n = 0 returns x0.
Vec iterate_discrete(const std::function<Vec(const Vec&)>& map, const Vec& x0,
                     std::size_t n);

/// Bracketing root finder (Illinois) for a scalar function of time.
/// Returns nullopt when [ta, tb] does not bracket a sign change.
std::optional<double> locate_event(const std::function<double(double)>& condition,
                                   double ta, double tb, double tol_t,
                                   std::size_t max_iter = 200);

}  // namespace koopuq
