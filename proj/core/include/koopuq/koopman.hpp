#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "koopuq/dynsys.hpp"
#include "koopuq/prob.hpp"
#include "koopuq/quad.hpp"
#include "koopuq/types.hpp"

namespace koopuq {

/// Function of the terminal state (and terminal time), scalar- or
/// vector-valued. Must be pure.
struct Observable {
  std::function<Vec(const Vec& terminal_state, double terminal_time)> eval;
  std::size_t dim_out = 1;
  std::vector<std::string> labels;

  static Observable scalar(std::function<double(const Vec&, double)> f,
                           std::string label = "g") {
    Observable g;
    g.eval = [f = std::move(f)](const Vec& y, double t) { return Vec{f(y, t)}; };
    g.dim_out = 1;
    g.labels = {std::move(label)};
    return g;
  }
};

enum class CoordKind { State, Parameter };

/// One uncertain coordinate: which slot of the initial state / parameter
/// vector it overwrites, and its 1-D density.
struct UncertainCoord {
  CoordKind kind;
  std::size_t index;
  Marginal density;
};

/// Binding of a system map to its uncertain coordinates. The joint density
/// is the independent product of the marginals; the integration domain is
/// the product support box. Parameter uncertainty is handled by coordinate
/// substitution rather than augmenting the state with null dynamics.
struct UncertaintyProblem {
  SystemMap map;
  std::vector<UncertainCoord> uncertain;
  Vec fixed_state;
  Vec fixed_params;

  ProductDensity joint_density() const;
  SupportBox domain() const;

  /// Substitutes the uncertain coordinates of `x` and runs the map.
  IntegrateResult simulate(const Vec& x) const;
};

struct ExpectationResult {
  Vec value;
  Vec error;
  std::size_t evals = 0;  // number of system-map simulations
  double wall_time = 0.0;
  bool converged = false;
};

/// The Koopman action: x in the uncertain space -> g(S(x)). Exact
/// composition; the only error lives in the chosen representation of S.
std::function<Vec(const Vec&)> koopman_apply(const UncertaintyProblem& p,
                                             const Observable& g);

/// E[g o S] under the initial density, by adaptive quadrature of
/// g(S(x)) f0(x) over the product support. One simulation per node even for
/// vector-valued g.
ExpectationResult koopman_expectation(const UncertaintyProblem& p, const Observable& g,
                                      double rtol, double atol,
                                      std::size_t max_evals = 1'000'000);

/// Central moments 2..n of a scalar observable from one vector-valued
/// expectation of [g, g^2, ..., g^n]; extended-precision recombination.
struct CentralMoments {
  double mean = 0.0;
  Vec moments;  // moments[k] = m-hat_{k+2}
  Vec raw;      // raw[k] = E[g^{k+1}]
  Vec raw_error;
  std::size_t evals = 0;
  bool converged = false;
};

CentralMoments central_moments(const UncertaintyProblem& p, const Observable& g,
                               int n, double rtol, double atol,
                               std::size_t max_evals = 1'000'000);

double covariance(const UncertaintyProblem& p, const Observable& g1,
                  const Observable& g2, double rtol, double atol);

double correlation(const UncertaintyProblem& p, const Observable& g1,
                   const Observable& g2, double rtol, double atol);

/// 1-D density push-forward through a strictly monotone map with an
/// analytic inverse; the test oracle for the adjoint identity.
class FpPushforward1D {
 public:
  FpPushforward1D(std::function<double(double)> forward,
                  std::function<double(double)> inverse,
                  std::function<double(double)> inverse_deriv,
                  Marginal base);

  double pdf(double x) const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  std::function<double(double)> inverse_, inverse_deriv_;
  Marginal base_;
  double lo_, hi_;
};

/// Observable sets of the moment/covariance/correlation decompositions,
/// as monomial exponent pairs (e1, e2) on (z1, z2).
enum class StatKind { CentralMoment, Covariance, Correlation };

struct Monomial {
  int e1 = 0;
  int e2 = 0;
  std::string label;
};

std::vector<Monomial> mean_observable_decomposition(StatKind stat, int n = 2);

}  // namespace koopuq
