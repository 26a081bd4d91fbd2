#pragma once

#include <cstdint>
#include <vector>

#include "koopuq/koopman.hpp"
#include "koopuq/types.hpp"

namespace koopuq {

struct MCResult {
  Vec estimate;
  Vec std_error;       // sample std-dev / sqrt(n), component-wise
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  std::size_t failures = 0;
  bool valid = true;  // false when failures exceed 1% of n
  struct Checkpoint {
    std::size_t n;
    Vec estimate;
    Vec std_error;
  };
  /// Prefix estimates at the requested sample counts.
  std::vector<Checkpoint> convergence;
};

/// Naive Monte Carlo baseline. Sample i draws from the substream
/// hash(seed, i), so the estimate is bitwise independent of worker count;
/// summation runs in index order over pre-assigned slots. Failed simulations
/// are excluded from the mean and counted.
MCResult mc_expectation(const UncertaintyProblem& p, const Observable& g,
                        std::size_t n, std::uint64_t seed,
                        const std::vector<std::size_t>& checkpoints = {});

struct ComparisonReport {
  ExpectationResult koopman;
  MCResult mc;
  double speedup = 0.0;            // mc.wall_time / koopman.wall_time
  double koopman_error_bound = 0.0;  // max component of the quadrature residual
  double mc_error_bound = 0.0;       // max component of 4 * std_error
};

/// Head-to-head run of the Koopman Expectation against the MC baseline.
ComparisonReport compare(const UncertaintyProblem& p, const Observable& g,
                         double rtol, double atol, std::size_t mc_n,
                         std::uint64_t seed);

}  // namespace koopuq
