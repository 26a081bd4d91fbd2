#include "koopuq/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "koopuq/parallel.hpp"

namespace koopuq {

namespace {

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  // SplitMix64 finalizer over (seed, index).
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

MCResult mc_expectation(const UncertaintyProblem& p, const Observable& g,
                        std::size_t n, std::uint64_t seed,
                        const std::vector<std::size_t>& checkpoints) {
  if (n < 2) throw std::invalid_argument("mc_expectation: n must be >= 2");
  const std::size_t m = g.dim_out;
  const ProductDensity density = p.joint_density();

  std::vector<double> values(n * m);
  std::vector<unsigned char> failed(n, 0);

  const auto start = std::chrono::steady_clock::now();
  parallel_for(n, [&](std::size_t i) {
    Rng rng(substream_seed(seed, i));
    const Vec x = density.sample(rng);
    try {
      const IntegrateResult sim = p.simulate(x);
      const Vec v = g.eval(sim.state, sim.time);
      for (std::size_t j = 0; j < m; ++j) values[i * m + j] = v[j];
    } catch (...) {
      failed[i] = 1;
    }
  });
  const auto stop = std::chrono::steady_clock::now();

  MCResult res;
  res.n = n;
  res.seed = seed;
  res.wall_time = std::chrono::duration<double>(stop - start).count();

  std::vector<std::size_t> cps = checkpoints;
  std::sort(cps.begin(), cps.end());
  std::size_t next_cp = 0;

  // Index-order reduction; identical for any worker count.
  Vec sum(m, 0.0), sumsq(m, 0.0);
  std::size_t good = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      ++res.failures;
    } else {
      ++good;
      for (std::size_t j = 0; j < m; ++j) {
        sum[j] += values[i * m + j];
        sumsq[j] += values[i * m + j] * values[i * m + j];
      }
    }
    while (next_cp < cps.size() && i + 1 == cps[next_cp]) {
      MCResult::Checkpoint cp{i + 1, Vec(m, 0.0), Vec(m, 0.0)};
      for (std::size_t j = 0; j < m; ++j) {
        if (good == 0) continue;
        const double gd = static_cast<double>(good);
        cp.estimate[j] = sum[j] / gd;
        if (good > 1) {
          const double var =
              std::max(0.0, (sumsq[j] - gd * cp.estimate[j] * cp.estimate[j]) / (gd - 1.0));
          cp.std_error[j] = std::sqrt(var / gd);
        }
      }
      res.convergence.push_back(std::move(cp));
      ++next_cp;
    }
  }
  if (good == 0) throw std::runtime_error("mc_expectation: every simulation failed");

  res.estimate.resize(m);
  for (std::size_t j = 0; j < m; ++j) res.estimate[j] = sum[j] / static_cast<double>(good);

  Vec ss(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) continue;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = values[i * m + j] - res.estimate[j];
      ss[j] += d * d;
    }
  }
  res.std_error.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double var = good > 1 ? ss[j] / static_cast<double>(good - 1) : 0.0;
    res.std_error[j] = std::sqrt(var / static_cast<double>(good));
  }
  res.valid = res.failures * 100 <= n;  // > 1% failures invalidates the run
  return res;
}

ComparisonReport compare(const UncertaintyProblem& p, const Observable& g,
                         double rtol, double atol, std::size_t mc_n,
                         std::uint64_t seed) {
  ComparisonReport rep;
  rep.koopman = koopman_expectation(p, g, rtol, atol);
  rep.mc = mc_expectation(p, g, mc_n, seed);
  rep.speedup = rep.koopman.wall_time > 0.0 ? rep.mc.wall_time / rep.koopman.wall_time : 0.0;
  for (double e : rep.koopman.error)
    rep.koopman_error_bound = std::max(rep.koopman_error_bound, e);
  for (double se : rep.mc.std_error)
    rep.mc_error_bound = std::max(rep.mc_error_bound, 4.0 * se);
  return rep;
}

}  // namespace koopuq
