#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "koopuq/quad.hpp"

using namespace koopuq;

namespace {

Integrand scalar(std::function<double(const Vec&)> f) {
  return [f = std::move(f)](const Vec& x) { return Vec{f(x)}; };
}

}  // namespace

TEST_SUITE("quad") {

TEST_CASE("1-D rule is exact on polynomials through degree 7") {
  // int_{-1}^{2} x^k dx = (2^{k+1} - (-1)^{k+1}) / (k+1)
  for (int k = 0; k <= 7; ++k) {
    const QuadResult r = integrate_1d(
        scalar([k](const Vec& x) { return std::pow(x[0], k); }), -1.0, 2.0);
    const double exact = (std::pow(2.0, k + 1) - std::pow(-1.0, k + 1)) / (k + 1);
    CHECK(r.converged);
    CHECK(std::fabs(r.value[0] - exact) <= 1e-13 * std::max(1.0, std::fabs(exact)));
  }
}

TEST_CASE("1-D adaptive: smooth and kinked integrands") {
  QuadOptions opt;
  opt.rtol = 1e-12;
  opt.atol = 1e-14;

  SUBCASE("exp(x) on [0, 1]") {
    const QuadResult r = integrate_1d(scalar([](const Vec& x) { return std::exp(x[0]); }),
                                      0.0, 1.0, opt);
    CHECK(r.converged);
    CHECK(r.value[0] == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
  }
  SUBCASE("|x - 1/3| on [0, 1] = 5/18") {
    const QuadResult r = integrate_1d(
        scalar([](const Vec& x) { return std::fabs(x[0] - 1.0 / 3.0); }), 0.0, 1.0, opt);
    CHECK(r.converged);
    CHECK(r.value[0] == doctest::Approx(5.0 / 18.0).epsilon(1e-11));
  }
  SUBCASE("narrow gaussian needs refinement, still converges") {
    const double s = 0.05;
    const QuadResult r = integrate_1d(
        scalar([s](const Vec& x) {
          const double u = (x[0] - 0.37) / s;
          return std::exp(-0.5 * u * u);
        }),
        0.0, 1.0, opt);
    CHECK(r.converged);
    CHECK(r.value[0] ==
          doctest::Approx(s * std::sqrt(2.0 * std::acos(-1.0))).epsilon(1e-10));
    CHECK(r.evals > 15);  // forced at least one split
  }
}

TEST_CASE("n-D rule is exact on degree-7 monomial products") {
  const SupportBox box({0.0, -1.0, 0.5}, {1.0, 1.0, 2.0});
  // x^3 y^2 z^2 has total degree 7.
  const QuadResult r = integrate_nd(
      scalar([](const Vec& x) { return x[0] * x[0] * x[0] * x[1] * x[1] * x[2] * x[2]; }),
      box);
  const double exact = (1.0 / 4.0) * (2.0 / 3.0) * ((8.0 - 0.125) / 3.0);
  CHECK(r.converged);
  CHECK(std::fabs(r.value[0] - exact) <= 1e-13 * std::fabs(exact));
}

TEST_CASE("n-D adaptive: separable products match 1-D answers") {
  QuadOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;

  SUBCASE("2-D exp(x+y)") {
    const SupportBox box({0.0, 0.0}, {1.0, 2.0});
    const QuadResult r = integrate_nd(
        scalar([](const Vec& x) { return std::exp(x[0] + x[1]); }), box, opt);
    const double exact = (std::exp(1.0) - 1.0) * (std::exp(2.0) - 1.0);
    CHECK(r.converged);
    CHECK(r.value[0] == doctest::Approx(exact).epsilon(1e-10));
  }
  SUBCASE("3-D sin(x) cos(y) e^z") {
    const SupportBox box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    const QuadResult r = integrate_nd(
        scalar([](const Vec& x) { return std::sin(x[0]) * std::cos(x[1]) * std::exp(x[2]); }),
        box, opt);
    const double exact = (1.0 - std::cos(1.0)) * std::sin(1.0) * (std::exp(1.0) - 1.0);
    CHECK(r.converged);
    CHECK(r.value[0] == doctest::Approx(exact).epsilon(1e-10));
  }
}

TEST_CASE("vector integrand: per-component convergence, one eval per node") {
  QuadOptions opt;
  opt.rtol = 1e-9;
  opt.atol = 1e-12;
  std::size_t calls = 0;
  const Integrand f = [&calls](const Vec& x) {
    ++calls;
    return Vec{x[0], x[0] * x[0], std::exp(x[0])};
  };
  const QuadResult r = integrate_1d(f, 0.0, 1.0, opt);
  CHECK(r.converged);
  REQUIRE(r.value.size() == 3);
  CHECK(r.value[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.value[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.value[2] == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
  CHECK(calls == r.evals);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(r.error[j] <= std::max(opt.atol, opt.rtol * std::fabs(r.value[j])));
}

TEST_CASE("budget exhaustion reports converged = false, value still usable") {
  QuadOptions opt;
  opt.rtol = 1e-14;
  opt.atol = 1e-16;
  opt.max_evals = 200;
  const QuadResult r = integrate_1d(
      scalar([](const Vec& x) { return std::fabs(std::sin(40.0 * x[0])); }), 0.0, 1.0, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.evals <= 200 + 2 * 15);  // may finish the in-flight panels
  CHECK(std::isfinite(r.value[0]));
}

TEST_CASE("results are bitwise identical across worker counts") {
  const SupportBox box({0.0, 0.0}, {1.0, 1.0});
  const Integrand f = scalar([](const Vec& x) {
    return std::exp(-3.0 * x[0]) * std::cos(7.0 * x[1]) + std::sqrt(x[0] + x[1]);
  });
  QuadOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;

  Vec baseline;
  {
    testutil::ScopedEnv env("KOOPMAN_UQ_THREADS", "1");
    baseline = integrate_nd(f, box, opt).value;
  }
  for (const char* nthreads : {"2", "4"}) {
    testutil::ScopedEnv env("KOOPMAN_UQ_THREADS", nthreads);
    const QuadResult r = integrate_nd(f, box, opt);
    REQUIRE(r.value.size() == baseline.size());
    for (std::size_t j = 0; j < baseline.size(); ++j) CHECK(r.value[j] == baseline[j]);
  }
}

TEST_CASE("batch_eval preserves point order and rethrows with coordinates") {
  std::vector<Vec> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({static_cast<double>(i)});
  const auto out = batch_eval([](const Vec& x) { return Vec{2.0 * x[0]}; }, pts);
  REQUIRE(out.size() == 100);
  for (int i = 0; i < 100; ++i) CHECK(out[i][0] == 2.0 * i);

  CHECK_THROWS_AS(batch_eval(
                      [](const Vec& x) -> Vec {
                        if (x[0] == 41.0) throw std::runtime_error("boom");
                        return {x[0]};
                      },
                      pts),
                  std::runtime_error);
}

TEST_CASE("invalid requests are rejected") {
  const Integrand one = scalar([](const Vec&) { return 1.0; });
  CHECK_THROWS_AS((void)integrate_1d(one, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)integrate_1d(one, 2.0, 1.0), std::invalid_argument);
  SupportBox big;
  big.lo.assign(11, 0.0);
  big.hi.assign(11, 1.0);
  CHECK_THROWS_AS((void)integrate_nd(one, big), std::invalid_argument);
}

}  // TEST_SUITE
