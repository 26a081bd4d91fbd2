#include "koopuq/prob.hpp"

#include <cmath>
#include <stdexcept>

namespace koopuq {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
constexpr double kSqrt2 = 1.4142135623730950488016887;

// Binomial coefficients up to n = 6; all the moment code needs.
double binom(int n, int k) {
  static const double table[7][7] = {
      {1, 0, 0, 0, 0, 0, 0},      {1, 1, 0, 0, 0, 0, 0},
      {1, 2, 1, 0, 0, 0, 0},      {1, 3, 3, 1, 0, 0, 0},
      {1, 4, 6, 4, 1, 0, 0},      {1, 5, 10, 10, 5, 1, 0},
      {1, 6, 15, 20, 15, 6, 1}};
  return table[n][k];
}
}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must be in (0,1)");

  // Wichura's AS241 (PPND16).
  const double q = p - 0.5;
  double r, x;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    x = q *
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
  } else {
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
    } else {
      r -= 5.0;
      x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
    }
    if (q < 0.0) x = -x;
  }

  // One Halley refinement against the exact cdf.
  const double e = normal_cdf(x) - p;
  const double u = e / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

TruncatedNormal::TruncatedNormal(double mu, double sigma, double lo, double hi)
    : mu_(mu), sigma_(sigma), lo_(lo), hi_(hi) {
  if (!(sigma > 0.0)) throw std::invalid_argument("TruncatedNormal: sigma must be > 0");
  if (!(lo < hi)) throw std::invalid_argument("TruncatedNormal: lo must be < hi");
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("TruncatedNormal: bounds must be finite");
  cdf_lo_ = normal_cdf((lo_ - mu_) / sigma_);
  cdf_hi_ = normal_cdf((hi_ - mu_) / sigma_);
  mass_ = cdf_hi_ - cdf_lo_;
  if (!(mass_ > 0.0))
    throw std::invalid_argument("TruncatedNormal: no probability mass on [lo,hi]");
}

double TruncatedNormal::pdf(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  return normal_pdf((x - mu_) / sigma_) / (sigma_ * mass_);
}

double TruncatedNormal::raw_moment(int k) const {
  if (k < 1 || k > 6)
    throw std::invalid_argument("TruncatedNormal::raw_moment: k must be in 1..6");
  const double a = (lo_ - mu_) / sigma_;
  const double b = (hi_ - mu_) / sigma_;
  const double pa = normal_pdf(a);
  const double pb = normal_pdf(b);

  // Standardized moments L_j = E[xi^j] on [a, b]:
  //   L_j = (j-1) L_{j-2} + (a^{j-1} phi(a) - b^{j-1} phi(b)) / Z
  double L[7];
  L[0] = 1.0;
  L[1] = (pa - pb) / mass_;
  double a_pow = a, b_pow = b;  // a^{j-1}, b^{j-1} for j = 2
  for (int j = 2; j <= k; ++j) {
    L[j] = (j - 1) * L[j - 2] + (a_pow * pa - b_pow * pb) / mass_;
    a_pow *= a;
    b_pow *= b;
  }

  // E[X^k] = sum_j C(k,j) mu^{k-j} sigma^j L_j
  double m = 0.0;
  double sig_pow = 1.0;
  for (int j = 0; j <= k; ++j) {
    m += binom(k, j) * std::pow(mu_, k - j) * sig_pow * L[j];
    sig_pow *= sigma_;
  }
  return m;
}

double TruncatedNormal::sample(Rng& rng) const {
  const double u = rng.next_double();
  const double p = cdf_lo_ + u * mass_;
  double x = mu_ + sigma_ * normal_quantile(p);
  // Quantile round-off may poke a hair outside the support.
  if (x < lo_) x = lo_;
  if (x > hi_) x = hi_;
  return x;
}

Uniform::Uniform(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(lo < hi)) throw std::invalid_argument("Uniform: lo must be < hi");
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("Uniform: bounds must be finite");
  inv_width_ = 1.0 / (hi - lo);
}

double Uniform::raw_moment(int k) const {
  if (k < 1 || k > 6)
    throw std::invalid_argument("Uniform::raw_moment: k must be in 1..6");
  // (hi^{k+1} - lo^{k+1}) / ((k+1)(hi - lo))
  double s = 0.0;
  double hp = 1.0;
  for (int j = 0; j <= k; ++j) {  // sum hi^j lo^{k-j}
    s += hp * std::pow(lo_, k - j);
    hp *= hi_;
  }
  return s / (k + 1);
}

double pdf(const Marginal& m, double x) {
  return std::visit([x](const auto& d) { return d.pdf(x); }, m);
}

double sample(const Marginal& m, Rng& rng) {
  return std::visit([&rng](const auto& d) { return d.sample(rng); }, m);
}

double marginal_lo(const Marginal& m) {
  return std::visit([](const auto& d) { return d.lo(); }, m);
}

double marginal_hi(const Marginal& m) {
  return std::visit([](const auto& d) { return d.hi(); }, m);
}

double raw_moment(const Marginal& m, int k) {
  return std::visit([k](const auto& d) { return d.raw_moment(k); }, m);
}

ProductDensity::ProductDensity(std::vector<Marginal> marginals)
    : marginals_(std::move(marginals)) {
  Vec lo, hi;
  lo.reserve(marginals_.size());
  hi.reserve(marginals_.size());
  for (const auto& m : marginals_) {
    lo.push_back(marginal_lo(m));
    hi.push_back(marginal_hi(m));
  }
  support_ = SupportBox(std::move(lo), std::move(hi));
}

double ProductDensity::pdf(const Vec& x) const {
  if (x.size() != marginals_.size())
    throw std::invalid_argument("ProductDensity::pdf: dimension mismatch");
  double p = 1.0;
  for (std::size_t i = 0; i < marginals_.size(); ++i) p *= koopuq::pdf(marginals_[i], x[i]);
  return p;
}

Vec ProductDensity::sample(Rng& rng) const {
  Vec x(marginals_.size());
  for (std::size_t i = 0; i < marginals_.size(); ++i) x[i] = koopuq::sample(marginals_[i], rng);
  return x;
}

}  // namespace koopuq
