#include "koopuq/quad.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "koopuq/parallel.hpp"

namespace koopuq {

namespace {

// 15-point Kronrod / 7-point Gauss pair on [-1, 1].
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double tol_for(double value, const QuadOptions& opt) {
  return std::max(opt.atol, opt.rtol * std::fabs(value));
}

bool totals_converged(const Vec& value, const Vec& error, const QuadOptions& opt) {
  for (std::size_t j = 0; j < value.size(); ++j) {
    if (error[j] > tol_for(value[j], opt)) return false;
  }
  return true;
}

struct Region {
  Vec lo, hi;
  Vec value, error;
  double err_key = 0.0;   // max component error
  int split_axis = 0;
  std::size_t seq = 0;    // insertion order, for deterministic tie-breaking

  void finish() {
    err_key = 0.0;
    for (double e : error) err_key = std::max(err_key, e);
  }
};

struct WorstFirst {
  bool operator()(const Region& a, const Region& b) const {
    if (a.err_key != b.err_key) return a.err_key < b.err_key;
    return a.seq > b.seq;
  }
};

using RegionHeap = std::priority_queue<Region, std::vector<Region>, WorstFirst>;

// --- Gauss-Kronrod rule application (1-D) ---

void gk15_points(double lo, double hi, std::vector<Vec>& out) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  out.push_back({c});
  for (int j = 0; j < 7; ++j) {
    out.push_back({c - h * kXgk[j]});
    out.push_back({c + h * kXgk[j]});
  }
}

// vals: 15 integrand vectors laid out as by gk15_points.
void gk15_combine(double lo, double hi, const Vec* vals, Region& r) {
  const double h = 0.5 * (hi - lo);
  const std::size_t m = vals[0].size();
  r.value.assign(m, 0.0);
  r.error.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double kron = kWgk[7] * vals[0][j];
    double gauss = kWg[3] * vals[0][j];
    for (int i = 0; i < 7; ++i) {
      const double pair = vals[1 + 2 * i][j] + vals[2 + 2 * i][j];
      kron += kWgk[i] * pair;
      if (i % 2 == 1) gauss += kWg[i / 2] * pair;  // Gauss nodes are the odd Kronrod ones
    }
    r.value[j] = h * kron;
    r.error[j] = std::fabs(h * (kron - gauss));
  }
  r.split_axis = 0;
  r.finish();
}

// --- Genz-Malik degree-7/5 rule ---

struct GenzMalik {
  std::size_t dim;
  std::size_t npts;
  double w[5], we[4];

  // Generator radii (points are center + radius * halfwidth per axis).
  static constexpr double kL2 = 0.358568582800318092547354275666017;  // sqrt(9/70)
  static constexpr double kL4 = 0.948683298050513799599668063329816;  // sqrt(9/10)
  static constexpr double kL5 = 0.688247201611685297721628734293620;  // sqrt(9/19)

  explicit GenzMalik(std::size_t n) : dim(n) {
    const double nd = static_cast<double>(n);
    npts = 1 + 4 * n + 2 * n * (n - 1) + (std::size_t{1} << n);
    w[0] = (12824.0 - 9120.0 * nd + 400.0 * nd * nd) / 19683.0;
    w[1] = 980.0 / 6561.0;
    w[2] = (1820.0 - 400.0 * nd) / 19683.0;
    w[3] = 200.0 / 19683.0;
    w[4] = 6859.0 / 19683.0 / static_cast<double>(std::size_t{1} << n);
    we[0] = (729.0 - 950.0 * nd + 50.0 * nd * nd) / 729.0;
    we[1] = 245.0 / 486.0;
    we[2] = (265.0 - 100.0 * nd) / 1458.0;
    we[3] = 25.0 / 729.0;
  }

  void points(const Vec& lo, const Vec& hi, std::vector<Vec>& out) const {
    Vec c(dim), h(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      c[d] = 0.5 * (lo[d] + hi[d]);
      h[d] = 0.5 * (hi[d] - lo[d]);
    }
    out.push_back(c);
    for (std::size_t d = 0; d < dim; ++d) {  // axis points, lambda2 then lambda4
      Vec p = c;
      p[d] = c[d] - kL2 * h[d]; out.push_back(p);
      p[d] = c[d] + kL2 * h[d]; out.push_back(p);
      p[d] = c[d] - kL4 * h[d]; out.push_back(p);
      p[d] = c[d] + kL4 * h[d]; out.push_back(p);
    }
    for (std::size_t d1 = 0; d1 + 1 < dim; ++d1) {  // lambda4 pair points
      for (std::size_t d2 = d1 + 1; d2 < dim; ++d2) {
        for (int s1 = -1; s1 <= 1; s1 += 2) {
          for (int s2 = -1; s2 <= 1; s2 += 2) {
            Vec p = c;
            p[d1] = c[d1] + s1 * kL4 * h[d1];
            p[d2] = c[d2] + s2 * kL4 * h[d2];
            out.push_back(p);
          }
        }
      }
    }
    for (std::size_t mask = 0; mask < (std::size_t{1} << dim); ++mask) {  // lambda5 corners
      Vec p = c;
      for (std::size_t d = 0; d < dim; ++d) {
        p[d] = c[d] + ((mask >> d) & 1 ? kL5 : -kL5) * h[d];
      }
      out.push_back(p);
    }
  }

  void combine(const Vec& lo, const Vec& hi, const Vec* vals, Region& r) const {
    double vol = 1.0;
    for (std::size_t d = 0; d < dim; ++d) vol *= hi[d] - lo[d];
    const std::size_t m = vals[0].size();
    const std::size_t n4 = 1 + 4 * dim;
    const std::size_t n5 = n4 + 2 * dim * (dim - 1);
    const double ratio = (kL2 * kL2) / (kL4 * kL4);

    r.value.assign(m, 0.0);
    r.error.assign(m, 0.0);
    Vec fourth_diff(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double f0 = vals[0][j];
      double sum2 = 0.0, sum3 = 0.0, sum4 = 0.0, sum5 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double v0 = vals[1 + 4 * d + 0][j];
        const double v1 = vals[1 + 4 * d + 1][j];
        const double v2 = vals[1 + 4 * d + 2][j];
        const double v3 = vals[1 + 4 * d + 3][j];
        sum2 += v0 + v1;
        sum3 += v2 + v3;
        fourth_diff[d] += std::fabs(v0 + v1 - 2.0 * f0 - ratio * (v2 + v3 - 2.0 * f0));
      }
      for (std::size_t i = n4; i < n5; ++i) sum4 += vals[i][j];
      for (std::size_t i = n5; i < npts; ++i) sum5 += vals[i][j];

      const double res7 = vol * (w[0] * f0 + w[1] * sum2 + w[2] * sum3 + w[3] * sum4 + w[4] * sum5);
      const double res5 = vol * (we[0] * f0 + we[1] * sum2 + we[2] * sum3 + we[3] * sum4);
      r.value[j] = res7;
      r.error[j] = std::fabs(res7 - res5);
    }

    // Split the axis of largest scaled fourth difference; ties go to the
    // lowest index, falling back to the widest axis when all differences
    // vanish.
    int axis = 0;
    double best = -1.0;
    bool any = false;
    for (std::size_t d = 0; d < dim; ++d) {
      if (fourth_diff[d] > best) {
        best = fourth_diff[d];
        axis = static_cast<int>(d);
        if (fourth_diff[d] > 0.0) any = true;
      }
    }
    if (!any) {
      double widest = -1.0;
      for (std::size_t d = 0; d < dim; ++d) {
        if (hi[d] - lo[d] > widest) {
          widest = hi[d] - lo[d];
          axis = static_cast<int>(d);
        }
      }
    }
    r.split_axis = axis;
    r.finish();
  }
};

}  // namespace

std::vector<Vec> batch_eval(const Integrand& f, const std::vector<Vec>& points) {
  std::vector<Vec> out(points.size());
  std::vector<std::exception_ptr> errs(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    try {
      out[i] = f(points[i]);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (errs[i]) {
      std::ostringstream msg;
      msg << "integrand failed at point (";
      for (std::size_t d = 0; d < points[i].size(); ++d) {
        if (d) msg << ", ";
        msg << points[i][d];
      }
      msg << "): ";
      try {
        std::rethrow_exception(errs[i]);
      } catch (const std::exception& e) {
        msg << e.what();
      } catch (...) {
        msg << "unknown error";
      }
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

QuadResult integrate_1d(const Integrand& f, double lo, double hi,
                        const QuadOptions& opt) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("integrate_1d: need finite lo < hi");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0))
    throw std::invalid_argument("integrate_1d: tolerances must be > 0");

  QuadResult res;
  std::size_t seq = 0;

  auto apply = [&](double a, double b) {
    std::vector<Vec> pts;
    pts.reserve(15);
    gk15_points(a, b, pts);
    const auto vals = batch_eval(f, pts);
    res.evals += pts.size();
    Region r;
    r.lo = {a};
    r.hi = {b};
    r.seq = seq++;
    gk15_combine(a, b, vals.data(), r);
    return r;
  };

  RegionHeap heap;
  Region first = apply(lo, hi);
  const std::size_t m = first.value.size();
  Vec total_v = first.value, total_e = first.error;
  heap.push(std::move(first));

  while (!totals_converged(total_v, total_e, opt)) {
    if (res.evals + 30 > opt.max_evals) {
      res.value = total_v;
      res.error = total_e;
      res.converged = false;
      return res;
    }
    Region worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo[0] + worst.hi[0]);
    Region left = apply(worst.lo[0], mid);
    Region right = apply(mid, worst.hi[0]);
    for (std::size_t j = 0; j < m; ++j) {
      total_v[j] += left.value[j] + right.value[j] - worst.value[j];
      total_e[j] += left.error[j] + right.error[j] - worst.error[j];
    }
    heap.push(std::move(left));
    heap.push(std::move(right));
  }

  res.value = total_v;
  res.error = total_e;
  res.converged = true;
  return res;
}

QuadResult integrate_nd(const Integrand& f, const SupportBox& box,
                        const QuadOptions& opt) {
  box.validate();
  const std::size_t dim = box.dim();
  if (dim == 0) throw std::invalid_argument("integrate_nd: empty box");
  if (dim == 1) return integrate_1d([&f](const Vec& x) { return f(x); }, box.lo[0], box.hi[0], opt);
  if (dim > 10)
    throw std::invalid_argument("integrate_nd: dimensions above 10 are unsupported");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0))
    throw std::invalid_argument("integrate_nd: tolerances must be > 0");

  const GenzMalik rule(dim);
  QuadResult res;
  std::size_t seq = 0;

  auto apply = [&](Vec lo, Vec hi) {
    std::vector<Vec> pts;
    pts.reserve(rule.npts);
    rule.points(lo, hi, pts);
    const auto vals = batch_eval(f, pts);
    res.evals += pts.size();
    Region r;
    r.lo = std::move(lo);
    r.hi = std::move(hi);
    r.seq = seq++;
    rule.combine(r.lo, r.hi, vals.data(), r);
    return r;
  };

  RegionHeap heap;
  Region first = apply(box.lo, box.hi);
  const std::size_t m = first.value.size();
  Vec total_v = first.value, total_e = first.error;
  heap.push(std::move(first));

  while (!totals_converged(total_v, total_e, opt)) {
    if (res.evals + 2 * rule.npts > opt.max_evals) {
      res.value = total_v;
      res.error = total_e;
      res.converged = false;
      return res;
    }
    Region worst = heap.top();
    heap.pop();
    const int ax = worst.split_axis;
    const double mid = 0.5 * (worst.lo[ax] + worst.hi[ax]);
    Vec lhi = worst.hi, rlo = worst.lo;
    lhi[ax] = mid;
    rlo[ax] = mid;
    Region left = apply(worst.lo, std::move(lhi));
    Region right = apply(std::move(rlo), worst.hi);
    for (std::size_t j = 0; j < m; ++j) {
      total_v[j] += left.value[j] + right.value[j] - worst.value[j];
      total_e[j] += left.error[j] + right.error[j] - worst.error[j];
    }
    heap.push(std::move(left));
    heap.push(std::move(right));
  }

  res.value = total_v;
  res.error = total_e;
  res.converged = true;
  return res;
}

}  // namespace koopuq
