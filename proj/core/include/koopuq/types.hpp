#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace koopuq {

using Vec = std::vector<double>;

/// Finite hyper-rectangle. Infinite tails must be truncated before they
/// get here; the quadrature rules require bounded regions.
struct SupportBox {
  Vec lo;
  Vec hi;

  SupportBox() = default;
  SupportBox(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    validate();
  }

  std::size_t dim() const { return lo.size(); }

  bool contains(const Vec& x) const {
    if (x.size() != lo.size()) return false;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    }
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  void validate() const;
};

inline void SupportBox::validate() const {
  if (lo.size() != hi.size())
    throw std::invalid_argument("SupportBox: lo/hi dimension mismatch");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i]))
      throw std::invalid_argument("SupportBox: lo[" + std::to_string(i) +
                                  "] must be < hi[" + std::to_string(i) + "]");
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw std::invalid_argument("SupportBox: bounds must be finite");
  }
}

}  // namespace koopuq
