#include "nkc/lambert.hpp"

#include <cmath>
#include <stdexcept>

namespace nkc {

// Halley refinement of the lower branch, initialized from the branch-point
// series near -1/e and from the asymptotic expansion log(-y) - log(-log(-y))
// elsewhere (Corless et al. 1996, eqs. 4.19/4.22).
double lambert_w_m1(double y) {
  constexpr double kNegInvE = -0.36787944117144233;
  if (!(y >= kNegInvE) || !(y < 0.0)) {
    throw std::domain_error("lambert_w_m1: argument must lie in [-1/e, 0)");
  }
  if (y == kNegInvE) return -1.0;

  double w;
  const double branch_gap = 2.0 * (1.0 + std::exp(1.0) * y);
  if (branch_gap < 0.25) {
    // p-series about the branch point; the lower branch takes -sqrt.
    const double p = -std::sqrt(std::max(branch_gap, 0.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
  } else {
    const double l1 = std::log(-y);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  }

  for (int iter = 0; iter < 32; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - y;
    if (std::abs(f) <= 1e-14 * std::abs(y)) break;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    w -= f / denom;
  }
  return w;
}

}  // namespace nkc
