#pragma once

#include <cmath>
#include <cstdint>

#include "hbopt/common.hpp"

namespace hbopt {

// Envelope function gamma(j) = j^{-1/alpha}. The source material only pins the
// shape up to constants; constant 1 is the canonical choice here.
inline double gamma_of(double alpha, std::int64_t j) {
  if (alpha <= 0) throw UsageError("gamma: alpha must be positive");
  if (j < 1) throw UsageError("gamma: j must be >= 1");
  return std::pow(static_cast<double>(j), -1.0 / alpha);
}

// Exact minimal-index inverse min{j in N : gamma(j) <= y}. The analytic
// ceil(y^-alpha) seed is adjusted against the computed gamma so the minimality
// property holds bit-for-bit.
inline std::int64_t gamma_inv_unclamped(double alpha, double y) {
  if (alpha <= 0) throw UsageError("gamma_inv: alpha must be positive");
  if (y <= 0) throw UsageError("gamma_inv: y must be positive without a finite horizon");
  if (y >= 1) return 1;
  double est = std::pow(y, -alpha);
  if (!(est < 4.0e18)) throw UsageError("gamma_inv: index overflows 64 bits");
  std::int64_t j = static_cast<std::int64_t>(std::ceil(est - 1e-9));
  if (j < 1) j = 1;
  while (gamma_of(alpha, j) > y) ++j;
  while (j > 1 && gamma_of(alpha, j - 1) <= y) --j;
  return j;
}

}  // namespace hbopt
