#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace hbopt {

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class BudgetExceededError : public std::runtime_error {
 public:
  explicit BudgetExceededError(const std::string& what) : std::runtime_error(what) {}
};

class AllArmsFailedError : public std::runtime_error {
 public:
  explicit AllArmsFailedError(const std::string& what) : std::runtime_error(what) {}
};

// Per-arm oracle failure: evaluate_rung converts it into the failure sentinel
// instead of aborting the rung.
class OracleFailure : public std::runtime_error {
 public:
  enum class Kind { generic, timeout };
  OracleFailure(Kind kind, const std::string& what)
      : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

inline double failure_loss() { return std::numeric_limits<double>::quiet_NaN(); }

inline bool is_failure(double loss) { return !std::isfinite(loss); }

// Exact integer power; throws on overflow instead of wrapping.
inline std::int64_t ipow(std::int64_t base, int exp) {
  if (base <= 0 || exp < 0) throw UsageError("ipow requires base > 0, exp >= 0");
  std::int64_t out = 1;
  for (int i = 0; i < exp; ++i) {
    if (out > std::numeric_limits<std::int64_t>::max() / base)
      throw UsageError("ipow overflow");
    out *= base;
  }
  return out;
}

inline bool is_integral_value(double x) {
  return std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15;
}

// floor(n * eta^{-i}) -- exact integer arithmetic when eta is integral.
inline std::int64_t floor_div_pow(std::int64_t n, double eta, int i) {
  if (i == 0) return n;
  if (is_integral_value(eta)) return n / ipow(static_cast<std::int64_t>(eta), i);
  return static_cast<std::int64_t>(std::floor(n * std::pow(eta, -i) + 1e-9));
}

// floor(r * eta^{i}) -- exact when r and eta are integral; when only eta is
// integral the single rounded multiply keeps the error below the 1e-9 nudge.
inline std::int64_t floor_mul_pow(double r, double eta, int i) {
  if (is_integral_value(eta)) {
    std::int64_t p = ipow(static_cast<std::int64_t>(eta), i);
    if (is_integral_value(r)) return static_cast<std::int64_t>(r) * p;
    return static_cast<std::int64_t>(std::floor(r * static_cast<double>(p) + 1e-9));
  }
  return static_cast<std::int64_t>(std::floor(r * std::pow(eta, i) + 1e-9));
}

// floor(log_eta(x)) for x >= 1, robust at exact powers of eta.
inline int floor_log(double eta, double x) {
  if (x < 1) throw UsageError("floor_log requires x >= 1");
  if (eta < 2) throw UsageError("floor_log requires eta >= 2");
  int s = 0;
  if (is_integral_value(eta)) {
    std::int64_t e = static_cast<std::int64_t>(eta);
    std::int64_t acc = 1;
    while (static_cast<double>(acc) * static_cast<double>(e) <= x) {
      acc *= e;
      ++s;
    }
    return s;
  }
  double acc = eta;
  while (acc <= x * (1 + 1e-12)) {
    acc *= eta;
    ++s;
  }
  return s;
}

// smallest K with 2^K >= n, i.e. ceil(log2(n)) for n >= 1.
inline int ceil_log2(std::int64_t n) {
  if (n < 1) throw UsageError("ceil_log2 requires n >= 1");
  int k = 0;
  std::int64_t p = 1;
  while (p < n) {
    p <<= 1;
    ++k;
  }
  return k;
}

inline bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace hbopt
