#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hbopt/gamma.hpp"
#include "hbopt/niab.hpp"

namespace hbopt::theory {

// Adaptive quadrature ran out of refinement depth before reaching tolerance.
struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ComplexityQuery {
  std::vector<double> limits;  // nu_1 <= ... <= nu_n
  double alpha = 1.0;
  double epsilon = 0.0;
  double delta = 0.1;
  std::optional<std::int64_t> R;
  double eta = 2.0;
  std::optional<double> q;

  void check() const;
};

// min{j : gamma(j) <= y}; with a finite horizon R the index is clamped to R
// and gamma_inv(0) := R. Without R, y must be positive.
std::int64_t gamma_inv(double alpha, double y, std::optional<std::int64_t> R = std::nullopt);

struct ZshInfinite {
  std::int64_t max_form = 0;  // 2 ceil(log2 n) max_{i>=2} i (1 + gamma_inv(max{eps/4, (nu_i-nu_1)/2}))
  std::int64_t sum_form = 0;  // 2 ceil(log2 n) (n + sum_{i>=2} gamma_inv(...))
};

ZshInfinite z_sh_infinite(const ComplexityQuery& query);

// eta * log_eta(R) * (n + max{R, sum_{i>=2} min(R, gamma_inv(...))}); requires
// query.R.
double z_sh_finite(const ComplexityQuery& query);

// Smallest epsilon inside the H bound's domain: 4 (F^{-1}(log(2/delta)/n) - nu*).
double h_eps_min(const sim::TheoryInstance& instance, std::int64_t n, double delta);

// H(F, gamma, n, delta, eps) = 2n Int_{nu*+eps/4} gamma_inv((t-nu*)/4) dF(t)
//   + (4/3 log(2/delta) + 2n F(nu*+eps/4)) gamma_inv(eps/16).
// beta_continuous: adaptive quadrature to 1e-6 relative; discrete: exact sum.
double h_complexity(const sim::TheoryInstance& instance, std::int64_t n, double delta,
                    double epsilon);

// H at epsilon = h_eps_min.
double h_complexity(const sim::TheoryInstance& instance, std::int64_t n, double delta);

// n * gamma_inv((F^{-1}(log(1/delta)/n) - nu*)/2): sufficient uniform-allocation
// budget for regret 2(F^{-1}(log(1/delta)/n) - nu*) with probability 1-delta.
std::int64_t uniform_budget(const sim::TheoryInstance& instance, std::int64_t n, double delta);

// n * gamma_inv(2 (F^{-1}(log(c/delta)/(n+log(c/delta))) - nu*)) with
// c = 1 - 2^{-beta}: below this budget the reflection construction defeats any
// non-adaptive allocation with probability >= delta.
std::int64_t lower_budget(const sim::TheoryInstance& instance, std::int64_t n, double delta);

struct ScalingPrediction {
  double uniform_budget = 0;     // Delta^{-(alpha+beta)} log(1/delta)
  double sha_budget = 0;         // log(Delta^{-1} log(1/delta)) log(Delta^{-1}) Delta^{-max} log(1/delta)
  double uniform_exponent = 0;   // -(alpha + beta)
  double sha_exponent = 0;       // -max{alpha, beta}
};

// Asymptotic budget predictions with all constants set to 1.
ScalingPrediction scaling_predictions(double alpha, double beta, double gap, double delta);

// Discrete analog of the SHA scaling sum: sum_{j>=2} (mu_j - mu_1)^{-alpha}.
double discrete_sha_sum(const std::vector<double>& mu, double alpha);

}  // namespace hbopt::theory
