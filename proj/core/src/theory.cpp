#include "hbopt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace hbopt::theory {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b, const char* what) {
  __int128 p = static_cast<__int128>(a) * b;
  if (p > std::numeric_limits<std::int64_t>::max())
    throw UsageError(std::string(what) + ": value overflows 64 bits");
  return static_cast<std::int64_t>(p);
}

// Recursive adaptive Simpson; throws QuadratureError instead of returning a
// silently truncated value when the refinement depth runs out.
double simpson_slice(const std::function<double(double)>& f, double a, double fa, double b,
                     double fb, double m, double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = f(lm);
  double frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double err = left + right - whole;
  if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
  if (depth <= 0) throw QuadratureError("adaptive quadrature did not converge");
  return simpson_slice(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_slice(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a);
  double fb = f(b);
  double fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_slice(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

// Int_{eps/4}^{1} gamma_inv(u/4) dF(nu* + u) for F(nu* + u) = u^beta. The
// integrand is piecewise constant between the ceiling's breakpoints
// u_m = 4 m^{-1/alpha}; each smooth piece is integrated by quadrature. When
// the breakpoints outnumber 10^6 the dense head is replaced by the analytic
// envelope (4/u)^alpha + 1/2 whose relative error is below 1/(2 * 10^6).
double beta_envelope_integral(double alpha, double beta, double eps) {
  double a = eps / 4.0;
  if (a >= 1.0) return 0.0;
  auto breakpoint = [&](std::int64_t m) { return 4.0 * std::pow(static_cast<double>(m), -1.0 / alpha); };
  auto density = [&](double u) { return beta * std::pow(u, beta - 1.0); };

  std::int64_t m_lo = gamma_inv_unclamped(alpha, 0.25);        // value at u = 1
  std::int64_t m_hi = gamma_inv_unclamped(alpha, a / 4.0);     // value as u -> a
  constexpr std::int64_t kMaxPieces = 1000000;

  double head = 0.0;
  double lower = a;
  std::int64_t m_start = m_hi;
  if (m_hi - m_lo > kMaxPieces) {
    m_start = m_lo + kMaxPieces;
    double u_cut = breakpoint(m_start);
    // closed form of Int 4^alpha u^{beta-alpha-1} * beta du + (1/2) dF
    double c = std::pow(4.0, alpha) * beta;
    double power;
    if (std::abs(beta - alpha) < 1e-12)
      power = std::log(u_cut / a);
    else
      power = (std::pow(u_cut, beta - alpha) - std::pow(a, beta - alpha)) / (beta - alpha);
    head = c * power + 0.5 * (std::pow(u_cut, beta) - std::pow(a, beta));
    lower = u_cut;
  }

  double total = head;
  for (std::int64_t m = m_start; m >= m_lo; --m) {
    double lo = std::max(lower, breakpoint(m));
    double hi = (m == m_lo) ? 1.0 : std::min(1.0, breakpoint(m - 1));
    if (hi <= lo) continue;
    double piece = adaptive_simpson(density, lo, hi, 1e-10);
    total += static_cast<double>(m) * piece;
  }
  return total;
}

}  // namespace

void ComplexityQuery::check() const {
  if (limits.empty()) throw UsageError("complexity query: limits must be non-empty");
  if (!std::is_sorted(limits.begin(), limits.end()))
    throw UsageError("complexity query: limits must be sorted ascending");
  if (alpha <= 0) throw UsageError("complexity query: alpha must be positive");
  if (epsilon <= 0) throw UsageError("complexity query: epsilon must be positive");
  if (!(delta > 0 && delta < 1)) throw UsageError("complexity query: delta must be in (0,1)");
  if (R && *R < 1) throw UsageError("complexity query: R must be >= 1");
  if (eta < 2) throw UsageError("complexity query: eta must be >= 2");
  if (q && !(*q > 0 && *q <= 1)) throw UsageError("complexity query: q must be in (0,1]");
}

std::int64_t gamma_inv(double alpha, double y, std::optional<std::int64_t> R) {
  if (alpha <= 0) throw UsageError("gamma_inv: alpha must be positive");
  if (R && *R < 1) throw UsageError("gamma_inv: R must be >= 1");
  if (y <= 0) {
    if (R) return *R;  // the finite-horizon convention gamma_inv(0) := R
    throw UsageError("gamma_inv: y must be positive without a finite horizon");
  }
  if (R && gamma_of(alpha, *R) > y) return *R;  // even j = R stays above y
  return gamma_inv_unclamped(alpha, y);
}

ZshInfinite z_sh_infinite(const ComplexityQuery& query) {
  query.check();
  std::int64_t n = static_cast<std::int64_t>(query.limits.size());
  if (n < 2) throw UsageError("z_sh_infinite: need at least two limits");
  std::int64_t lead = 2 * static_cast<std::int64_t>(ceil_log2(n));
  __int128 best = 0;
  __int128 sum = 0;
  for (std::int64_t i = 1; i < n; ++i) {
    double arg = std::max(query.epsilon / 4.0, (query.limits[i] - query.limits[0]) / 2.0);
    std::int64_t g = gamma_inv(query.alpha, arg);
    __int128 term = static_cast<__int128>(i + 1) * (1 + static_cast<__int128>(g));
    best = std::max(best, term);
    sum += g;
  }
  __int128 z_max = static_cast<__int128>(lead) * best;
  __int128 z_sum = static_cast<__int128>(lead) * (static_cast<__int128>(n) + sum);
  if (z_max > std::numeric_limits<std::int64_t>::max() ||
      z_sum > std::numeric_limits<std::int64_t>::max())
    throw UsageError("z_sh_infinite: budget overflows 64 bits");
  return {static_cast<std::int64_t>(z_max), static_cast<std::int64_t>(z_sum)};
}

double z_sh_finite(const ComplexityQuery& query) {
  query.check();
  if (!query.R) throw UsageError("z_sh_finite: a finite horizon R is required");
  std::int64_t n = static_cast<std::int64_t>(query.limits.size());
  if (n < 2) throw UsageError("z_sh_finite: need at least two limits");
  double sum = 0;
  for (std::int64_t i = 1; i < n; ++i) {
    double arg = std::max(query.epsilon / 4.0, (query.limits[i] - query.limits[0]) / 2.0);
    sum += static_cast<double>(gamma_inv(query.alpha, arg, query.R));
  }
  double lead = query.eta * std::log(static_cast<double>(*query.R)) / std::log(query.eta);
  return lead * (static_cast<double>(n) + std::max(static_cast<double>(*query.R), sum));
}

double h_eps_min(const sim::TheoryInstance& instance, std::int64_t n, double delta) {
  if (n < 1) throw UsageError("h_eps_min: n must be >= 1");
  if (!(delta > 0 && delta < 1)) throw UsageError("h_eps_min: delta must be in (0,1)");
  double p = std::log(2.0 / delta) / static_cast<double>(n);
  return 4.0 * (sim::f_inv(instance, std::min(p, 1.0)) - sim::nu_star_of(instance));
}

double h_complexity(const sim::TheoryInstance& instance, std::int64_t n, double delta,
                    double epsilon) {
  if (n < 1) throw UsageError("h_complexity: n must be >= 1");
  if (!(delta > 0 && delta < 1)) throw UsageError("h_complexity: delta must be in (0,1)");
  if (epsilon <= 0) throw UsageError("h_complexity: epsilon must be positive");
  double lo = h_eps_min(instance, n, delta);
  if (epsilon < lo - 1e-12 * std::max(1.0, std::abs(lo)))
    throw UsageError("h_complexity: epsilon " + std::to_string(epsilon) +
                     " is below the bound's domain (needs >= " + std::to_string(lo) + ")");
  double nu = sim::nu_star_of(instance);
  double integral;
  if (instance.family == sim::Family::discrete) {
    double threshold = nu + epsilon / 4.0;
    double sum = 0;
    for (double mu : instance.mu)
      if (mu > threshold) sum += static_cast<double>(gamma_inv(instance.alpha, (mu - nu) / 4.0));
    integral = sum / static_cast<double>(instance.mu.size());
  } else {
    integral = beta_envelope_integral(instance.alpha, instance.beta, epsilon);
  }
  double mass_below = sim::f_cdf(instance, nu + epsilon / 4.0);
  double g16 = static_cast<double>(gamma_inv(instance.alpha, epsilon / 16.0));
  return 2.0 * static_cast<double>(n) * integral +
         (4.0 / 3.0 * std::log(2.0 / delta) + 2.0 * static_cast<double>(n) * mass_below) * g16;
}

double h_complexity(const sim::TheoryInstance& instance, std::int64_t n, double delta) {
  return h_complexity(instance, n, delta, h_eps_min(instance, n, delta));
}

std::int64_t uniform_budget(const sim::TheoryInstance& instance, std::int64_t n, double delta) {
  if (n < 1) throw UsageError("uniform_budget: n must be >= 1");
  if (!(delta > 0 && delta < 1)) throw UsageError("uniform_budget: delta must be in (0,1)");
  double p = std::log(1.0 / delta) / static_cast<double>(n);
  double arg = (sim::f_inv(instance, std::min(p, 1.0)) - sim::nu_star_of(instance)) / 2.0;
  if (arg <= 0) throw UsageError("uniform_budget: degenerate inverse CDF at the boundary");
  return checked_mul(n, gamma_inv(instance.alpha, arg, instance.horizon_R), "uniform_budget");
}

std::int64_t lower_budget(const sim::TheoryInstance& instance, std::int64_t n, double delta) {
  if (n < 1) throw UsageError("lower_budget: n must be >= 1");
  if (!(delta > 0 && delta < 1)) throw UsageError("lower_budget: delta must be in (0,1)");
  double c = 1.0 - std::pow(2.0, -instance.beta);
  double q = std::log(c / delta);
  if (q <= 0)
    throw UsageError("lower_budget: delta must be below c = 1 - 2^-beta = " + std::to_string(c));
  double y = q / (static_cast<double>(n) + q);
  double arg = 2.0 * (sim::f_inv(instance, std::min(y, 1.0)) - sim::nu_star_of(instance));
  if (arg <= 0) throw UsageError("lower_budget: degenerate inverse CDF at the boundary");
  return checked_mul(n, gamma_inv(instance.alpha, arg, instance.horizon_R), "lower_budget");
}

ScalingPrediction scaling_predictions(double alpha, double beta, double gap, double delta) {
  if (alpha <= 0 || beta <= 0) throw UsageError("scaling: alpha and beta must be positive");
  if (!(gap > 0 && gap < 1)) throw UsageError("scaling: the gap must be in (0,1)");
  if (!(delta > 0 && delta < 1)) throw UsageError("scaling: delta must be in (0,1)");
  double ld = std::log(1.0 / delta);
  ScalingPrediction out;
  out.uniform_exponent = -(alpha + beta);
  out.sha_exponent = -std::max(alpha, beta);
  out.uniform_budget = std::pow(gap, -(alpha + beta)) * ld;
  out.sha_budget =
      std::log(ld / gap) * std::log(1.0 / gap) * std::pow(gap, -std::max(alpha, beta)) * ld;
  return out;
}

double discrete_sha_sum(const std::vector<double>& mu, double alpha) {
  if (alpha <= 0) throw UsageError("discrete_sha_sum: alpha must be positive");
  if (mu.empty()) throw UsageError("discrete_sha_sum: mu must be non-empty");
  if (!std::is_sorted(mu.begin(), mu.end()))
    throw UsageError("discrete_sha_sum: mu must be sorted ascending");
  double sum = 0;
  for (std::size_t j = 1; j < mu.size(); ++j) {
    double gap = mu[j] - mu[0];
    if (gap <= 0) throw UsageError("discrete_sha_sum: means must be distinct");
    sum += std::pow(gap, -alpha);
  }
  return sum;
}

}  // namespace hbopt::theory
