#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hbopt/evaluator.hpp"
#include "hbopt/search_space.hpp"
#include "hbopt/sha.hpp"

namespace hbopt {

struct HyperbandParams {
  std::int64_t R = 81;
  double eta = 3;  // default elimination factor
  std::optional<std::int64_t> n_max;
  std::optional<std::int64_t> n_min;
  std::optional<std::int64_t> outer_loops;  // nullopt: repeat until the ledger cap
  IncumbentPolicy incumbent_policy = IncumbentPolicy::max_resource;

  void check() const;
  int s_max() const;  // floor(log_eta(n_max or R))
  int s_lo() const;   // floor(log_eta(n_min)) when n_min is set, else 0
  std::int64_t budget() const { return (s_max() + 1) * R; }
};

struct BracketPlan {
  int s = 0;
  std::int64_t n = 0;
  double r = 0;
  RungSchedule schedule;
};

// Plans for s = s_max down to s_lo with n = ceil((B/R) eta^s/(s+1)) and
// r = R eta^-s.
std::vector<BracketPlan> compute_brackets(const HyperbandParams& params);

struct TrajectoryPoint {
  std::int64_t ledger_consumed = 0;
  double incumbent_loss = std::numeric_limits<double>::quiet_NaN();
  std::int64_t incumbent_arm = -1;
  ArmPtr incumbent;
  std::int64_t loop = 0;
  std::int64_t bracket = 0;  // ordinal across the run
  std::int64_t bracket_s = 0;
  std::int64_t bracket_l = 0;  // infinite-horizon l (0 otherwise)
  bool truncated = false;
};

struct HyperbandResult {
  std::vector<TrajectoryPoint> trajectory;
  bool truncated = false;
};

// Supplies fresh arms for one bracket; implementations draw configurations or
// synthetic arms and must assign ids from ctx.next_arm_id.
using ArmFactory = std::function<std::vector<ArmPtr>(RunContext& ctx, std::int64_t n)>;

// Algorithm-style practical Hyperband: for each outer loop, brackets
// s_max..s_lo with fresh configurations per bracket sampled from `space`.
HyperbandResult hyperband_practical(RunContext& ctx, const HyperbandParams& params,
                                    const space::SearchSpace& space, SplitMix64& rng);

// Same loop over caller-supplied arms (simulator populations).
HyperbandResult hyperband_practical(RunContext& ctx, const HyperbandParams& params,
                                    const ArmFactory& factory);

// Infinite-horizon outer loop: k = 1..max_k, admissible l with k - l >= log2(l),
// running sha_infinite with B = 2^k on n = 2^l fresh arms. The incumbent is the
// output of the largest-l completed bracket of the latest k.
HyperbandResult hyperband_infinite(RunContext& ctx, const ArmFactory& factory, int max_k);

// Finite-horizon theoretical outer loop: k = 1..max_k, s = s_max..0 with
// n_{k,s} = ceil(2^k eta^s / (R (s+1))); brackets without an admissible inner
// s are skipped with a notice in ctx.notices.
HyperbandResult hyperband_finite_theoretical(RunContext& ctx, std::int64_t R, double eta,
                                             const ArmFactory& factory, int max_k);

}  // namespace hbopt
