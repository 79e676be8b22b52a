#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hbopt/evaluator.hpp"

namespace hbopt {

struct RungEntry {
  int rung_i = 0;
  std::int64_t n_i = 0;  // arms entering the rung
  std::int64_t r_i = 0;  // cumulative resource level for the rung
};

struct RungSchedule {
  std::vector<RungEntry> entries;
};

struct ShaResult {
  ArmPtr best_arm;
  double best_loss = std::numeric_limits<double>::quiet_NaN();
  std::int64_t loss_resource_level = 0;
  std::int64_t ledger_consumed = 0;  // units charged by this call
};

// Inner-loop geometry: entries for i = 0..s with n_i = floor(n * eta^-i) and
// r_i = floor(r * eta^i). When `final_resource` is given (a bracket derived
// from a Hyperband plan), the last rung is clamped to exactly that level.
RungSchedule rung_schedule(std::int64_t n, double r, int s, double eta,
                           std::optional<std::int64_t> final_resource = std::nullopt);

// Practical successive halving over an explicit schedule. Keeps
// floor(n_i/eta) arms per rung (the final rung keeps exactly one) and returns
// the incumbent under ctx.incumbent_policy.
ShaResult sha_practical(RunContext& ctx, std::vector<ArmPtr> arms, const RungSchedule& schedule,
                        double eta, std::int64_t bracket_s = 0);

// Infinite-horizon variant: n must be a power of two (>= 2); halves
// ceil(log2 n) times with r_k = floor(B / (|S_k| ceil(log2 n))) incremental
// pulls per surviving arm, ranking on each arm's cumulative pull count after
// the rung. Returns the survivor and its loss at level floor((B/2)/ceil(log2 n)).
// Pulls are charged incrementally; the total never exceeds B.
ShaResult sha_infinite(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t B,
                       std::int64_t bracket_label = 0);

// Finite-horizon theoretical variant: picks s = min{t : n R (t+1) eta^-t <= B,
// t <= log_eta(min{R, n})}, runs rungs with n_k = floor(n eta^-k) and
// cumulative levels r_k = floor(R eta^{k-s}), and returns the argmin of the
// last-rung losses at R. Charged at full levels: consumed <= B.
ShaResult sha_finite_theoretical(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t B,
                                 std::int64_t R, double eta, std::int64_t bracket_label = 0);

// The s chosen by sha_finite_theoretical for (n, B, R, eta); error when no
// admissible value exists.
int finite_theoretical_s(std::int64_t n, std::int64_t B, std::int64_t R, double eta);

}  // namespace hbopt
