#include "hbopt/sha.hpp"

#include <algorithm>
#include <cmath>

namespace hbopt {

namespace {

// Drops arms that failed during the rung; the survivors keep their order.
std::vector<ArmPtr> drop_failed(const std::vector<ArmPtr>& arms) {
  std::vector<ArmPtr> out;
  out.reserve(arms.size());
  for (const auto& arm : arms)
    if (arm->status == ArmStatus::active) out.push_back(arm);
  return out;
}

void mark_eliminated(const std::vector<ArmPtr>& pool, const std::vector<ArmPtr>& kept) {
  for (const auto& arm : pool) {
    if (arm->status != ArmStatus::active) continue;
    if (std::find(kept.begin(), kept.end(), arm) == kept.end())
      arm->status = ArmStatus::eliminated;
  }
}

void sort_by_arm_id(std::vector<ArmPtr>& arms) {
  std::sort(arms.begin(), arms.end(),
            [](const ArmPtr& a, const ArmPtr& b) { return a->arm_id < b->arm_id; });
}

struct LocalBest {
  ArmPtr arm;
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::int64_t level = -1;
};

// Applies the incumbent policy over one bracket's observations.
struct BracketIncumbent {
  LocalBest paper;         // smallest loss at any level
  LocalBest max_resource;  // smallest loss at the highest level reached

  void observe(const ArmPtr& arm, std::int64_t level, double loss) {
    if (is_failure(loss)) return;
    if (!paper.arm || loss < paper.loss) paper = {arm, loss, level};
    if (level > max_resource.level)
      max_resource = {arm, loss, level};
    else if (level == max_resource.level && loss < max_resource.loss)
      max_resource = {arm, loss, level};
  }

  ShaResult result(IncumbentPolicy policy, std::int64_t consumed) const {
    const LocalBest& pick = policy == IncumbentPolicy::paper ? paper : max_resource;
    return ShaResult{pick.arm, pick.loss, pick.level, consumed};
  }
};

}  // namespace

RungSchedule rung_schedule(std::int64_t n, double r, int s, double eta,
                           std::optional<std::int64_t> final_resource) {
  if (n < 1) throw UsageError("rung_schedule: n must be >= 1");
  if (r <= 0) throw UsageError("rung_schedule: r must be positive");
  if (eta < 2) throw UsageError("rung_schedule: eta must be >= 2");
  if (s < 0) throw UsageError("rung_schedule: s must be >= 0");
  RungSchedule schedule;
  for (int i = 0; i <= s; ++i) {
    RungEntry e;
    e.rung_i = i;
    e.n_i = floor_div_pow(n, eta, i);
    e.r_i = (final_resource && i == s) ? *final_resource : floor_mul_pow(r, eta, i);
    if (e.n_i < 1)
      throw UsageError("rung_schedule: rung " + std::to_string(i) + " has n_i = 0 (n=" +
                       std::to_string(n) + ", eta=" + std::to_string(eta) + ", s=" +
                       std::to_string(s) + ")");
    if (e.r_i < 1)
      throw UsageError("rung_schedule: rung " + std::to_string(i) + " has r_i = 0 (r=" +
                       std::to_string(r) + ")");
    if (!schedule.entries.empty()) {
      if (e.r_i <= schedule.entries.back().r_i)
        throw UsageError("rung_schedule: resource levels must strictly increase");
      if (e.n_i >= schedule.entries.back().n_i)
        throw UsageError("rung_schedule: arm counts must strictly decrease");
    }
    schedule.entries.push_back(e);
  }
  return schedule;
}

ShaResult sha_practical(RunContext& ctx, std::vector<ArmPtr> arms, const RungSchedule& schedule,
                        double eta, std::int64_t bracket_s) {
  if (schedule.entries.empty()) throw UsageError("sha_practical: empty schedule");
  if (static_cast<std::int64_t>(arms.size()) != schedule.entries.front().n_i)
    throw UsageError("sha_practical: got " + std::to_string(arms.size()) + " arms for a schedule with n_0 = " +
                     std::to_string(schedule.entries.front().n_i));
  if (eta < 2) throw UsageError("sha_practical: eta must be >= 2");

  std::int64_t before = ctx.ledger->consumed();
  BracketIncumbent incumbent;
  std::vector<ArmPtr> survivors = std::move(arms);
  sort_by_arm_id(survivors);
  std::size_t last = schedule.entries.size() - 1;
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    const RungEntry& rung = schedule.entries[i];
    std::vector<double> losses = evaluate_rung(ctx, survivors, rung.r_i, bracket_s, rung.rung_i);
    for (std::size_t a = 0; a < survivors.size(); ++a)
      incumbent.observe(survivors[a], rung.r_i, losses[a]);
    std::int64_t keep = i == last ? 1 : floor_div_pow(rung.n_i, eta, 1);
    keep = std::min<std::int64_t>(keep, static_cast<std::int64_t>(survivors.size()));
    std::vector<ArmPtr> kept = top_k(survivors, losses, keep);
    mark_eliminated(survivors, kept);
    kept = drop_failed(kept);
    if (kept.empty())
      throw AllArmsFailedError("sha_practical: no finite-loss survivor after rung " +
                               std::to_string(rung.rung_i));
    survivors = std::move(kept);
    sort_by_arm_id(survivors);
  }
  return incumbent.result(ctx.incumbent_policy, ctx.ledger->consumed() - before);
}

ShaResult sha_infinite(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t B,
                       std::int64_t bracket_label) {
  std::int64_t n = static_cast<std::int64_t>(arms.size());
  if (n < 2 || !is_power_of_two(n))
    throw UsageError("sha_infinite: arm count must be a power of two >= 2, got " +
                     std::to_string(n));
  int K = ceil_log2(n);
  if (B / (n * K) < 1)
    throw UsageError("sha_infinite: budget " + std::to_string(B) +
                     " is too small for one pull per arm per rung (needs >= " +
                     std::to_string(n * K) + ")");

  std::int64_t before = ctx.ledger->consumed();
  std::int64_t output_level = (B / 2) / K;
  std::vector<ArmPtr> survivors = std::move(arms);
  sort_by_arm_id(survivors);
  std::int64_t cumulative = 0;
  for (int k = 0; k < K; ++k) {
    std::int64_t size = static_cast<std::int64_t>(survivors.size());
    std::int64_t r_k = B / (size * K);
    std::int64_t next_cumulative = cumulative + r_k;
    // Insert the output level into every survivor's query sequence when this
    // rung's pulls would step across it: incremental charging makes the split
    // query cost the same pulls, and arms are never rewound.
    if (cumulative < output_level && output_level < next_cumulative)
      evaluate_rung(ctx, survivors, output_level, bracket_label, k, Accounting::delta);
    std::vector<double> losses =
        evaluate_rung(ctx, survivors, next_cumulative, bracket_label, k, Accounting::delta);
    std::int64_t keep = std::max<std::int64_t>(1, size / 2);
    keep = std::min<std::int64_t>(keep, static_cast<std::int64_t>(survivors.size()));
    std::vector<ArmPtr> kept = top_k(survivors, losses, keep);
    mark_eliminated(survivors, kept);
    kept = drop_failed(kept);
    if (kept.empty())
      throw AllArmsFailedError("sha_infinite: no finite-loss survivor after rung " +
                               std::to_string(k));
    survivors = std::move(kept);
    sort_by_arm_id(survivors);
    cumulative = next_cumulative;
  }

  ArmPtr winner = survivors.front();
  for (const auto& arm : survivors)
    if (arm->loss_at_level(cumulative) < winner->loss_at_level(cumulative)) winner = arm;
  if (winner->max_observed_resource < output_level) {
    // unreachable for on-schedule runs; kept as the contract's fallback
    evaluate_rung(ctx, {winner}, output_level, bracket_label, K, Accounting::delta);
  }
  ShaResult result;
  result.best_arm = winner;
  result.best_loss = winner->loss_at_level(output_level);
  result.loss_resource_level = output_level;
  result.ledger_consumed = ctx.ledger->consumed() - before;
  return result;
}

int finite_theoretical_s(std::int64_t n, std::int64_t B, std::int64_t R, double eta) {
  if (n < 1 || B < 1 || R < 1) throw UsageError("sha_finite_theoretical: n, B, R must be >= 1");
  if (eta < 2) throw UsageError("sha_finite_theoretical: eta must be >= 2");
  int t_cap = floor_log(eta, static_cast<double>(std::min(n, R)));
  for (int t = 0; t <= t_cap; ++t) {
    // n R (t+1) eta^-t <= B, kept in exact integers for integral eta
    if (is_integral_value(eta)) {
      __int128 lhs = static_cast<__int128>(n) * R * (t + 1);
      __int128 rhs = static_cast<__int128>(B) *
                     ipow(static_cast<std::int64_t>(eta), t);
      if (lhs <= rhs) return t;
    } else {
      if (static_cast<double>(n) * static_cast<double>(R) * (t + 1) * std::pow(eta, -t) <=
          static_cast<double>(B) * (1 + 1e-12))
        return t;
    }
  }
  throw UsageError("sha_finite_theoretical: no admissible s for n=" + std::to_string(n) +
                   ", B=" + std::to_string(B) + ", R=" + std::to_string(R));
}

ShaResult sha_finite_theoretical(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t B,
                                 std::int64_t R, double eta, std::int64_t bracket_label) {
  std::int64_t n = static_cast<std::int64_t>(arms.size());
  int s = finite_theoretical_s(n, B, R, eta);

  std::int64_t before = ctx.ledger->consumed();
  std::vector<ArmPtr> survivors = std::move(arms);
  sort_by_arm_id(survivors);
  std::int64_t last_level = 0;
  for (int k = 0; k <= s; ++k) {
    std::int64_t r_k = k == s ? R : floor_div_pow(R, eta, s - k);  // floor(R eta^{k-s})
    std::vector<double> losses =
        evaluate_rung(ctx, survivors, r_k, bracket_label, k, Accounting::full);
    std::int64_t keep =
        k == s ? std::max<std::int64_t>(1, floor_div_pow(n, eta, k + 1))
               : floor_div_pow(n, eta, k + 1);
    keep = std::min<std::int64_t>(keep, static_cast<std::int64_t>(survivors.size()));
    keep = std::max<std::int64_t>(keep, survivors.empty() ? 0 : 1);
    std::vector<ArmPtr> kept = top_k(survivors, losses, keep);
    mark_eliminated(survivors, kept);
    kept = drop_failed(kept);
    if (kept.empty())
      throw AllArmsFailedError("sha_finite_theoretical: no finite-loss survivor after rung " +
                               std::to_string(k));
    survivors = std::move(kept);
    sort_by_arm_id(survivors);
    last_level = r_k;
  }

  ArmPtr winner = survivors.front();
  for (const auto& arm : survivors)
    if (arm->loss_at_level(last_level) < winner->loss_at_level(last_level)) winner = arm;
  ShaResult result;
  result.best_arm = winner;
  result.best_loss = winner->loss_at_level(last_level);
  result.loss_resource_level = last_level;
  result.ledger_consumed = ctx.ledger->consumed() - before;
  return result;
}

}  // namespace hbopt
