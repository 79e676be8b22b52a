#include "hbopt/baselines.hpp"

#include <algorithm>
#include <string>

namespace hbopt {

namespace {

ShaResult evaluate_all_at(RunContext& ctx, std::vector<ArmPtr>& arms, std::int64_t level) {
  std::int64_t before = ctx.ledger->consumed();
  std::vector<double> losses =
      evaluate_rung(ctx, arms, level, /*bracket_s=*/0, /*rung_i=*/0, Accounting::full);
  std::vector<ArmPtr> best = top_k(arms, losses, 1);
  ShaResult result;
  result.best_arm = best.front();
  result.best_loss = result.best_arm->loss_at_level(level);
  result.loss_resource_level = level;
  result.ledger_consumed = ctx.ledger->consumed() - before;
  return result;
}

}  // namespace

ShaResult uniform_allocation(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t B,
                             std::optional<std::int64_t> R) {
  if (arms.empty()) throw UsageError("uniform_allocation: no arms");
  if (B < 1) throw UsageError("uniform_allocation: B must be >= 1");
  if (R && *R < 1) throw UsageError("uniform_allocation: R must be >= 1");
  std::int64_t n = static_cast<std::int64_t>(arms.size());
  std::int64_t j = B / n;
  if (j < 1)
    throw UsageError("uniform_allocation: budget " + std::to_string(B) +
                     " is below one unit per arm for n=" + std::to_string(n));
  if (R) j = std::min(j, *R);
  return evaluate_all_at(ctx, arms, j);
}

ShaResult random_search(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t R) {
  if (arms.empty()) throw UsageError("random_search: no arms");
  if (R < 1) throw UsageError("random_search: R must be >= 1");
  return evaluate_all_at(ctx, arms, R);
}

}  // namespace hbopt
