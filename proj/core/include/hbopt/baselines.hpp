#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hbopt/evaluator.hpp"
#include "hbopt/sha.hpp"

namespace hbopt {

// Evaluates every arm at level j = min(floor(B / n), R) and returns the argmin.
// Charges exactly n * j; errors when floor(B / n) < 1.
ShaResult uniform_allocation(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t B,
                             std::optional<std::int64_t> R = std::nullopt);

// Uniform allocation pinned at j = R per arm (classical random search over the
// supplied arms). The doubled-budget variant is plumbing: run with a doubled
// ledger cap.
ShaResult random_search(RunContext& ctx, std::vector<ArmPtr> arms, std::int64_t R);

}  // namespace hbopt
