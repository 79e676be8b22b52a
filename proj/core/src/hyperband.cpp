#include "hbopt/hyperband.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace hbopt {

using nlohmann::json;

void HyperbandParams::check() const {
  if (R < 1) throw UsageError("hyperband: R must be >= 1");
  if (eta < 2) throw UsageError("hyperband: eta must be >= 2");
  if (n_max && *n_max < 1) throw UsageError("hyperband: n_max must be >= 1");
  if (n_min && *n_min < 1) throw UsageError("hyperband: n_min must be >= 1");
  if (n_max && n_min && *n_min > *n_max) throw UsageError("hyperband: n_min must be <= n_max");
  if (outer_loops && *outer_loops < 1) throw UsageError("hyperband: outer_loops must be >= 1");
}

int HyperbandParams::s_max() const {
  return floor_log(eta, static_cast<double>(n_max ? *n_max : R));
}

int HyperbandParams::s_lo() const {
  return n_min ? floor_log(eta, static_cast<double>(*n_min)) : 0;
}

namespace {

// ceil((B/R) eta^s / (s+1)) with B = (s_max+1) R, i.e. ceil((s_max+1) eta^s / (s+1)).
std::int64_t bracket_n(int s_max, int s, double eta) {
  if (is_integral_value(eta)) {
    std::int64_t num = (s_max + 1) * ipow(static_cast<std::int64_t>(eta), s);
    return (num + s) / (s + 1);
  }
  return static_cast<std::int64_t>(
      std::ceil((s_max + 1) * std::pow(eta, s) / (s + 1) - 1e-9));
}

double bracket_r(std::int64_t R, int s, double eta) {
  if (is_integral_value(eta))
    return static_cast<double>(R) / static_cast<double>(ipow(static_cast<std::int64_t>(eta), s));
  return R * std::pow(eta, -s);
}

json incumbent_event(const TrajectoryPoint& point) {
  json ev{{"type", "incumbent"},
          {"ledger_consumed", point.ledger_consumed},
          {"loss", is_failure(point.incumbent_loss) ? json(nullptr) : json(point.incumbent_loss)},
          {"arm_id", point.incumbent_arm},
          {"loop", point.loop},
          {"bracket", point.bracket},
          {"bracket_s", point.bracket_s},
          {"truncated", point.truncated}};
  if (point.incumbent && !point.incumbent->config.values.empty()) {
    json cfg = json::object();
    for (const auto& [name, value] : point.incumbent->config.values) {
      if (std::holds_alternative<double>(value))
        cfg[name] = std::get<double>(value);
      else if (std::holds_alternative<std::int64_t>(value))
        cfg[name] = std::get<std::int64_t>(value);
      else
        cfg[name] = std::get<std::string>(value);
    }
    ev["config"] = cfg;
  }
  return ev;
}

void emit_point(RunContext& ctx, HyperbandResult& result, TrajectoryPoint point) {
  if (ctx.log) ctx.log->append_event(incumbent_event(point));
  result.trajectory.push_back(std::move(point));
}

}  // namespace

std::vector<BracketPlan> compute_brackets(const HyperbandParams& params) {
  params.check();
  int hi = params.s_max();
  int lo = params.s_lo();
  if (lo > hi)
    throw UsageError("hyperband: empty bracket range (s_max=" + std::to_string(hi) +
                     " < s_lo=" + std::to_string(lo) + ")");
  std::vector<BracketPlan> plans;
  for (int s = hi; s >= lo; --s) {
    BracketPlan plan;
    plan.s = s;
    plan.n = bracket_n(hi, s, params.eta);
    plan.r = bracket_r(params.R, s, params.eta);
    plan.schedule = rung_schedule(plan.n, plan.r, s, params.eta, params.R);
    plans.push_back(std::move(plan));
  }
  return plans;
}

namespace {

HyperbandResult practical_loop(RunContext& ctx, const HyperbandParams& params,
                               const ArmFactory& factory) {
  params.check();
  std::vector<BracketPlan> plans = compute_brackets(params);

  IncumbentTracker tracker(params.incumbent_policy);
  IncumbentTracker* saved = ctx.tracker;
  ctx.tracker = &tracker;
  IncumbentPolicy saved_policy = ctx.incumbent_policy;
  ctx.incumbent_policy = params.incumbent_policy;

  HyperbandResult result;
  std::int64_t bracket_ordinal = 0;
  std::int64_t max_loops = params.outer_loops.value_or(std::numeric_limits<std::int64_t>::max());
  try {
    for (std::int64_t loop = 0; loop < max_loops; ++loop) {
      for (const BracketPlan& plan : plans) {
        std::vector<ArmPtr> arms = factory(ctx, plan.n);
        sha_practical(ctx, std::move(arms), plan.schedule, params.eta, plan.s);
        TrajectoryPoint point;
        point.ledger_consumed = ctx.ledger->consumed();
        point.incumbent_loss = tracker.best_loss;
        point.incumbent_arm = tracker.best_arm ? tracker.best_arm->arm_id : -1;
        point.incumbent = tracker.best_arm;
        point.loop = loop;
        point.bracket = bracket_ordinal++;
        point.bracket_s = plan.s;
        emit_point(ctx, result, point);
      }
      if (!params.outer_loops && !ctx.ledger->cap()) break;  // avoid spinning forever
    }
  } catch (const BudgetExceededError&) {
    TrajectoryPoint point;
    point.ledger_consumed = ctx.ledger->consumed();
    point.incumbent_loss = tracker.best_loss;
    point.incumbent_arm = tracker.best_arm ? tracker.best_arm->arm_id : -1;
    point.incumbent = tracker.best_arm;
    point.loop = result.trajectory.empty() ? 0 : result.trajectory.back().loop;
    point.bracket = bracket_ordinal;
    point.bracket_s = -1;
    point.truncated = true;
    emit_point(ctx, result, point);
    result.truncated = true;
  }
  ctx.tracker = saved;
  ctx.incumbent_policy = saved_policy;
  return result;
}

}  // namespace

HyperbandResult hyperband_practical(RunContext& ctx, const HyperbandParams& params,
                                    const space::SearchSpace& space, SplitMix64& rng) {
  ArmFactory factory = [&space, &rng](RunContext& c, std::int64_t n) {
    std::vector<space::Configuration> configs = space::sample(space, rng, n);
    std::vector<ArmPtr> arms;
    arms.reserve(configs.size());
    for (auto& config : configs) {
      auto arm = std::make_shared<ArmState>();
      arm->arm_id = c.next_arm_id++;
      arm->config = std::move(config);
      arms.push_back(std::move(arm));
    }
    return arms;
  };
  return practical_loop(ctx, params, factory);
}

HyperbandResult hyperband_practical(RunContext& ctx, const HyperbandParams& params,
                                    const ArmFactory& factory) {
  return practical_loop(ctx, params, factory);
}

HyperbandResult hyperband_infinite(RunContext& ctx, const ArmFactory& factory, int max_k) {
  if (max_k < 1) throw UsageError("hyperband_infinite: max_k must be >= 1");
  HyperbandResult result;
  std::int64_t bracket_ordinal = 0;
  try {
    for (int k = 1; k <= max_k; ++k) {
      if (k >= 62) throw UsageError("hyperband_infinite: k too large for a 64-bit budget");
      std::int64_t B = std::int64_t{1} << k;
      for (int l = 1; l <= k; ++l) {
        // admissible when k - l >= log2(l), i.e. 2^(k-l) >= l
        if ((std::int64_t{1} << (k - l)) < l) continue;
        std::int64_t n = std::int64_t{1} << l;
        std::vector<ArmPtr> arms = factory(ctx, n);
        ShaResult bracket = sha_infinite(ctx, std::move(arms), B, bracket_ordinal);
        TrajectoryPoint point;
        point.ledger_consumed = ctx.ledger->consumed();
        point.incumbent_loss = bracket.best_loss;
        point.incumbent_arm = bracket.best_arm ? bracket.best_arm->arm_id : -1;
        point.incumbent = bracket.best_arm;
        point.loop = k;
        point.bracket = bracket_ordinal++;
        point.bracket_s = k;
        point.bracket_l = l;
        emit_point(ctx, result, point);
      }
    }
  } catch (const BudgetExceededError&) {
    result.truncated = true;
    if (!result.trajectory.empty()) {
      TrajectoryPoint point = result.trajectory.back();
      point.ledger_consumed = ctx.ledger->consumed();
      point.truncated = true;
      emit_point(ctx, result, point);
    }
  }
  return result;
}

HyperbandResult hyperband_finite_theoretical(RunContext& ctx, std::int64_t R, double eta,
                                             const ArmFactory& factory, int max_k) {
  if (max_k < 1) throw UsageError("hyperband_finite_theoretical: max_k must be >= 1");
  if (R < 1 || eta < 2) throw UsageError("hyperband_finite_theoretical: invalid R or eta");
  int s_max = floor_log(eta, static_cast<double>(R));
  HyperbandResult result;
  std::int64_t bracket_ordinal = 0;
  try {
    for (int k = 1; k <= max_k; ++k) {
      if (k >= 62) throw UsageError("hyperband_finite_theoretical: k too large");
      std::int64_t B = std::int64_t{1} << k;
      std::optional<ShaResult> best_of_k;
      std::int64_t best_of_k_s = -1;
      std::int64_t best_of_k_bracket = -1;
      for (int s = s_max; s >= 0; --s) {
        std::int64_t n;
        if (is_integral_value(eta)) {
          std::int64_t denom = R * (s + 1);
          __int128 num = static_cast<__int128>(B) * ipow(static_cast<std::int64_t>(eta), s);
          n = static_cast<std::int64_t>((num + denom - 1) / denom);
        } else {
          n = static_cast<std::int64_t>(
              std::ceil(static_cast<double>(B) * std::pow(eta, s) / (R * (s + 1.0)) - 1e-9));
        }
        if (n < 1) n = 1;
        try {
          finite_theoretical_s(n, B, R, eta);
        } catch (const UsageError&) {
          ctx.notices.push_back("hyperband_finite_theoretical: skipped bracket k=" +
                                std::to_string(k) + ", s=" + std::to_string(s) + " (n=" +
                                std::to_string(n) + ", B=" + std::to_string(B) +
                                "): no admissible inner s");
          continue;
        }
        std::vector<ArmPtr> arms = factory(ctx, n);
        ShaResult bracket = sha_finite_theoretical(ctx, std::move(arms), B, R, eta, bracket_ordinal);
        // The incumbent rule mirrors the infinite-horizon one: the widest
        // (largest-s) completed bracket of the latest k wins.
        if (!best_of_k) {
          best_of_k = bracket;
          best_of_k_s = s;
          best_of_k_bracket = bracket_ordinal;
        }
        ++bracket_ordinal;
      }
      if (best_of_k) {
        TrajectoryPoint point;
        point.ledger_consumed = ctx.ledger->consumed();
        point.incumbent_loss = best_of_k->best_loss;
        point.incumbent_arm = best_of_k->best_arm ? best_of_k->best_arm->arm_id : -1;
        point.incumbent = best_of_k->best_arm;
        point.loop = k;
        point.bracket = best_of_k_bracket;
        point.bracket_s = best_of_k_s;
        emit_point(ctx, result, point);
      }
    }
  } catch (const BudgetExceededError&) {
    result.truncated = true;
  }
  return result;
}

}  // namespace hbopt
