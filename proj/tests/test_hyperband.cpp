#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "hbopt/hyperband.hpp"
#include "test_helpers.hpp"

using namespace hbopt;
using hbtest::Ctx;
using hbtest::FnOracle;

namespace {

double nu_of(std::int64_t arm_id) {
  return std::fmod(0.37 * static_cast<double>(arm_id) + 0.11, 1.0);
}

// Factory that records every id it hands out; arms carry no curve state, the
// test oracle keys losses off the arm id.
struct RecordingFactory {
  std::vector<std::int64_t> issued;
  std::vector<std::int64_t> request_sizes;

  ArmFactory fn() {
    return [this](RunContext& ctx, std::int64_t n) {
      request_sizes.push_back(n);
      std::vector<ArmPtr> arms;
      for (std::int64_t i = 0; i < n; ++i) {
        auto arm = std::make_shared<ArmState>();
        arm->arm_id = ctx.next_arm_id++;
        issued.push_back(arm->arm_id);
        arms.push_back(std::move(arm));
      }
      return arms;
    };
  }
};

FnOracle constant_oracle() {
  return FnOracle([](ArmState& arm, std::int64_t, std::int64_t) { return nu_of(arm.arm_id); });
}

}  // namespace

TEST_CASE("compute_brackets reproduces the R=81, eta=3 plan table") {
  HyperbandParams params;
  params.R = 81;
  params.eta = 3;
  CHECK(params.s_max() == 4);
  CHECK(params.budget() == 405);
  auto plans = compute_brackets(params);
  REQUIRE(plans.size() == 5);

  const std::vector<std::int64_t> want_n{81, 34, 15, 8, 5};
  const std::vector<std::int64_t> want_budget{405, 363, 351, 378, 405};
  std::int64_t total = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    CHECK(plans[i].s == 4 - static_cast<int>(i));
    CHECK(plans[i].n == want_n[i]);
    CHECK(plans[i].schedule.entries.front().r_i ==
          ipow(3, static_cast<int>(i)));  // r = R eta^-s floors to 3^(4-s)... == 3^i
    CHECK(plans[i].schedule.entries.back().r_i == 81);
    std::int64_t budget = 0;
    for (const auto& e : plans[i].schedule.entries) budget += e.n_i * e.r_i;
    CHECK(budget == want_budget[i]);
    total += budget;
  }
  CHECK(total == 1902);

  // the most exploratory bracket of the table, spelled out
  const auto& widest = plans[0].schedule.entries;
  REQUIRE(widest.size() == 5);
  CHECK(widest[0].n_i == 81);
  CHECK(widest[1].n_i == 27);
  CHECK(widest[2].n_i == 9);
  CHECK(widest[3].n_i == 3);
  CHECK(widest[4].n_i == 1);
}

TEST_CASE("compute_brackets matches the integer formula across a grid") {
  for (std::int64_t R : {27, 81, 243, 729}) {
    for (std::int64_t eta : {2, 3, 4}) {
      HyperbandParams params;
      params.R = R;
      params.eta = static_cast<double>(eta);
      int s_max = 0;
      std::int64_t pow_eta = 1;
      while (pow_eta * eta <= R) {
        pow_eta *= eta;
        ++s_max;
      }
      auto plans = compute_brackets(params);
      REQUIRE(plans.size() == static_cast<std::size_t>(s_max) + 1);
      std::int64_t eta_s = 1;
      for (int s = 0; s <= s_max; ++s) {
        const BracketPlan& plan = plans[static_cast<std::size_t>(s_max - s)];
        CHECK(plan.s == s);
        std::int64_t want_n = ((s_max + 1) * eta_s + s) / (s + 1);  // exact ceil
        CHECK(plan.n == want_n);
        CHECK(plan.schedule.entries.size() == static_cast<std::size_t>(s) + 1);
        CHECK(plan.schedule.entries.back().r_i == R);
        eta_s *= eta;
      }
      // the widest bracket samples at least eta^s_max configurations
      CHECK(plans.front().n >= pow_eta);
    }
  }
}

TEST_CASE("bracket range honors n_max and n_min") {
  HyperbandParams params;
  params.R = 81;
  params.eta = 3;
  params.n_max = 9;
  CHECK(params.s_max() == 2);
  auto plans = compute_brackets(params);
  REQUIRE(plans.size() == 3);
  CHECK(plans.front().n == 9);
  CHECK(plans.front().schedule.entries.front().r_i == 9);

  params.n_min = 3;
  CHECK(params.s_lo() == 1);
  plans = compute_brackets(params);
  REQUIRE(plans.size() == 2);
  CHECK(plans.back().s == 1);
}

TEST_CASE("HyperbandParams::check rejects bad shapes") {
  HyperbandParams params;
  params.R = 0;
  CHECK_THROWS_AS(params.check(), UsageError);
  params.R = 81;
  params.eta = 1.5;
  CHECK_THROWS_AS(params.check(), UsageError);
  params.eta = 3;
  params.n_max = 4;
  params.n_min = 9;
  CHECK_THROWS_AS(params.check(), UsageError);
  params.n_min = 2;
  params.outer_loops = 0;
  CHECK_THROWS_AS(params.check(), UsageError);
  params.outer_loops = 1;
  CHECK_NOTHROW(params.check());
}

TEST_CASE("practical loop runs brackets s_max..0 with fresh arms and a global incumbent") {
  FnOracle oracle = constant_oracle();
  Ctx h(&oracle);
  RecordingFactory factory;
  HyperbandParams params;
  params.R = 9;
  params.eta = 3;

  HyperbandResult result = hyperband_practical(h.ctx, params, factory.fn());
  CHECK_FALSE(result.truncated);
  REQUIRE(result.trajectory.size() == 3);  // one loop when uncapped and loops unset
  CHECK(factory.request_sizes == std::vector<std::int64_t>{9, 5, 3});

  const std::vector<std::int64_t> want_consumed{27, 51, 78};
  for (std::size_t i = 0; i < 3; ++i) {
    const TrajectoryPoint& p = result.trajectory[i];
    CHECK(p.loop == 0);
    CHECK(p.bracket == static_cast<std::int64_t>(i));
    CHECK(p.bracket_s == 2 - static_cast<std::int64_t>(i));
    CHECK(p.bracket_l == 0);
    CHECK_FALSE(p.truncated);
    CHECK(p.ledger_consumed == want_consumed[i]);
    if (i > 0) CHECK(p.incumbent_loss <= result.trajectory[i - 1].incumbent_loss);
  }

  // constant curves: the final incumbent is the best sampled configuration
  std::int64_t want_best = factory.issued.front();
  for (std::int64_t id : factory.issued)
    if (nu_of(id) < nu_of(want_best)) want_best = id;
  CHECK(result.trajectory.back().incumbent_arm == want_best);
  CHECK(result.trajectory.back().incumbent_loss == doctest::Approx(nu_of(want_best)));
  CHECK(h.ledger.consumed() == 78);
}

TEST_CASE("practical loop repeats for outer_loops and tracks across loops") {
  FnOracle oracle = constant_oracle();
  Ctx h(&oracle);
  RecordingFactory factory;
  HyperbandParams params;
  params.R = 9;
  params.eta = 3;
  params.outer_loops = 2;

  HyperbandResult result = hyperband_practical(h.ctx, params, factory.fn());
  REQUIRE(result.trajectory.size() == 6);
  CHECK(result.trajectory[2].loop == 0);
  CHECK(result.trajectory[3].loop == 1);
  CHECK(result.trajectory[5].bracket == 5);
  CHECK(h.ledger.consumed() == 156);
  CHECK(factory.issued.size() == 34);
  for (std::size_t i = 1; i < result.trajectory.size(); ++i)
    CHECK(result.trajectory[i].incumbent_loss <= result.trajectory[i - 1].incumbent_loss);
}

TEST_CASE("practical loop truncates cleanly at the ledger cap") {
  FnOracle oracle = constant_oracle();
  Ctx h(&oracle, 50);
  RecordingFactory factory;
  HyperbandParams params;
  params.R = 9;
  params.eta = 3;

  HyperbandResult result = hyperband_practical(h.ctx, params, factory.fn());
  CHECK(result.truncated);
  REQUIRE(result.trajectory.size() == 2);
  CHECK(result.trajectory[0].bracket_s == 2);
  const TrajectoryPoint& cut = result.trajectory.back();
  CHECK(cut.truncated);
  CHECK(cut.bracket_s == -1);
  CHECK(cut.bracket == 1);
  CHECK(cut.loop == 0);
  CHECK(cut.ledger_consumed == 42);  // bracket s=2 (27) + the s=1 rung that fit (15)
  CHECK(h.ledger.consumed() == 42);
  CHECK_FALSE(is_failure(cut.incumbent_loss));
}

TEST_CASE("practical loop writes incumbent events to the trial log") {
  auto dir = hbtest::fresh_dir("hb_events");
  FnOracle oracle = constant_oracle();
  BudgetLedger ledger;
  TrialLog log(dir / "trials.jsonl");
  RunContext ctx;
  ctx.oracle = &oracle;
  ctx.ledger = &ledger;
  ctx.log = &log;
  RecordingFactory factory;
  HyperbandParams params;
  params.R = 9;
  params.eta = 3;
  hyperband_practical(ctx, params, factory.fn());

  std::ifstream in(dir / "trials.jsonl");
  std::string line;
  std::vector<nlohmann::json> events;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (j.contains("type") && j["type"] == "incumbent") events.push_back(j);
  }
  REQUIRE(events.size() == 3);
  CHECK(events[0]["bracket_s"] == 2);
  CHECK(events[2]["bracket_s"] == 0);
  CHECK(events[2]["ledger_consumed"] == 78);
  CHECK(events[2]["loss"].is_number());
  CHECK(events[2]["truncated"] == false);
}

TEST_CASE("hyperband_practical samples configurations from a search space") {
  auto space = space::parse_space(R"({
    "params": [{"name": "x", "kind": "continuous", "min": 0.0, "max": 1.0}]
  })");
  FnOracle oracle([](ArmState& arm, std::int64_t, std::int64_t) {
    return std::get<double>(arm.config.values.at("x"));
  });
  Ctx h(&oracle);
  SplitMix64 rng(7);
  HyperbandParams params;
  params.R = 9;
  params.eta = 3;
  HyperbandResult result = hyperband_practical(h.ctx, params, space, rng);
  REQUIRE(result.trajectory.size() == 3);
  REQUIRE(result.trajectory.back().incumbent != nullptr);
  double x = std::get<double>(result.trajectory.back().incumbent->config.values.at("x"));
  CHECK(result.trajectory.back().incumbent_loss == doctest::Approx(x));
  CHECK(h.ctx.next_arm_id == 17);
}

TEST_CASE("hyperband_infinite enumerates admissible (k, l) brackets") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    return nu_of(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  RecordingFactory factory;
  HyperbandResult result = hyperband_infinite(h.ctx, factory.fn(), 3);

  CHECK(factory.request_sizes == std::vector<std::int64_t>{2, 2, 2, 4});
  REQUIRE(result.trajectory.size() == 4);
  const std::vector<std::pair<std::int64_t, std::int64_t>> want{{1, 1}, {2, 1}, {3, 1}, {3, 2}};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(result.trajectory[i].loop == want[i].first);
    CHECK(result.trajectory[i].bracket_s == want[i].first);
    CHECK(result.trajectory[i].bracket_l == want[i].second);
    CHECK(result.trajectory[i].bracket == static_cast<std::int64_t>(i));
  }
  CHECK(h.ledger.consumed() == 2 + 4 + 8 + 8);

  CHECK_THROWS_AS(hyperband_infinite(h.ctx, factory.fn(), 0), UsageError);
}

TEST_CASE("hyperband_infinite stays within the doubling budget envelope") {
  for (int max_k = 1; max_k <= 8; ++max_k) {
    FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
      return nu_of(arm.arm_id) + 1.0 / std::sqrt(static_cast<double>(r));
    });
    Ctx h(&oracle);
    RecordingFactory factory;
    HyperbandResult result = hyperband_infinite(h.ctx, factory.fn(), max_k);
    CHECK_FALSE(result.truncated);
    CHECK(h.ledger.consumed() <= 2 * max_k * (std::int64_t{1} << max_k));
    for (const auto& point : result.trajectory) CHECK(point.loop <= max_k);
  }
}

TEST_CASE("hyperband_infinite truncation re-emits the last incumbent") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    return nu_of(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle, 12);
  RecordingFactory factory;
  HyperbandResult result = hyperband_infinite(h.ctx, factory.fn(), 3);
  CHECK(result.truncated);
  REQUIRE(result.trajectory.size() == 3);  // k=1, k=2, then the truncation copy
  CHECK(result.trajectory[1].loop == 2);
  const TrajectoryPoint& cut = result.trajectory.back();
  CHECK(cut.truncated);
  CHECK(cut.loop == 2);
  CHECK(cut.incumbent_arm == result.trajectory[1].incumbent_arm);
  CHECK(cut.ledger_consumed == 6);
}

TEST_CASE("hyperband_finite_theoretical skips every bracket below the entry budget") {
  FnOracle oracle = constant_oracle();
  Ctx h(&oracle);
  RecordingFactory factory;
  HyperbandResult result = hyperband_finite_theoretical(h.ctx, 81, 3, factory.fn(), 6);
  CHECK(result.trajectory.empty());
  CHECK(factory.request_sizes.empty());
  CHECK(h.ledger.consumed() == 0);
  CHECK(h.ctx.notices.size() == 30);  // five s values per k, k = 1..6
  CHECK(h.ctx.notices.front() ==
        "hyperband_finite_theoretical: skipped bracket k=1, s=4 (n=1, B=2): no admissible inner s");
}

TEST_CASE("hyperband_finite_theoretical runs its first bracket at k=8 for R=81") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    return nu_of(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  RecordingFactory factory;
  HyperbandResult result = hyperband_finite_theoretical(h.ctx, 81, 3, factory.fn(), 8);
  REQUIRE(result.trajectory.size() == 1);
  CHECK(result.trajectory[0].loop == 8);
  CHECK(result.trajectory[0].bracket_s == 0);
  CHECK(factory.request_sizes == std::vector<std::int64_t>{4});
  CHECK(h.ledger.consumed() == 4 * 27 + 1 * 81);  // inner s=1 for (n=4, B=256)
}

TEST_CASE("hyperband_finite_theoretical reports the widest bracket of each k") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    return nu_of(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  RecordingFactory factory;
  HyperbandResult result = hyperband_finite_theoretical(h.ctx, 81, 3, factory.fn(), 9);
  REQUIRE(result.trajectory.size() == 2);
  CHECK(result.trajectory[0].loop == 8);
  CHECK(result.trajectory[1].loop == 9);
  CHECK(result.trajectory[1].bracket_s == 1);  // s=4..2 skipped at B=512; s=1 is widest
  CHECK(result.trajectory[1].bracket == 1);    // ordinal of the s=1 bracket
  CHECK(factory.request_sizes == std::vector<std::int64_t>{4, 10, 7});
  CHECK(h.ledger.consumed() == 189 + 252 + 351);

  int skipped_k9 = 0;
  for (const auto& notice : h.ctx.notices)
    if (notice.find("k=9") != std::string::npos) ++skipped_k9;
  CHECK(skipped_k9 == 3);

  CHECK_THROWS_AS(hyperband_finite_theoretical(h.ctx, 81, 3, factory.fn(), 0), UsageError);
  CHECK_THROWS_AS(hyperband_finite_theoretical(h.ctx, 0, 3, factory.fn(), 3), UsageError);
}
