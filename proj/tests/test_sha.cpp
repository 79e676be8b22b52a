#include <algorithm>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "hbopt/replay.hpp"
#include "hbopt/rng.hpp"
#include "hbopt/sha.hpp"
#include "test_helpers.hpp"

using namespace hbopt;
using hbtest::Ctx;
using hbtest::FnOracle;
using hbtest::make_plain_arms;

namespace {

std::vector<std::pair<std::int64_t, std::int64_t>> pairs(const RungSchedule& s) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& e : s.entries) out.emplace_back(e.n_i, e.r_i);
  return out;
}

}  // namespace

TEST_CASE("rung_schedule reproduces the documented geometries") {
  CHECK(pairs(rung_schedule(81, 1, 4, 3)) ==
        std::vector<std::pair<std::int64_t, std::int64_t>>{{81, 1}, {27, 3}, {9, 9}, {3, 27}, {1, 81}});
  CHECK(pairs(rung_schedule(27, 3, 3, 3)) ==
        std::vector<std::pair<std::int64_t, std::int64_t>>{{27, 3}, {9, 9}, {3, 27}, {1, 81}});
  CHECK(pairs(rung_schedule(1, 81, 0, 3)) ==
        std::vector<std::pair<std::int64_t, std::int64_t>>{{1, 81}});

  // the final rung can be pinned to an exact level
  auto clamped = rung_schedule(81, 1, 4, 3, 80);
  CHECK(clamped.entries.back().r_i == 80);
  CHECK(clamped.entries[3].r_i == 27);

  // fractional starting resource floors per rung
  CHECK(pairs(rung_schedule(16, 1.5, 2, 2)) ==
        std::vector<std::pair<std::int64_t, std::int64_t>>{{16, 1}, {8, 3}, {4, 6}});
}

TEST_CASE("rung_schedule rejects degenerate geometries") {
  CHECK_THROWS_AS(rung_schedule(8, 1, 2, 3), UsageError);    // n_2 = 0
  CHECK_THROWS_AS(rung_schedule(4, 0.5, 1, 2), UsageError);  // r_0 = 0
  CHECK_THROWS_AS(rung_schedule(0, 1, 0, 3), UsageError);
  CHECK_THROWS_AS(rung_schedule(4, -1, 0, 3), UsageError);
  CHECK_THROWS_AS(rung_schedule(4, 1, 1, 1.5), UsageError);
  CHECK_THROWS_AS(rung_schedule(4, 1, -1, 2), UsageError);
}

TEST_CASE("sha_practical matches an independent interpreter on random replay tables") {
  SplitMix64 rng(424242);
  for (int trial = 0; trial < 20; ++trial) {
    double eta = rng.uniform01() < 0.5 ? 2 : 3;
    int s = rng.uniform01() < 0.5 ? 1 : 2;
    std::int64_t n = static_cast<std::int64_t>(std::pow(eta, s)) * rng.uniform_int(1, 4);
    RungSchedule sched = rung_schedule(n, 1, s, eta);

    // quantized random losses force tie handling through the arm_id order
    nlohmann::json doc = nlohmann::json::object();
    std::map<std::int64_t, std::map<std::int64_t, double>> table;
    for (std::int64_t a = 0; a < n; ++a) {
      nlohmann::json curve = nlohmann::json::object();
      for (const auto& e : sched.entries) {
        double loss = std::floor(rng.uniform01() * 8) / 8;
        curve[std::to_string(e.r_i)] = loss;
        table[a][e.r_i] = loss;
      }
      doc[std::to_string(a)] = curve;
    }

    // reference: straight-line reading of the elimination rule
    std::vector<std::int64_t> survivors(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < survivors.size(); ++i) survivors[i] = static_cast<std::int64_t>(i);
    std::vector<std::vector<std::int64_t>> rung_members;
    std::int64_t want_consumed = 0;
    std::size_t last = sched.entries.size() - 1;
    for (std::size_t i = 0; i < sched.entries.size(); ++i) {
      const RungEntry& e = sched.entries[i];
      rung_members.push_back(survivors);
      want_consumed += e.r_i * static_cast<std::int64_t>(survivors.size());
      std::int64_t keep = i == last ? 1 : static_cast<std::int64_t>(static_cast<double>(e.n_i) / eta);
      std::sort(survivors.begin(), survivors.end(), [&](std::int64_t a, std::int64_t b) {
        if (table[a][e.r_i] != table[b][e.r_i]) return table[a][e.r_i] < table[b][e.r_i];
        return a < b;
      });
      survivors.resize(static_cast<std::size_t>(std::min<std::int64_t>(
          keep, static_cast<std::int64_t>(survivors.size()))));
      std::sort(survivors.begin(), survivors.end());
    }
    std::int64_t want_best = survivors.front();
    double want_loss = table[want_best][sched.entries.back().r_i];

    auto oracle = load_replay(doc.dump());
    Ctx h(oracle.get());
    ShaResult result = sha_practical(h.ctx, make_plain_arms(n), sched, eta);

    CHECK(result.best_arm->arm_id == want_best);
    CHECK(result.best_loss == want_loss);
    CHECK(result.loss_resource_level == sched.entries.back().r_i);
    CHECK(result.ledger_consumed == want_consumed);
    CHECK(h.ledger.consumed() == want_consumed);

    // the trial log reproduces each rung's survivor set in arm order
    std::vector<std::vector<std::int64_t>> seen(sched.entries.size());
    for (const auto& rec : h.log.records())
      seen[static_cast<std::size_t>(rec.rung_i)].push_back(rec.arm_id);
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == rung_members[i]);
  }
}

TEST_CASE("sha_practical promotes the dominating arm and spends the exact budget") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    return 0.01 * static_cast<double>(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  RungSchedule sched = rung_schedule(9, 9, 2, 3, 81);
  ShaResult result = sha_practical(h.ctx, make_plain_arms(9), sched, 3);
  CHECK(result.best_arm->arm_id == 0);
  CHECK(result.best_loss == doctest::Approx(1.0 / 81).epsilon(1e-12));
  CHECK(result.loss_resource_level == 81);
  CHECK(result.ledger_consumed == 243);  // 9*9 + 3*27 + 1*81
  CHECK(oracle.calls == 9 + 3 + 1);
}

TEST_CASE("sha_practical is invariant to the input order of arms") {
  auto run = [](const std::vector<std::int64_t>& order) {
    FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
      return std::cos(static_cast<double>(arm.arm_id) * 1.7) + 1.0 / static_cast<double>(r);
    });
    Ctx h(&oracle);
    std::vector<ArmPtr> arms;
    for (std::int64_t id : order) arms.push_back(hbtest::make_arm(id));
    return sha_practical(h.ctx, std::move(arms), rung_schedule(9, 1, 2, 3), 3);
  };
  ShaResult sorted = run({0, 1, 2, 3, 4, 5, 6, 7, 8});
  ShaResult shuffled = run({5, 2, 8, 0, 7, 1, 4, 6, 3});
  CHECK(sorted.best_arm->arm_id == shuffled.best_arm->arm_id);
  CHECK(sorted.best_loss == shuffled.best_loss);
  CHECK(sorted.ledger_consumed == shuffled.ledger_consumed);
}

TEST_CASE("sha_practical keeps finite arms alive when some arms fail") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    if (arm.arm_id == 0) return failure_loss();
    return 0.1 * static_cast<double>(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  ShaResult result = sha_practical(h.ctx, make_plain_arms(4), rung_schedule(4, 1, 1, 2), 2);
  CHECK(result.best_arm->arm_id == 1);
  CHECK(h.ledger.consumed() == 4 * 1 + 2 * 2);  // the failed arm is still charged at rung 0

  FnOracle all_bad([](ArmState&, std::int64_t, std::int64_t) { return failure_loss(); });
  Ctx h2(&all_bad);
  CHECK_THROWS_AS(sha_practical(h2.ctx, make_plain_arms(4), rung_schedule(4, 1, 1, 2), 2),
                  AllArmsFailedError);
}

TEST_CASE("sha_practical incumbent policy changes the reported loss, not the survivor") {
  auto run = [](IncumbentPolicy policy) {
    FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
      return 0.1 * static_cast<double>(arm.arm_id) + 0.01 * static_cast<double>(r);
    });
    Ctx h(&oracle);
    h.ctx.incumbent_policy = policy;
    return sha_practical(h.ctx, make_plain_arms(3), rung_schedule(3, 1, 1, 3), 3);
  };
  ShaResult at_top = run(IncumbentPolicy::max_resource);
  CHECK(at_top.best_arm->arm_id == 0);
  CHECK(at_top.best_loss == doctest::Approx(0.03));
  CHECK(at_top.loss_resource_level == 3);
  ShaResult global = run(IncumbentPolicy::paper);
  CHECK(global.best_arm->arm_id == 0);
  CHECK(global.best_loss == doctest::Approx(0.01));
  CHECK(global.loss_resource_level == 1);
}

TEST_CASE("sha_practical validates its inputs") {
  FnOracle oracle([](ArmState&, std::int64_t, std::int64_t) { return 0.5; });
  Ctx h(&oracle);
  CHECK_THROWS_AS(sha_practical(h.ctx, make_plain_arms(5), rung_schedule(9, 1, 2, 3), 3),
                  UsageError);
  CHECK_THROWS_AS(sha_practical(h.ctx, make_plain_arms(9), RungSchedule{}, 3), UsageError);
  CHECK_THROWS_AS(sha_practical(h.ctx, make_plain_arms(9), rung_schedule(9, 1, 2, 3), 1.2),
                  UsageError);
}

TEST_CASE("sha_infinite follows the hand-traced run for n=8, B=48") {
  const std::vector<double> nu{0.40, 0.12, 0.55, 0.30, 0.22, 0.70, 0.05, 0.62};
  FnOracle oracle([&](ArmState& arm, std::int64_t r, std::int64_t) {
    return nu[static_cast<std::size_t>(arm.arm_id)] + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  ShaResult result = sha_infinite(h.ctx, make_plain_arms(8), 48);

  // incremental pulls 2, 4, 8 -> cumulative levels 2, 6, 14; output level
  // floor((48/2)/3) = 8 is inserted when rung 2 steps across it
  CHECK(result.best_arm->arm_id == 6);
  CHECK(result.loss_resource_level == 8);
  CHECK(result.best_loss == doctest::Approx(0.05 + 1.0 / 8).epsilon(1e-12));
  CHECK(result.ledger_consumed == 48);
  CHECK(h.ledger.consumed() == 48);
  const auto& levels = result.best_arm->loss_at;
  REQUIRE(levels.size() == 4);
  CHECK(levels.count(2) == 1);
  CHECK(levels.count(6) == 1);
  CHECK(levels.count(8) == 1);
  CHECK(levels.count(14) == 1);
}

TEST_CASE("sha_infinite validates arm count and budget") {
  FnOracle oracle([](ArmState&, std::int64_t, std::int64_t) { return 0.5; });
  Ctx h(&oracle);
  CHECK_THROWS_WITH_AS(sha_infinite(h.ctx, make_plain_arms(6), 100),
                       doctest::Contains("power of two"), UsageError);
  CHECK_THROWS_WITH_AS(sha_infinite(h.ctx, make_plain_arms(8), 23),
                       doctest::Contains("needs >= 24"), UsageError);
}

TEST_CASE("sha_infinite never exceeds its pull budget") {
  SplitMix64 rng(777);
  for (int trial = 0; trial < 12; ++trial) {
    std::int64_t n = std::int64_t{1} << rng.uniform_int(1, 6);
    std::int64_t k = ceil_log2(n);
    std::int64_t B = n * k + rng.uniform_int(0, 4000);
    FnOracle oracle([&](ArmState& arm, std::int64_t r, std::int64_t) {
      return std::sin(static_cast<double>(arm.arm_id) * 3.1) + 1.0 / std::sqrt(static_cast<double>(r));
    });
    Ctx h(&oracle);
    ShaResult result = sha_infinite(h.ctx, make_plain_arms(n), B);
    CHECK(result.ledger_consumed <= B);
    CHECK(result.loss_resource_level == (B / 2) / k);
    CHECK(result.best_arm->max_observed_resource >= result.loss_resource_level);
  }
}

TEST_CASE("finite_theoretical_s picks the smallest admissible aggressiveness") {
  CHECK(finite_theoretical_s(27, 324, 81, 3) == 3);
  CHECK(finite_theoretical_s(1, 17, 17, 3) == 0);
  CHECK(finite_theoretical_s(27, 27 * 81, 81, 3) == 0);
  CHECK(finite_theoretical_s(27, 27 * 81 - 1, 81, 3) == 1);  // t=1: 27*81*2/3 = 1458
  CHECK(finite_theoretical_s(10, 200, 25, 2.5) == 1);
  CHECK_THROWS_WITH_AS(finite_theoretical_s(2, 1, 2, 2), doctest::Contains("no admissible s"),
                       UsageError);
  CHECK_THROWS_AS(finite_theoretical_s(0, 10, 10, 2), UsageError);
  CHECK_THROWS_AS(finite_theoretical_s(2, 10, 10, 1.5), UsageError);
}

TEST_CASE("sha_finite_theoretical runs the documented bracket for (27, 324, 81, 3)") {
  FnOracle oracle([](ArmState& arm, std::int64_t r, std::int64_t) {
    return 0.01 * static_cast<double>(arm.arm_id) + 1.0 / static_cast<double>(r);
  });
  Ctx h(&oracle);
  ShaResult result = sha_finite_theoretical(h.ctx, make_plain_arms(27), 324, 81, 3);
  CHECK(result.best_arm->arm_id == 0);
  CHECK(result.best_loss == doctest::Approx(1.0 / 81).epsilon(1e-12));
  CHECK(result.loss_resource_level == 81);
  CHECK(result.ledger_consumed == 324);  // 27*3 + 9*9 + 3*27 + 1*81

  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> rungs;  // rung -> (count, level)
  for (const auto& rec : h.log.records()) {
    rungs[rec.rung_i].first += 1;
    rungs[rec.rung_i].second = rec.resource;
  }
  REQUIRE(rungs.size() == 4);
  CHECK(rungs[0] == std::pair<std::int64_t, std::int64_t>{27, 3});
  CHECK(rungs[1] == std::pair<std::int64_t, std::int64_t>{9, 9});
  CHECK(rungs[2] == std::pair<std::int64_t, std::int64_t>{3, 27});
  CHECK(rungs[3] == std::pair<std::int64_t, std::int64_t>{1, 81});
}

TEST_CASE("sha_finite_theoretical with one arm spends exactly R") {
  FnOracle oracle([](ArmState&, std::int64_t r, std::int64_t) { return 1.0 / static_cast<double>(r); });
  Ctx h(&oracle);
  ShaResult result = sha_finite_theoretical(h.ctx, make_plain_arms(1), 17, 17, 3);
  CHECK(result.ledger_consumed == 17);
  CHECK(result.loss_resource_level == 17);
  CHECK(result.best_arm->arm_id == 0);
}

TEST_CASE("sha_finite_theoretical stays within budget across random shapes") {
  SplitMix64 rng(909);
  int ran = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::int64_t n = rng.uniform_int(1, 40);
    std::int64_t R = std::vector<std::int64_t>{9, 16, 81}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
    double eta = rng.uniform01() < 0.7 ? 2 : 3;
    std::int64_t B = rng.uniform_int(n * R / 4 + 1, 3 * n * R);
    FnOracle oracle([&](ArmState& arm, std::int64_t r, std::int64_t) {
      return std::cos(static_cast<double>(arm.arm_id)) + 1.0 / static_cast<double>(r);
    });
    Ctx h(&oracle);
    try {
      ShaResult result = sha_finite_theoretical(h.ctx, make_plain_arms(n), B, R, eta);
      CHECK(result.ledger_consumed <= B);
      CHECK(result.loss_resource_level == R);
      ++ran;
    } catch (const UsageError&) {
      // no admissible s for this (n, B, R): the same predicate must agree
      CHECK_THROWS_AS(finite_theoretical_s(n, B, R, eta), UsageError);
    }
  }
  CHECK(ran >= 20);  // the draw ranges make most shapes runnable
}
