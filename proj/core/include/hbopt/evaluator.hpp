#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hbopt/common.hpp"
#include "hbopt/search_space.hpp"

namespace hbopt {

namespace sim {
class SyntheticArm;
}

enum class ArmStatus { active, eliminated, failed };
enum class Accounting { full, delta };
enum class IncumbentPolicy { max_resource, paper };

std::string to_string(ArmStatus s);
std::string to_string(Accounting a);
std::string to_string(IncumbentPolicy p);
Accounting accounting_from_string(const std::string& s);
IncumbentPolicy incumbent_policy_from_string(const std::string& s);

struct ArmState {
  std::int64_t arm_id = 0;
  space::Configuration config;
  std::shared_ptr<sim::SyntheticArm> synthetic;  // set for simulator-backed arms
  double limit_loss = std::numeric_limits<double>::quiet_NaN();  // ground-truth nu_i (simulator only)
  std::int64_t max_observed_resource = 0;
  std::map<std::int64_t, double> loss_at;
  ArmStatus status = ArmStatus::active;

  double loss_at_level(std::int64_t level) const;
};

using ArmPtr = std::shared_ptr<ArmState>;

class LossOracle {
 public:
  virtual ~LossOracle() = default;
  // `resource` is a cumulative training level, never an increment. A per-arm
  // failure is reported by throwing OracleFailure or returning a non-finite
  // value; both become the failure sentinel.
  virtual double evaluate(ArmState& arm, std::int64_t resource, std::int64_t trial_id) = 0;
  virtual bool resumable() const = 0;
};

struct TrialRecord {
  std::int64_t trial_id = 0;
  std::int64_t arm_id = 0;
  std::int64_t bracket_s = 0;
  std::int64_t rung_i = 0;
  std::int64_t resource = 0;  // cumulative level evaluated at
  std::int64_t charged = 0;   // ledger units charged for this evaluation
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";  // ok | failed | timeout
  std::int64_t wall_millis = 0;
  std::string timestamp;

  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& j);
};

class BudgetLedger {
 public:
  explicit BudgetLedger(std::optional<std::int64_t> cap = std::nullopt) : cap_(cap) {}

  bool fits(std::int64_t units) const {
    return !cap_ || consumed_.load() + units <= *cap_;
  }
  void charge(std::int64_t units) {
    if (units < 0) throw UsageError("ledger charge must be non-negative");
    std::int64_t before = consumed_.fetch_add(units);
    if (cap_ && before + units > *cap_) {
      consumed_.fetch_sub(units);
      throw BudgetExceededError("budget cap " + std::to_string(*cap_) +
                                " exceeded (consumed " + std::to_string(before) +
                                ", requested " + std::to_string(units) + ")");
    }
  }
  std::int64_t consumed() const { return consumed_.load(); }
  std::optional<std::int64_t> cap() const { return cap_; }

 private:
  std::atomic<std::int64_t> consumed_{0};
  std::optional<std::int64_t> cap_;
};

// Append-only JSONL sink; also keeps records in memory for reporting. All
// appends go through one mutex, satisfying the single-appender contract.
class TrialLog {
 public:
  TrialLog() = default;
  explicit TrialLog(const std::filesystem::path& file);

  void append(const TrialRecord& rec);
  void append_event(const nlohmann::json& event);
  const std::vector<TrialRecord>& records() const { return records_; }

 private:
  void write_line(const std::string& line);
  std::mutex mu_;
  std::vector<TrialRecord> records_;
  std::ofstream out_;
};

// Tracks the run-wide incumbent from every observed (arm, level, loss).
//   max_resource: smallest loss among evaluations at the highest level reached
//   paper:        smallest loss over all intermediate losses
struct IncumbentTracker {
  explicit IncumbentTracker(IncumbentPolicy policy) : policy(policy) {}
  IncumbentPolicy policy;
  std::int64_t best_level = -1;
  double best_loss = std::numeric_limits<double>::quiet_NaN();
  ArmPtr best_arm;

  void observe(const ArmPtr& arm, std::int64_t level, double loss);
  bool has_incumbent() const { return best_arm != nullptr; }
};

struct RunContext {
  LossOracle* oracle = nullptr;
  BudgetLedger* ledger = nullptr;
  TrialLog* log = nullptr;            // optional
  IncumbentTracker* tracker = nullptr;  // optional
  int max_parallel = 1;
  Accounting accounting = Accounting::full;
  IncumbentPolicy incumbent_policy = IncumbentPolicy::max_resource;
  std::int64_t next_trial_id = 0;
  std::int64_t next_arm_id = 0;
  std::vector<std::string> notices;  // skipped-bracket notes and similar
};

// Evaluates every arm at the cumulative level `resource` with up to
// ctx.max_parallel concurrent oracle calls. Losses come back in input (arm)
// order; the rung is a barrier. Throws BudgetExceededError before starting a
// rung that cannot fit, AllArmsFailedError if no arm returns a finite loss.
std::vector<double> evaluate_rung(RunContext& ctx, const std::vector<ArmPtr>& arms,
                                  std::int64_t resource, std::int64_t bracket_s,
                                  std::int64_t rung_i,
                                  std::optional<Accounting> accounting_override = std::nullopt);

// The k arms with smallest losses; ties break toward the smaller arm_id and
// the failure sentinel ranks after every finite loss.
std::vector<ArmPtr> top_k(const std::vector<ArmPtr>& arms, const std::vector<double>& losses,
                          std::int64_t k);

}  // namespace hbopt
