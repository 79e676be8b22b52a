#include "hbopt/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <numeric>
#include <thread>

namespace hbopt {

using nlohmann::json;

std::string to_string(ArmStatus s) {
  switch (s) {
    case ArmStatus::active: return "active";
    case ArmStatus::eliminated: return "eliminated";
    case ArmStatus::failed: return "failed";
  }
  return "?";
}

std::string to_string(Accounting a) {
  return a == Accounting::full ? "full" : "delta";
}

std::string to_string(IncumbentPolicy p) {
  return p == IncumbentPolicy::max_resource ? "max_resource" : "paper";
}

Accounting accounting_from_string(const std::string& s) {
  if (s == "full") return Accounting::full;
  if (s == "delta") return Accounting::delta;
  throw UsageError("unknown accounting mode '" + s + "' (expected full or delta)");
}

IncumbentPolicy incumbent_policy_from_string(const std::string& s) {
  if (s == "max_resource") return IncumbentPolicy::max_resource;
  if (s == "paper") return IncumbentPolicy::paper;
  throw UsageError("unknown incumbent policy '" + s + "' (expected max_resource or paper)");
}

double ArmState::loss_at_level(std::int64_t level) const {
  auto it = loss_at.find(level);
  if (it == loss_at.end())
    throw UsageError("arm " + std::to_string(arm_id) + " has no recorded loss at level " +
                     std::to_string(level));
  return it->second;
}

json TrialRecord::to_json() const {
  json j{{"type", "trial"},
         {"trial_id", trial_id},
         {"arm_id", arm_id},
         {"bracket_s", bracket_s},
         {"rung_i", rung_i},
         {"resource", resource},
         {"charged", charged},
         {"status", status},
         {"wall_millis", wall_millis},
         {"timestamp", timestamp}};
  if (is_failure(loss))
    j["loss"] = nullptr;
  else
    j["loss"] = loss;
  return j;
}

TrialRecord TrialRecord::from_json(const json& j) {
  TrialRecord r;
  r.trial_id = j.at("trial_id").get<std::int64_t>();
  r.arm_id = j.at("arm_id").get<std::int64_t>();
  r.bracket_s = j.at("bracket_s").get<std::int64_t>();
  r.rung_i = j.at("rung_i").get<std::int64_t>();
  r.resource = j.at("resource").get<std::int64_t>();
  r.charged = j.value("charged", r.resource);
  r.loss = j.at("loss").is_null() ? failure_loss() : j.at("loss").get<double>();
  r.status = j.at("status").get<std::string>();
  r.wall_millis = j.value("wall_millis", std::int64_t{0});
  r.timestamp = j.value("timestamp", std::string{});
  return r;
}

TrialLog::TrialLog(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  out_.open(file, std::ios::app);
  if (!out_) throw UsageError("cannot open trial log '" + file.string() + "' for append");
}

void TrialLog::write_line(const std::string& line) {
  if (out_.is_open()) {
    out_ << line << '\n';
    out_.flush();
  }
}

void TrialLog::append(const TrialRecord& rec) {
  std::lock_guard<std::mutex> lock(mu_);
  records_.push_back(rec);
  write_line(rec.to_json().dump());
}

void TrialLog::append_event(const json& event) {
  std::lock_guard<std::mutex> lock(mu_);
  write_line(event.dump());
}

void IncumbentTracker::observe(const ArmPtr& arm, std::int64_t level, double loss) {
  if (is_failure(loss)) return;
  if (policy == IncumbentPolicy::paper) {
    if (!best_arm || loss < best_loss) {
      best_arm = arm;
      best_loss = loss;
      best_level = level;
    }
    return;
  }
  if (level > best_level) {
    best_level = level;
    best_loss = loss;
    best_arm = arm;
  } else if (level == best_level && loss < best_loss) {
    best_loss = loss;
    best_arm = arm;
  }
}

namespace {

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct SlotResult {
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
  std::int64_t wall_millis = 0;
};

SlotResult run_one(LossOracle& oracle, ArmState& arm, std::int64_t resource,
                   std::int64_t trial_id) {
  SlotResult slot;
  auto start = std::chrono::steady_clock::now();
  try {
    slot.loss = oracle.evaluate(arm, resource, trial_id);
    if (is_failure(slot.loss)) {
      slot.loss = failure_loss();
      slot.status = "failed";
    }
  } catch (const OracleFailure& e) {
    slot.loss = failure_loss();
    slot.status = e.kind == OracleFailure::Kind::timeout ? "timeout" : "failed";
  }
  slot.wall_millis = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return slot;
}

}  // namespace

std::vector<double> evaluate_rung(RunContext& ctx, const std::vector<ArmPtr>& arms,
                                  std::int64_t resource, std::int64_t bracket_s,
                                  std::int64_t rung_i,
                                  std::optional<Accounting> accounting_override) {
  if (!ctx.oracle || !ctx.ledger) throw UsageError("evaluate_rung: context needs oracle and ledger");
  if (resource < 1) throw UsageError("evaluate_rung: resource must be >= 1");
  if (arms.empty()) return {};

  Accounting mode = accounting_override.value_or(ctx.accounting);
  std::vector<std::int64_t> charges(arms.size());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const ArmState& arm = *arms[i];
    if (arm.status != ArmStatus::active)
      throw UsageError("evaluate_rung: arm " + std::to_string(arm.arm_id) + " is not active");
    if (resource < arm.max_observed_resource)
      throw UsageError("evaluate_rung: arm " + std::to_string(arm.arm_id) +
                       " already observed level " + std::to_string(arm.max_observed_resource) +
                       " > requested " + std::to_string(resource));
    charges[i] = mode == Accounting::full ? resource : resource - arm.max_observed_resource;
    total += charges[i];
  }
  if (!ctx.ledger->fits(total))
    throw BudgetExceededError("rung needs " + std::to_string(total) + " units but only " +
                              std::to_string(*ctx.ledger->cap() - ctx.ledger->consumed()) +
                              " remain under cap " + std::to_string(*ctx.ledger->cap()));

  std::int64_t base_trial_id = ctx.next_trial_id;
  ctx.next_trial_id += static_cast<std::int64_t>(arms.size());

  std::vector<SlotResult> slots(arms.size());
  int workers = std::min<int>(ctx.max_parallel, static_cast<int>(arms.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < arms.size(); ++i)
      slots[i] = run_one(*ctx.oracle, *arms[i], resource, base_trial_id + static_cast<std::int64_t>(i));
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < arms.size(); i = next.fetch_add(1))
        slots[i] = run_one(*ctx.oracle, *arms[i], resource, base_trial_id + static_cast<std::int64_t>(i));
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Post-barrier bookkeeping runs single-threaded in arm order so that trial
  // records, ledger charges, and incumbent updates are deterministic.
  std::vector<double> losses(arms.size());
  std::size_t finite = 0;
  std::string timestamp = iso8601_now();
  for (std::size_t i = 0; i < arms.size(); ++i) {
    ArmState& arm = *arms[i];
    const SlotResult& slot = slots[i];
    ctx.ledger->charge(charges[i]);  // failed arms consume what they requested
    arm.loss_at[resource] = slot.loss;
    arm.max_observed_resource = resource;
    if (is_failure(slot.loss)) {
      arm.status = ArmStatus::failed;
    } else {
      ++finite;
      if (ctx.tracker) ctx.tracker->observe(arms[i], resource, slot.loss);
    }
    losses[i] = slot.loss;
    if (ctx.log) {
      TrialRecord rec;
      rec.trial_id = base_trial_id + static_cast<std::int64_t>(i);
      rec.arm_id = arm.arm_id;
      rec.bracket_s = bracket_s;
      rec.rung_i = rung_i;
      rec.resource = resource;
      rec.charged = charges[i];
      rec.loss = slot.loss;
      rec.status = slot.status;
      rec.wall_millis = slot.wall_millis;
      rec.timestamp = timestamp;
      ctx.log->append(rec);
    }
  }
  if (finite == 0)
    throw AllArmsFailedError("all " + std::to_string(arms.size()) +
                             " arms failed at resource level " + std::to_string(resource));
  return losses;
}

std::vector<ArmPtr> top_k(const std::vector<ArmPtr>& arms, const std::vector<double>& losses,
                          std::int64_t k) {
  if (arms.size() != losses.size()) throw UsageError("top_k: arms and losses are misaligned");
  if (k < 0 || k > static_cast<std::int64_t>(arms.size()))
    throw UsageError("top_k: k out of range");
  std::vector<std::size_t> order(arms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    bool fa = is_failure(losses[a]), fb = is_failure(losses[b]);
    if (fa != fb) return fb;
    if (!fa && losses[a] != losses[b]) return losses[a] < losses[b];
    return arms[a]->arm_id < arms[b]->arm_id;
  });
  std::vector<ArmPtr> kept;
  kept.reserve(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) kept.push_back(arms[order[static_cast<std::size_t>(i)]]);
  return kept;
}

}  // namespace hbopt
