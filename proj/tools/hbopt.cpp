#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "hbopt/baselines.hpp"
#include "hbopt/hyperband.hpp"
#include "hbopt/niab.hpp"
#include "hbopt/replay.hpp"
#include "hbopt/theory.hpp"
#include "hbopt/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitTruncated = 3;
constexpr int kExitFailure = 4;

json config_to_json(const hbopt::space::Configuration& config) {
  json out = json::object();
  for (const auto& [name, value] : config.values) {
    if (std::holds_alternative<double>(value))
      out[name] = std::get<double>(value);
    else if (std::holds_alternative<std::int64_t>(value))
      out[name] = std::get<std::int64_t>(value);
    else
      out[name] = std::get<std::string>(value);
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw hbopt::UsageError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw hbopt::UsageError(path + ": " + e.what());
  }
  return doc;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw hbopt::UsageError("cannot write " + path.string());
  out << text;
}

std::string render_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    std::ostringstream os;
    os << static_cast<std::int64_t>(v);
    return os.str();
  }
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// brackets

struct BracketsOpts {
  std::int64_t R = 81;
  double eta = 3;
  std::optional<std::int64_t> n_max;
  std::optional<std::int64_t> n_min;
  bool n_max_rule = false;
  bool as_json = false;
};

hbopt::HyperbandParams make_params(std::int64_t R, double eta, std::optional<std::int64_t> n_max,
                                   std::optional<std::int64_t> n_min, bool n_max_rule) {
  hbopt::HyperbandParams params;
  params.R = R;
  params.eta = eta;
  params.n_max = n_max;
  params.n_min = n_min;
  if (n_max_rule) {
    if (n_max) throw hbopt::UsageError("--n-max and --n-max-rule are mutually exclusive");
    params.n_max = std::max<std::int64_t>(9, R / 1000);
  }
  params.check();
  return params;
}

std::int64_t bracket_budget(const hbopt::BracketPlan& plan) {
  std::int64_t total = 0;
  for (const auto& entry : plan.schedule.entries) total += entry.n_i * entry.r_i;
  return total;
}

int cmd_brackets(const BracketsOpts& opts) {
  hbopt::HyperbandParams params =
      make_params(opts.R, opts.eta, opts.n_max, opts.n_min, opts.n_max_rule);
  std::vector<hbopt::BracketPlan> plans = hbopt::compute_brackets(params);

  if (opts.as_json) {
    json out{{"R", params.R},
             {"eta", params.eta},
             {"s_max", params.s_max()},
             {"s_lo", params.s_lo()},
             {"B", params.budget()}};
    json brackets = json::array();
    std::int64_t total = 0;
    for (const auto& plan : plans) {
      json rungs = json::array();
      for (const auto& entry : plan.schedule.entries)
        rungs.push_back({{"i", entry.rung_i}, {"n", entry.n_i}, {"r", entry.r_i}});
      std::int64_t budget = bracket_budget(plan);
      total += budget;
      brackets.push_back(
          {{"s", plan.s}, {"n", plan.n}, {"r", plan.r}, {"budget", budget}, {"rungs", rungs}});
    }
    out["brackets"] = brackets;
    out["total_budget"] = total;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }

  std::size_t max_rungs = 0;
  for (const auto& plan : plans) max_rungs = std::max(max_rungs, plan.schedule.entries.size());

  std::ostringstream os;
  os << "R=" << params.R << " eta=" << render_number(params.eta) << " s_max=" << params.s_max()
     << " B=" << params.budget() << "\n\n";
  os << std::setw(4) << "i";
  for (const auto& plan : plans)
    os << " | " << std::setw(6) << ("s=" + std::to_string(plan.s)) << std::setw(7) << "";
  os << "\n" << std::setw(4) << "";
  for (std::size_t c = 0; c < plans.size(); ++c)
    os << " | " << std::setw(6) << "n_i" << std::setw(7) << "r_i";
  os << "\n";
  for (std::size_t i = 0; i < max_rungs; ++i) {
    os << std::setw(4) << i;
    for (const auto& plan : plans) {
      if (i < plan.schedule.entries.size()) {
        const auto& entry = plan.schedule.entries[i];
        os << " | " << std::setw(6) << entry.n_i << std::setw(7) << entry.r_i;
      } else {
        os << " | " << std::setw(6) << "" << std::setw(7) << "";
      }
    }
    os << "\n";
  }
  os << std::setw(4) << "B_s";
  std::int64_t total = 0;
  for (const auto& plan : plans) {
    std::int64_t budget = bracket_budget(plan);
    total += budget;
    os << " | " << std::setw(13) << budget;
  }
  os << "\ntotal budget over brackets: " << total << "\n";
  std::cout << os.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tune

struct TuneOpts {
  std::string space_path;
  std::string trainer_command;
  std::string replay_path;
  std::string manifest_path;
  std::string out_dir;
  std::int64_t R = 81;
  double eta = 3;
  std::optional<std::int64_t> n_max;
  std::optional<std::int64_t> n_min;
  bool n_max_rule = false;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> budget;
  std::int64_t loops = 1;  // 0: repeat until the budget cap
  std::string accounting = "full";
  std::string incumbent = "max_resource";
  int max_parallel = 1;
  double timeout_secs = 0;
  std::string resource_unit = "iterations";
  std::string checkpoint_dir;

  // CLI11 option handles, used to decide whether a manifest value is overridden
  std::map<std::string, CLI::Option*> handles;

  bool given(const std::string& name) const {
    auto it = handles.find(name);
    return it != handles.end() && it->second->count() > 0;
  }
};

void apply_manifest(TuneOpts& opts) {
  json doc = read_json_file(opts.manifest_path);
  const json params = doc.value("params", json::object());
  auto take_int = [&](const char* flag, const char* key, auto& field) {
    if (!opts.given(flag) && params.contains(key) && !params[key].is_null())
      field = params[key].get<std::int64_t>();
  };
  if (!opts.given("--space") && doc.contains("space")) opts.space_path = doc["space"];
  take_int("--R", "R", opts.R);
  if (!opts.given("--eta") && params.contains("eta")) opts.eta = params["eta"];
  if (!opts.given("--n-max") && params.contains("n_max") && !params["n_max"].is_null())
    opts.n_max = params["n_max"].get<std::int64_t>();
  if (!opts.given("--n-min") && params.contains("n_min") && !params["n_min"].is_null())
    opts.n_min = params["n_min"].get<std::int64_t>();
  if (!opts.given("--seed") && params.contains("seed"))
    opts.seed = params["seed"].get<std::uint64_t>();
  if (!opts.given("--budget") && params.contains("budget") && !params["budget"].is_null())
    opts.budget = params["budget"].get<std::int64_t>();
  take_int("--loops", "loops", opts.loops);
  if (!opts.given("--accounting") && params.contains("accounting"))
    opts.accounting = params["accounting"];
  if (!opts.given("--incumbent") && params.contains("incumbent"))
    opts.incumbent = params["incumbent"];
  if (!opts.given("--max-parallel") && params.contains("max_parallel"))
    opts.max_parallel = params["max_parallel"].get<int>();
  if (!opts.given("--timeout-secs") && params.contains("timeout_secs"))
    opts.timeout_secs = params["timeout_secs"].get<double>();
  const json backend = doc.value("backend", json::object());
  std::string type = backend.value("type", "");
  if (!opts.given("--trainer") && type == "trainer")
    opts.trainer_command = backend.value("command", "");
  if (!opts.given("--replay") && type == "replay") opts.replay_path = backend.value("path", "");
  if (!opts.given("--resource-unit") && backend.contains("resource_unit"))
    opts.resource_unit = backend["resource_unit"];
  if (!opts.given("--checkpoint-dir") && backend.contains("checkpoint_dir"))
    opts.checkpoint_dir = backend["checkpoint_dir"];
}

json tune_manifest(const TuneOpts& opts) {
  json params{{"R", opts.R},
              {"eta", opts.eta},
              {"n_max", opts.n_max ? json(*opts.n_max) : json(nullptr)},
              {"n_min", opts.n_min ? json(*opts.n_min) : json(nullptr)},
              {"seed", opts.seed},
              {"budget", opts.budget ? json(*opts.budget) : json(nullptr)},
              {"loops", opts.loops},
              {"accounting", opts.accounting},
              {"incumbent", opts.incumbent},
              {"max_parallel", opts.max_parallel},
              {"timeout_secs", opts.timeout_secs}};
  json backend;
  if (!opts.trainer_command.empty()) {
    backend = json{{"type", "trainer"},
                   {"command", opts.trainer_command},
                   {"resource_unit", opts.resource_unit}};
    if (!opts.checkpoint_dir.empty()) backend["checkpoint_dir"] = opts.checkpoint_dir;
  } else {
    backend = json{{"type", "replay"}, {"path", opts.replay_path}};
  }
  return json{{"command", "tune"},
              {"params", params},
              {"space", opts.space_path},
              {"backend", backend},
              {"out", opts.out_dir}};
}

int cmd_tune(TuneOpts& opts) {
  if (!opts.manifest_path.empty()) apply_manifest(opts);
  if (opts.space_path.empty()) throw hbopt::UsageError("tune: --space is required");
  if (opts.out_dir.empty()) throw hbopt::UsageError("tune: --out is required");
  bool has_trainer = !opts.trainer_command.empty();
  bool has_replay = !opts.replay_path.empty();
  if (has_trainer == has_replay)
    throw hbopt::UsageError("tune: exactly one of --trainer or --replay is required");
  if (opts.loops == 0 && !opts.budget)
    throw hbopt::UsageError("tune: --loops 0 (run until cap) requires --budget");
  if (opts.loops < 0) throw hbopt::UsageError("tune: --loops must be >= 0");

  hbopt::space::SearchSpace space = hbopt::space::load_space_file(opts.space_path);
  hbopt::HyperbandParams params =
      make_params(opts.R, opts.eta, opts.n_max, opts.n_min, opts.n_max_rule);
  params.incumbent_policy = hbopt::incumbent_policy_from_string(opts.incumbent);
  params.outer_loops = opts.loops == 0 ? std::nullopt : std::optional<std::int64_t>(opts.loops);

  fs::create_directories(opts.out_dir);
  write_text_file(fs::path(opts.out_dir) / "manifest.json", tune_manifest(opts).dump(2) + "\n");

  std::unique_ptr<hbopt::LossOracle> oracle;
  if (has_replay) {
    oracle = hbopt::load_replay_file(opts.replay_path);
  } else {
    hbopt::TrainerOptions topts;
    topts.command = opts.trainer_command;
    topts.resource_unit = opts.resource_unit;
    topts.checkpoint_root = opts.checkpoint_dir.empty()
                                ? fs::path(opts.out_dir) / "checkpoints"
                                : fs::path(opts.checkpoint_dir);
    topts.timeout_secs = opts.timeout_secs;
    oracle = std::make_unique<hbopt::TrainerOracle>(std::move(topts));
  }

  hbopt::BudgetLedger ledger(opts.budget);
  hbopt::TrialLog log(fs::path(opts.out_dir) / "trials.jsonl");
  hbopt::RunContext ctx;
  ctx.oracle = oracle.get();
  ctx.ledger = &ledger;
  ctx.log = &log;
  ctx.max_parallel = opts.max_parallel;
  ctx.accounting = hbopt::accounting_from_string(opts.accounting);
  ctx.incumbent_policy = params.incumbent_policy;

  hbopt::SplitMix64 rng(opts.seed);
  hbopt::HyperbandResult result = hbopt::hyperband_practical(ctx, params, space, rng);

  for (const std::string& notice : ctx.notices) std::cerr << "notice: " << notice << "\n";

  const hbopt::TrajectoryPoint* final_point = nullptr;
  for (auto it = result.trajectory.rbegin(); it != result.trajectory.rend(); ++it)
    if (it->incumbent) {
      final_point = &*it;
      break;
    }
  if (!final_point) {
    std::cerr << "error: no incumbent was produced\n";
    return kExitFailure;
  }
  json best{{"arm_id", final_point->incumbent_arm},
            {"loss", final_point->incumbent_loss},
            {"resource", final_point->incumbent->max_observed_resource},
            {"config", config_to_json(final_point->incumbent->config)},
            {"ledger_consumed", ledger.consumed()},
            {"truncated", result.truncated}};
  write_text_file(fs::path(opts.out_dir) / "best.json", best.dump(2) + "\n");

  std::cout << "best arm " << final_point->incumbent_arm << " loss "
            << render_number(final_point->incumbent_loss) << " at resource "
            << final_point->incumbent->max_observed_resource << ", consumed " << ledger.consumed()
            << (result.truncated ? " (truncated by budget cap)" : "") << "\n";
  return result.truncated ? kExitTruncated : kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string instance_path;
  std::string family = "beta_continuous";
  double alpha = 1;
  double beta = 1;
  double nu_star = 0;
  std::vector<double> mu;
  std::string noise = "none";
  double noise_width = 0.25;
  std::string envelope_sign = "plus";
  double nu_hat = 0.25;
  std::optional<std::int64_t> horizon_R;

  std::string algo;
  std::int64_t trials = 1;
  std::vector<std::int64_t> budgets;
  std::optional<std::int64_t> n;
  std::int64_t R = 81;
  double eta = 3;
  std::optional<std::int64_t> n_max;
  std::optional<std::int64_t> n_min;
  double delta = 0.1;
  std::uint64_t seed = 0;
  int max_k = 20;
  std::string accounting = "full";
  std::string incumbent = "max_resource";
  int max_parallel = 1;
  std::string out_dir;
  bool as_json = false;

  std::map<std::string, CLI::Option*> handles;
  bool given(const std::string& name) const {
    auto it = handles.find(name);
    return it != handles.end() && it->second->count() > 0;
  }
};

hbopt::sim::TheoryInstance simulate_instance(const SimulateOpts& opts) {
  if (!opts.instance_path.empty())
    return hbopt::sim::TheoryInstance::from_json(read_json_file(opts.instance_path));
  hbopt::sim::TheoryInstance inst;
  if (opts.family == "beta_continuous")
    inst.family = hbopt::sim::Family::beta_continuous;
  else if (opts.family == "discrete")
    inst.family = hbopt::sim::Family::discrete;
  else if (opts.family == "stochastic")
    inst.family = hbopt::sim::Family::stochastic;
  else if (opts.family == "adversarial")
    inst.family = hbopt::sim::Family::adversarial;
  else
    throw hbopt::UsageError("simulate: unknown family " + opts.family);
  inst.alpha = opts.alpha;
  inst.beta = opts.beta;
  inst.nu_star = opts.nu_star;
  inst.mu = opts.mu;
  if (opts.noise == "none")
    inst.noise = hbopt::sim::Noise::none;
  else if (opts.noise == "bernoulli")
    inst.noise = hbopt::sim::Noise::bernoulli;
  else if (opts.noise == "uniform_bounded")
    inst.noise = hbopt::sim::Noise::uniform_bounded;
  else
    throw hbopt::UsageError("simulate: unknown noise " + opts.noise);
  inst.noise_width = opts.noise_width;
  if (opts.envelope_sign == "plus")
    inst.envelope_sign = hbopt::sim::EnvelopeSign::plus;
  else if (opts.envelope_sign == "alternating")
    inst.envelope_sign = hbopt::sim::EnvelopeSign::alternating;
  else if (opts.envelope_sign == "adversarial")
    inst.envelope_sign = hbopt::sim::EnvelopeSign::adversarial;
  else
    throw hbopt::UsageError("simulate: unknown envelope sign " + opts.envelope_sign);
  inst.nu_hat = opts.nu_hat;
  inst.horizon_R = opts.horizon_R;
  inst.seed = opts.seed;
  inst.check();
  return inst;
}

struct SimulateRun {
  std::int64_t budget = 0;
  std::int64_t trial = 0;
  std::int64_t consumed = 0;
  double regret = std::numeric_limits<double>::quiet_NaN();
  double loss = std::numeric_limits<double>::quiet_NaN();
};

SimulateRun run_one_simulation(const SimulateOpts& opts, const hbopt::sim::TheoryInstance& base,
                               std::int64_t budget, std::int64_t trial) {
  hbopt::sim::TheoryInstance inst = base;
  inst.seed = base.seed + static_cast<std::uint64_t>(trial);
  hbopt::SplitMix64 rng(inst.seed);
  double nu_star = hbopt::sim::nu_star_of(inst);

  bool capped = opts.algo == "hyperband" || opts.algo == "hyperband_inf";
  std::int64_t cap = budget;
  if (opts.algo == "random_2x") cap = 2 * budget;

  hbopt::sim::SimOracle oracle;
  hbopt::BudgetLedger ledger(capped ? std::optional<std::int64_t>(cap) : std::nullopt);
  hbopt::RunContext ctx;
  ctx.oracle = &oracle;
  ctx.ledger = &ledger;
  ctx.max_parallel = opts.max_parallel;
  ctx.accounting = hbopt::accounting_from_string(opts.accounting);
  ctx.incumbent_policy = hbopt::incumbent_policy_from_string(opts.incumbent);

  SimulateRun run;
  run.budget = budget;
  run.trial = trial;

  if (inst.family == hbopt::sim::Family::adversarial) {
    if (opts.algo != "uniform" && opts.algo != "random" && opts.algo != "random_2x")
      throw hbopt::UsageError(
          "simulate: the adversarial family supports only the uniform/random baselines");
    std::int64_t n = opts.n.value_or(50);
    hbopt::sim::AdversarialInstance adv =
        hbopt::sim::make_adversarial_instance(n, opts.delta, inst.alpha, inst.beta, rng,
                                              inst.nu_star);
    std::int64_t B = budget > 0 ? budget : adv.threshold_budget;
    if (opts.algo == "random_2x") B = 2 * B;
    hbopt::ShaResult res =
        opts.algo == "uniform"
            ? hbopt::uniform_allocation(ctx, adv.arms, B,
                                        opts.given("--R") ? std::optional<std::int64_t>(opts.R)
                                                          : std::nullopt)
            : hbopt::random_search(ctx, adv.arms, opts.R);
    run.consumed = ledger.consumed();
    run.loss = res.best_loss;
    run.regret = res.best_arm->limit_loss - nu_star;
    return run;
  }

  hbopt::ArmFactory factory = [&inst, &rng](hbopt::RunContext& c, std::int64_t count) {
    auto arms = hbopt::sim::make_arms(inst, rng, count, c.next_arm_id);
    c.next_arm_id += count;
    return arms;
  };

  if (opts.algo == "hyperband") {
    hbopt::HyperbandParams params = make_params(opts.R, opts.eta, opts.n_max, opts.n_min, false);
    params.incumbent_policy = ctx.incumbent_policy;
    params.outer_loops = std::nullopt;  // repeat until the cap truncates
    hbopt::HyperbandResult result = hbopt::hyperband_practical(ctx, params, factory);
    run.consumed = ledger.consumed();
    for (auto it = result.trajectory.rbegin(); it != result.trajectory.rend(); ++it)
      if (it->incumbent) {
        run.loss = it->incumbent_loss;
        run.regret = it->incumbent->limit_loss - nu_star;
        break;
      }
    return run;
  }
  if (opts.algo == "hyperband_inf") {
    hbopt::HyperbandResult result = hbopt::hyperband_infinite(ctx, factory, opts.max_k);
    run.consumed = ledger.consumed();
    for (auto it = result.trajectory.rbegin(); it != result.trajectory.rend(); ++it)
      if (it->incumbent) {
        run.loss = it->incumbent_loss;
        run.regret = it->incumbent->limit_loss - nu_star;
        break;
      }
    return run;
  }

  hbopt::ShaResult res;
  if (opts.algo == "sha") {
    std::int64_t n = opts.n.value_or(0);
    if (n < 2) throw hbopt::UsageError("simulate: --algo sha requires --n >= 2");
    res = hbopt::sha_finite_theoretical(ctx, hbopt::sim::make_arms(inst, rng, n), budget, opts.R,
                                        opts.eta);
  } else if (opts.algo == "sha_inf") {
    std::int64_t n = opts.n.value_or(0);
    if (n < 2) throw hbopt::UsageError("simulate: --algo sha_inf requires --n >= 2");
    res = hbopt::sha_infinite(ctx, hbopt::sim::make_arms(inst, rng, n), budget);
  } else if (opts.algo == "uniform") {
    std::int64_t n = opts.n.value_or(0);
    if (n < 1) throw hbopt::UsageError("simulate: --algo uniform requires --n >= 1");
    res = hbopt::uniform_allocation(ctx, hbopt::sim::make_arms(inst, rng, n), budget,
                                    opts.given("--R") ? std::optional<std::int64_t>(opts.R)
                                                      : std::nullopt);
  } else if (opts.algo == "random" || opts.algo == "random_2x") {
    std::int64_t n = opts.n ? *opts.n : std::max<std::int64_t>(1, cap / opts.R);
    res = hbopt::random_search(ctx, hbopt::sim::make_arms(inst, rng, n), opts.R);
  } else {
    throw hbopt::UsageError("simulate: unknown algo " + opts.algo);
  }
  run.consumed = ledger.consumed();
  run.loss = res.best_loss;
  run.regret = res.best_arm->limit_loss - nu_star;
  return run;
}

int cmd_simulate(const SimulateOpts& opts) {
  hbopt::sim::TheoryInstance inst = simulate_instance(opts);
  std::vector<std::int64_t> budgets = opts.budgets;
  if (budgets.empty()) {
    if (inst.family == hbopt::sim::Family::adversarial)
      budgets.push_back(0);  // resolved to the instance's threshold budget
    else
      throw hbopt::UsageError("simulate: --budget is required");
  }

  std::vector<SimulateRun> runs;
  for (std::int64_t budget : budgets)
    for (std::int64_t t = 0; t < opts.trials; ++t)
      runs.push_back(run_one_simulation(opts, inst, budget, t));

  json aggregates = json::array();
  for (std::int64_t budget : budgets) {
    double sum = 0, lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double consumed = 0;
    std::int64_t count = 0;
    for (const auto& run : runs) {
      if (run.budget != budget || !std::isfinite(run.regret)) continue;
      sum += run.regret;
      lo = std::min(lo, run.regret);
      hi = std::max(hi, run.regret);
      consumed += static_cast<double>(run.consumed);
      ++count;
    }
    json row{{"budget", budget}, {"trials", count}};
    if (count > 0) {
      row["mean_regret"] = sum / count;
      row["min_regret"] = lo;
      row["max_regret"] = hi;
      row["mean_consumed"] = consumed / count;
    }
    aggregates.push_back(row);
  }

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    std::ostringstream csv;
    csv << "budget,trial,consumed,regret,loss\n";
    for (const auto& run : runs)
      csv << run.budget << "," << run.trial << "," << run.consumed << "," << run.regret << ","
          << run.loss << "\n";
    write_text_file(fs::path(opts.out_dir) / "results.csv", csv.str());
    json per_trial = json::array();
    for (const auto& run : runs)
      per_trial.push_back({{"budget", run.budget},
                           {"trial", run.trial},
                           {"consumed", run.consumed},
                           {"regret", std::isfinite(run.regret) ? json(run.regret) : json(nullptr)},
                           {"loss", std::isfinite(run.loss) ? json(run.loss) : json(nullptr)}});
    json doc{{"instance", inst.to_json()},
             {"algo", opts.algo},
             {"seed", opts.seed},
             {"aggregates", aggregates},
             {"runs", per_trial}};
    write_text_file(fs::path(opts.out_dir) / "results.json", doc.dump(2) + "\n");
  }

  if (opts.as_json) {
    json doc{{"instance", inst.to_json()},
             {"algo", opts.algo},
             {"seed", opts.seed},
             {"aggregates", aggregates}};
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
  }

  std::cout << "algo=" << opts.algo << " family=" << hbopt::sim::to_string(inst.family)
            << " trials=" << opts.trials << "\n";
  std::cout << std::setw(12) << "budget" << std::setw(14) << "mean_regret" << std::setw(14)
            << "min_regret" << std::setw(14) << "max_regret" << std::setw(16) << "mean_consumed"
            << "\n";
  for (const auto& row : aggregates) {
    std::cout << std::setw(12) << row["budget"].get<std::int64_t>();
    if (row.contains("mean_regret"))
      std::cout << std::setw(14) << render_number(row["mean_regret"].get<double>())
                << std::setw(14) << render_number(row["min_regret"].get<double>()) << std::setw(14)
                << render_number(row["max_regret"].get<double>()) << std::setw(16)
                << render_number(row["mean_consumed"].get<double>());
    else
      std::cout << std::setw(14) << "-";
    std::cout << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleOpts {
  std::string quantity;
  std::string instance_path;
  std::string family = "beta_continuous";
  double alpha = 1;
  double beta = 1;
  double nu_star = 0;
  std::vector<double> mu;
  std::optional<std::int64_t> horizon_R;
  double y = 0;
  std::int64_t j = 1;
  std::optional<std::int64_t> R;
  double eta = 2;
  std::vector<double> limits;
  double epsilon = 0;
  double delta = 0.1;
  std::int64_t n = 0;
  double gap = 0;

  std::map<std::string, CLI::Option*> handles;
  bool given(const std::string& name) const {
    auto it = handles.find(name);
    return it != handles.end() && it->second->count() > 0;
  }
};

hbopt::sim::TheoryInstance oracle_instance(const OracleOpts& opts) {
  if (!opts.instance_path.empty())
    return hbopt::sim::TheoryInstance::from_json(read_json_file(opts.instance_path));
  hbopt::sim::TheoryInstance inst;
  if (opts.family == "beta_continuous")
    inst.family = hbopt::sim::Family::beta_continuous;
  else if (opts.family == "discrete")
    inst.family = hbopt::sim::Family::discrete;
  else if (opts.family == "stochastic")
    inst.family = hbopt::sim::Family::stochastic;
  else
    throw hbopt::UsageError("oracle: unsupported family " + opts.family);
  inst.alpha = opts.alpha;
  inst.beta = opts.beta;
  inst.nu_star = opts.nu_star;
  inst.mu = opts.mu;
  inst.horizon_R = opts.horizon_R;
  inst.check();
  return inst;
}

int cmd_oracle(const OracleOpts& opts) {
  json inputs = json::object();
  json value;
  const std::string& q = opts.quantity;
  if (q == "gamma") {
    inputs = {{"alpha", opts.alpha}, {"j", opts.j}};
    value = hbopt::gamma_of(opts.alpha, opts.j);
  } else if (q == "gamma_inv") {
    inputs = {{"alpha", opts.alpha}, {"y", opts.y}};
    if (opts.R) inputs["R"] = *opts.R;
    value = hbopt::theory::gamma_inv(opts.alpha, opts.y, opts.R);
  } else if (q == "z_sh_infinite" || q == "z_sh_finite") {
    hbopt::theory::ComplexityQuery query;
    query.limits = opts.limits;
    query.alpha = opts.alpha;
    query.epsilon = opts.epsilon;
    query.delta = opts.delta;
    query.R = opts.R;
    query.eta = opts.eta;
    inputs = {{"limits", opts.limits},
              {"alpha", opts.alpha},
              {"epsilon", opts.epsilon},
              {"eta", opts.eta}};
    if (opts.R) inputs["R"] = *opts.R;
    if (q == "z_sh_infinite") {
      hbopt::theory::ZshInfinite z = hbopt::theory::z_sh_infinite(query);
      value = {{"max_form", z.max_form}, {"sum_form", z.sum_form}};
    } else {
      value = hbopt::theory::z_sh_finite(query);
    }
  } else if (q == "h_complexity" || q == "h_eps_min" || q == "uniform_budget" ||
             q == "lower_budget") {
    hbopt::sim::TheoryInstance inst = oracle_instance(opts);
    inputs = {{"instance", inst.to_json()}, {"n", opts.n}, {"delta", opts.delta}};
    if (opts.n < 1) throw hbopt::UsageError("oracle: --n is required for " + q);
    if (q == "h_eps_min") {
      value = hbopt::theory::h_eps_min(inst, opts.n, opts.delta);
    } else if (q == "h_complexity") {
      if (opts.given("--epsilon")) {
        inputs["epsilon"] = opts.epsilon;
        value = hbopt::theory::h_complexity(inst, opts.n, opts.delta, opts.epsilon);
      } else {
        value = hbopt::theory::h_complexity(inst, opts.n, opts.delta);
      }
    } else if (q == "uniform_budget") {
      value = hbopt::theory::uniform_budget(inst, opts.n, opts.delta);
    } else {
      value = hbopt::theory::lower_budget(inst, opts.n, opts.delta);
    }
  } else if (q == "scaling") {
    inputs = {{"alpha", opts.alpha}, {"beta", opts.beta}, {"gap", opts.gap}, {"delta", opts.delta}};
    hbopt::theory::ScalingPrediction p =
        hbopt::theory::scaling_predictions(opts.alpha, opts.beta, opts.gap, opts.delta);
    value = {{"uniform_budget", p.uniform_budget},
             {"sha_budget", p.sha_budget},
             {"uniform_exponent", p.uniform_exponent},
             {"sha_exponent", p.sha_exponent}};
  } else if (q == "discrete_sha_sum") {
    inputs = {{"mu", opts.mu}, {"alpha", opts.alpha}};
    value = hbopt::theory::discrete_sha_sum(opts.mu, opts.alpha);
  } else {
    throw hbopt::UsageError("oracle: unknown quantity " + q);
  }
  json out{{"quantity", q}, {"inputs", inputs}, {"value", value}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
  std::string log_path;
  bool as_json = false;
};

int cmd_report(const ReportOpts& opts) {
  std::ifstream in(opts.log_path);
  if (!in) throw hbopt::UsageError("cannot open " + opts.log_path);

  std::map<std::int64_t, std::int64_t> per_bracket;
  std::int64_t total_charged = 0;
  std::int64_t trials = 0;
  json trajectory = json::array();
  json best;
  std::vector<std::int64_t> corrupt;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("type")) {
      corrupt.push_back(lineno);
      continue;
    }
    try {
      std::string type = doc["type"];
      if (type == "trial") {
        per_bracket[doc["bracket_s"].get<std::int64_t>()] += doc["charged"].get<std::int64_t>();
        total_charged += doc["charged"].get<std::int64_t>();
        ++trials;
      } else if (type == "incumbent") {
        trajectory.push_back({{"ledger_consumed", doc["ledger_consumed"]},
                              {"loss", doc["loss"]},
                              {"arm_id", doc["arm_id"]}});
        best = doc;
      }
    } catch (const json::exception&) {
      corrupt.push_back(lineno);
    }
  }
  for (std::int64_t n : corrupt)
    std::cerr << "warning: " << opts.log_path << ":" << n << ": corrupt line skipped\n";

  if (opts.as_json) {
    json per = json::object();
    for (const auto& [s, units] : per_bracket) per[std::to_string(s)] = units;
    json out{{"trials", trials},
             {"total_charged", total_charged},
             {"per_bracket", per},
             {"trajectory", trajectory},
             {"best", best.is_null() ? json(nullptr) : best},
             {"corrupt_lines", corrupt}};
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }

  if (trials == 0 && trajectory.empty()) {
    std::cout << "no trials\n";
    return kExitOk;
  }
  std::cout << "trials: " << trials << "\n";
  std::cout << "total charged: " << total_charged << "\n";
  std::cout << "per-bracket consumption:\n";
  for (const auto& [s, units] : per_bracket)
    std::cout << "  s=" << s << ": " << units << "\n";
  if (!trajectory.empty()) {
    std::cout << "incumbent trajectory (consumed -> loss, arm):\n";
    for (const auto& point : trajectory) {
      std::cout << "  " << point["ledger_consumed"].get<std::int64_t>() << " -> ";
      if (point["loss"].is_null())
        std::cout << "-";
      else
        std::cout << render_number(point["loss"].get<double>());
      std::cout << " (arm " << point["arm_id"].get<std::int64_t>() << ")\n";
    }
  }
  if (!best.is_null() && best.contains("config"))
    std::cout << "best configuration: " << best["config"].dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperband / successive-halving hyperparameter optimization engine"};
  app.require_subcommand(1);

  BracketsOpts bopts;
  CLI::App* brackets = app.add_subcommand("brackets", "Print the bracket geometry for (R, eta)");
  brackets->add_option("--R", bopts.R, "Maximum resource per configuration");
  brackets->add_option("--eta", bopts.eta, "Elimination factor (>= 2)");
  brackets->add_option("--n-max", bopts.n_max, "Cap on configurations per bracket");
  brackets->add_option("--n-min", bopts.n_min, "Smallest bracket width to run");
  brackets->add_flag("--n-max-rule", bopts.n_max_rule, "Use n_max = max(9, R/1000)");
  brackets->add_flag("--json", bopts.as_json, "Machine-readable output");

  TuneOpts topts;
  CLI::App* tune = app.add_subcommand("tune", "Run practical Hyperband against a real backend");
  topts.handles["--space"] = tune->add_option("--space", topts.space_path, "Search-space JSON file");
  topts.handles["--trainer"] =
      tune->add_option("--trainer", topts.trainer_command, "Trainer command (run via /bin/sh -c)");
  topts.handles["--replay"] =
      tune->add_option("--replay", topts.replay_path, "Replay curves JSON file");
  tune->add_option("--manifest", topts.manifest_path, "Load settings from a saved manifest");
  tune->add_option("--out", topts.out_dir, "Output directory (manifest, trials, best)");
  topts.handles["--R"] = tune->add_option("--R", topts.R, "Maximum resource per configuration");
  topts.handles["--eta"] = tune->add_option("--eta", topts.eta, "Elimination factor");
  topts.handles["--n-max"] = tune->add_option("--n-max", topts.n_max, "Cap on configurations");
  topts.handles["--n-min"] = tune->add_option("--n-min", topts.n_min, "Smallest bracket width");
  tune->add_flag("--n-max-rule", topts.n_max_rule, "Use n_max = max(9, R/1000)");
  topts.handles["--seed"] = tune->add_option("--seed", topts.seed, "Sampling seed");
  topts.handles["--budget"] = tune->add_option("--budget", topts.budget, "Ledger cap in resource units");
  topts.handles["--loops"] =
      tune->add_option("--loops", topts.loops, "Outer loops (0: repeat until the budget cap)");
  topts.handles["--accounting"] = tune->add_option("--accounting", topts.accounting)
                                      ->check(CLI::IsMember({"full", "delta"}));
  topts.handles["--incumbent"] = tune->add_option("--incumbent", topts.incumbent)
                                     ->check(CLI::IsMember({"max_resource", "paper"}));
  topts.handles["--max-parallel"] =
      tune->add_option("--max-parallel", topts.max_parallel, "Concurrent evaluations per rung");
  topts.handles["--timeout-secs"] =
      tune->add_option("--timeout-secs", topts.timeout_secs, "Per-evaluation trainer timeout");
  topts.handles["--resource-unit"] = tune->add_option("--resource-unit", topts.resource_unit,
                                                      "Opaque unit text passed to trainers");
  topts.handles["--checkpoint-dir"] =
      tune->add_option("--checkpoint-dir", topts.checkpoint_dir, "Trainer checkpoint root");

  SimulateOpts sopts;
  CLI::App* simulate = app.add_subcommand("simulate", "Run allocation algorithms on synthetic instances");
  simulate->add_option("--instance", sopts.instance_path, "Instance JSON file");
  simulate->add_option("--family", sopts.family)
      ->check(CLI::IsMember({"beta_continuous", "discrete", "stochastic", "adversarial"}));
  simulate->add_option("--alpha", sopts.alpha, "Envelope exponent");
  simulate->add_option("--beta", sopts.beta, "CDF exponent");
  simulate->add_option("--nu-star", sopts.nu_star, "Best achievable limit");
  simulate->add_option("--mu", sopts.mu, "Discrete means")->delimiter(',');
  simulate->add_option("--noise", sopts.noise)
      ->check(CLI::IsMember({"none", "bernoulli", "uniform_bounded"}));
  simulate->add_option("--noise-width", sopts.noise_width, "uniform_bounded half-width");
  simulate->add_option("--envelope-sign", sopts.envelope_sign)
      ->check(CLI::IsMember({"plus", "alternating", "adversarial"}));
  simulate->add_option("--nu-hat", sopts.nu_hat, "Reflection point (adversarial sign)");
  simulate->add_option("--horizon-R", sopts.horizon_R, "Freeze losses at this level");
  simulate->add_option("--algo", sopts.algo, "Algorithm")
      ->required()
      ->check(CLI::IsMember(
          {"hyperband", "hyperband_inf", "sha", "sha_inf", "uniform", "random", "random_2x"}));
  simulate->add_option("--trials", sopts.trials, "Independent repetitions");
  simulate->add_option("--budget", sopts.budgets, "Budget grid")->delimiter(',');
  simulate->add_option("--n", sopts.n, "Population size for sha/sha_inf/uniform/random");
  sopts.handles["--R"] = simulate->add_option("--R", sopts.R, "Maximum resource");
  simulate->add_option("--eta", sopts.eta, "Elimination factor");
  simulate->add_option("--n-max", sopts.n_max, "Hyperband n_max");
  simulate->add_option("--n-min", sopts.n_min, "Hyperband n_min");
  simulate->add_option("--delta", sopts.delta, "Failure probability (adversarial instances)");
  simulate->add_option("--seed", sopts.seed, "Base seed; trial t uses seed + t");
  simulate->add_option("--max-k", sopts.max_k, "Outer-loop bound for *_inf algorithms");
  simulate->add_option("--accounting", sopts.accounting)
      ->check(CLI::IsMember({"full", "delta"}));
  simulate->add_option("--incumbent", sopts.incumbent)
      ->check(CLI::IsMember({"max_resource", "paper"}));
  simulate->add_option("--max-parallel", sopts.max_parallel, "Concurrent evaluations per rung");
  simulate->add_option("--out", sopts.out_dir, "Write results.json / results.csv here");
  simulate->add_flag("--json", sopts.as_json, "Machine-readable output");

  OracleOpts oopts;
  CLI::App* oracle = app.add_subcommand("oracle", "Evaluate theory quantities as JSON");
  oracle->add_option("--quantity", oopts.quantity, "One of gamma, gamma_inv, z_sh_infinite, "
                     "z_sh_finite, h_complexity, h_eps_min, uniform_budget, lower_budget, "
                     "scaling, discrete_sha_sum")
      ->required();
  oracle->add_option("--instance", oopts.instance_path, "Instance JSON file");
  oracle->add_option("--family", oopts.family)
      ->check(CLI::IsMember({"beta_continuous", "discrete", "stochastic"}));
  oracle->add_option("--alpha", oopts.alpha, "Envelope exponent");
  oracle->add_option("--beta", oopts.beta, "CDF exponent");
  oracle->add_option("--nu-star", oopts.nu_star, "Best achievable limit");
  oracle->add_option("--mu", oopts.mu, "Discrete means")->delimiter(',');
  oracle->add_option("--horizon-R", oopts.horizon_R, "Instance horizon");
  oracle->add_option("--y", oopts.y, "gamma_inv argument");
  oracle->add_option("--j", oopts.j, "gamma argument");
  oracle->add_option("--R", oopts.R, "Finite horizon");
  oracle->add_option("--eta", oopts.eta, "Elimination factor");
  oracle->add_option("--limits", oopts.limits, "Explicit nu_1..nu_n (ascending)")->delimiter(',');
  oopts.handles["--epsilon"] = oracle->add_option("--epsilon", oopts.epsilon, "Accuracy target");
  oracle->add_option("--delta", oopts.delta, "Failure probability");
  oracle->add_option("--n", oopts.n, "Number of arms");
  oracle->add_option("--gap", oopts.gap, "Scaling-law gap Delta");

  ReportOpts ropts;
  CLI::App* report = app.add_subcommand("report", "Summarize a trial log");
  report->add_option("--log", ropts.log_path, "trials.jsonl path")->required();
  report->add_flag("--json", ropts.as_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(brackets)) return cmd_brackets(bopts);
    if (app.got_subcommand(tune)) return cmd_tune(topts);
    if (app.got_subcommand(simulate)) return cmd_simulate(sopts);
    if (app.got_subcommand(oracle)) return cmd_oracle(oopts);
    if (app.got_subcommand(report)) return cmd_report(ropts);
  } catch (const hbopt::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hbopt::space::SpaceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const hbopt::ReplayError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
