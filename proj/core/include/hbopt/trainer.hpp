#pragma once

#include <filesystem>
#include <string>

#include "hbopt/evaluator.hpp"

namespace hbopt {

struct TrainerOptions {
  std::string command;  // run via /bin/sh -c
  std::string resource_unit = "iterations";
  std::filesystem::path checkpoint_root;
  double timeout_secs = 0;  // 0 disables the per-evaluation timeout
};

// Launches the trainer command once per evaluation with one JSON line on
// stdin: {"trial_id", "arm_id", "config", "resource", "resource_unit",
// "checkpoint_dir"}. The last stdout line must be {"loss": <finite number>}
// and the exit code must be 0; anything else (including a timeout, which
// kills the process group) is a per-arm failure.
class TrainerOracle : public LossOracle {
 public:
  explicit TrainerOracle(TrainerOptions options);

  double evaluate(ArmState& arm, std::int64_t resource, std::int64_t trial_id) override;
  bool resumable() const override { return true; }

  const TrainerOptions& options() const { return options_; }

 private:
  TrainerOptions options_;
};

}  // namespace hbopt
