#pragma once

#include <map>
#include <memory>
#include <string>

#include "hbopt/evaluator.hpp"

namespace hbopt {

class ReplayError : public std::runtime_error {
 public:
  explicit ReplayError(const std::string& what) : std::runtime_error(what) {}
};

// Tabulated loss curves keyed by arm id. A query between tabulated levels
// returns the value at the largest tabulated level <= query; a query below
// the smallest tabulated level is an error.
class ReplayOracle : public LossOracle {
 public:
  double evaluate(ArmState& arm, std::int64_t resource, std::int64_t trial_id) override;
  bool resumable() const override { return true; }

  std::size_t num_arms() const { return curves_.size(); }

 private:
  friend std::unique_ptr<LossOracle> load_replay(const std::string&);
  std::map<std::int64_t, std::map<std::int64_t, double>> curves_;
};

// Parses a replay document: JSON mapping arm_id -> {resource_level: loss}.
std::unique_ptr<LossOracle> load_replay(const std::string& document);
std::unique_ptr<LossOracle> load_replay_file(const std::string& path);

}  // namespace hbopt
