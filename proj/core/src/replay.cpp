#include "hbopt/replay.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hbopt {

using nlohmann::json;

double ReplayOracle::evaluate(ArmState& arm, std::int64_t resource, std::int64_t) {
  auto curve_it = curves_.find(arm.arm_id);
  if (curve_it == curves_.end())
    throw ReplayError("replay: no curve for arm " + std::to_string(arm.arm_id));
  const auto& curve = curve_it->second;
  auto it = curve.upper_bound(resource);
  if (it == curve.begin())
    throw ReplayError("replay: query level " + std::to_string(resource) + " for arm " +
                      std::to_string(arm.arm_id) + " is below the smallest tabulated level " +
                      std::to_string(curve.begin()->first));
  return std::prev(it)->second;
}

std::unique_ptr<LossOracle> load_replay(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw ReplayError(std::string("replay: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ReplayError("replay: document must map arm ids to curves");
  auto oracle = std::make_unique<ReplayOracle>();
  for (const auto& [key, value] : doc.items()) {
    std::int64_t arm_id;
    try {
      std::size_t pos = 0;
      arm_id = std::stoll(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ReplayError("replay: arm id '" + key + "' is not an integer");
    }
    if (!value.is_object() || value.empty())
      throw ReplayError("replay: arm " + key + " needs a non-empty {level: loss} object");
    std::map<std::int64_t, double> curve;
    for (const auto& [lvl, loss] : value.items()) {
      std::int64_t level;
      try {
        std::size_t pos = 0;
        level = std::stoll(lvl, &pos);
        if (pos != lvl.size()) throw std::invalid_argument(lvl);
      } catch (const std::exception&) {
        throw ReplayError("replay: arm " + key + ": level '" + lvl + "' is not an integer");
      }
      if (level < 1) throw ReplayError("replay: arm " + key + ": levels must be >= 1");
      if (!loss.is_number())
        throw ReplayError("replay: arm " + key + ": loss at level " + lvl + " is not a number");
      curve[level] = loss.get<double>();
    }
    oracle->curves_[arm_id] = std::move(curve);
  }
  if (oracle->curves_.empty()) throw ReplayError("replay: document has no arms");
  return oracle;
}

std::unique_ptr<LossOracle> load_replay_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ReplayError("replay: cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_replay(buf.str());
}

}  // namespace hbopt
