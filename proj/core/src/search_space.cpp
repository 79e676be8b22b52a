#include "hbopt/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hbopt/common.hpp"

namespace hbopt::space {

using nlohmann::json;

const ParamSpec* SearchSpace::find(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

std::string to_string(const ParamValue& v) {
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  std::ostringstream os;
  if (std::holds_alternative<std::int64_t>(v))
    os << std::get<std::int64_t>(v);
  else
    os << std::get<double>(v);
  return os.str();
}

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t index, const std::string& msg) {
  std::ostringstream os;
  os << "search space: parameter '" << name << "' (index " << index << "): " << msg;
  throw SpaceError(os.str());
}

ParamKind parse_kind(const std::string& s, const std::string& name, std::size_t i) {
  if (s == "continuous") return ParamKind::continuous;
  if (s == "integer") return ParamKind::integer;
  if (s == "categorical") return ParamKind::categorical;
  fail(name, i, "unknown kind '" + s + "'");
}

ParamScale parse_scale(const std::string& s, const std::string& name, std::size_t i) {
  if (s == "linear") return ParamScale::linear;
  if (s == "log") return ParamScale::log;
  fail(name, i, "unknown scale '" + s + "'");
}

// Resolves a bound against literal or referenced values; `have` maps names of
// already-sampled parameters to numeric values.
double resolve_bound(const ParamSpec& p, bool upper,
                     const std::map<std::string, double>& have) {
  const auto& ref = upper ? p.upper_ref : p.lower_ref;
  if (!ref) return upper ? p.upper : p.lower;
  auto it = have.find(*ref);
  if (it == have.end())
    throw SpaceError("search space: parameter '" + p.name + "': referenced parameter '" +
                     *ref + "' has no sampled value");
  return it->second;
}

bool is_active(const ParamSpec& p, const Configuration& config) {
  if (!p.active_when) return true;
  auto it = config.values.find(p.active_when->param);
  if (it == config.values.end()) return false;
  if (!std::holds_alternative<std::string>(it->second)) return false;
  const std::string& label = std::get<std::string>(it->second);
  return std::find(p.active_when->equals.begin(), p.active_when->equals.end(), label) !=
         p.active_when->equals.end();
}

}  // namespace

SearchSpace parse_space(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw SpaceError(std::string("search space: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("params") || !doc["params"].is_array())
    throw SpaceError("search space: document must be an object with a 'params' array");
  const json& arr = doc["params"];
  if (arr.empty()) throw SpaceError("search space: empty space");

  SearchSpace space;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& jp = arr[i];
    if (!jp.is_object()) throw SpaceError("search space: params[" + std::to_string(i) + "] is not an object");
    ParamSpec p;
    if (!jp.contains("name") || !jp["name"].is_string())
      throw SpaceError("search space: params[" + std::to_string(i) + "] missing string 'name'");
    p.name = jp["name"].get<std::string>();
    if (p.name.empty()) fail(p.name, i, "empty name");
    if (!seen.insert(p.name).second) fail(p.name, i, "duplicate name");
    if (!jp.contains("kind") || !jp["kind"].is_string()) fail(p.name, i, "missing string 'kind'");
    p.kind = parse_kind(jp["kind"].get<std::string>(), p.name, i);
    if (jp.contains("scale")) p.scale = parse_scale(jp["scale"].get<std::string>(), p.name, i);

    if (p.kind == ParamKind::categorical) {
      for (const char* k : {"min", "max", "min_ref", "max_ref"})
        if (jp.contains(k)) fail(p.name, i, std::string("categorical parameter cannot have '") + k + "'");
      if (jp.contains("scale")) fail(p.name, i, "categorical parameter cannot have 'scale'");
      if (!jp.contains("choices") || !jp["choices"].is_array() || jp["choices"].empty())
        fail(p.name, i, "categorical parameter needs a non-empty 'choices' array");
      std::set<std::string> uniq;
      for (const auto& c : jp["choices"]) {
        if (!c.is_string()) fail(p.name, i, "choices must be strings");
        std::string label = c.get<std::string>();
        if (!uniq.insert(label).second) fail(p.name, i, "duplicate choice '" + label + "'");
        p.choices.push_back(label);
      }
    } else {
      if (jp.contains("choices")) fail(p.name, i, "numeric parameter cannot have 'choices'");
      bool has_lo = jp.contains("min"), has_lo_ref = jp.contains("min_ref");
      bool has_hi = jp.contains("max"), has_hi_ref = jp.contains("max_ref");
      if (has_lo == has_lo_ref) fail(p.name, i, "needs exactly one of 'min' or 'min_ref'");
      if (has_hi == has_hi_ref) fail(p.name, i, "needs exactly one of 'max' or 'max_ref'");
      if (has_lo) {
        if (!jp["min"].is_number()) fail(p.name, i, "'min' must be a number");
        p.lower = jp["min"].get<double>();
      } else {
        p.lower_ref = jp["min_ref"].get<std::string>();
      }
      if (has_hi) {
        if (!jp["max"].is_number()) fail(p.name, i, "'max' must be a number");
        p.upper = jp["max"].get<double>();
      } else {
        p.upper_ref = jp["max_ref"].get<std::string>();
      }
      if (has_lo && has_hi && !(p.lower < p.upper))
        fail(p.name, i, "bad bounds: min must be < max");
      if (p.scale == ParamScale::log && has_lo && p.lower <= 0)
        fail(p.name, i, "log scale requires min > 0, got " + std::to_string(p.lower));
      if (p.kind == ParamKind::integer) {
        if (has_lo && p.lower != std::floor(p.lower)) fail(p.name, i, "integer 'min' must be integral");
        if (has_hi && p.upper != std::floor(p.upper)) fail(p.name, i, "integer 'max' must be integral");
      }
      // reference bounds must point at a previously declared numeric parameter
      // of the same kind -- this ordering rule is what rules out cycles
      for (const auto& [ref, which] :
           {std::pair{p.lower_ref, "min_ref"}, std::pair{p.upper_ref, "max_ref"}}) {
        if (!ref) continue;
        const ParamSpec* target = space.find(*ref);
        if (!target)
          fail(p.name, i, std::string(which) + " '" + *ref +
                              "' does not name a previously declared parameter (cyclic or forward reference)");
        if (target->kind != p.kind)
          fail(p.name, i, std::string(which) + " '" + *ref + "' has a different kind");
      }
    }

    if (jp.contains("active_when")) {
      const json& aw = jp["active_when"];
      if (!aw.is_object() || !aw.contains("param") || !aw.contains("equals"))
        fail(p.name, i, "active_when needs 'param' and 'equals'");
      ActiveWhen cond;
      cond.param = aw["param"].get<std::string>();
      if (aw["equals"].is_string()) {
        cond.equals.push_back(aw["equals"].get<std::string>());
      } else if (aw["equals"].is_array() && !aw["equals"].empty()) {
        for (const auto& e : aw["equals"]) cond.equals.push_back(e.get<std::string>());
      } else {
        fail(p.name, i, "active_when.equals must be a label or non-empty label array");
      }
      const ParamSpec* target = space.find(cond.param);
      if (!target)
        fail(p.name, i, "active_when references '" + cond.param +
                            "', which is not declared earlier in the space");
      if (target->kind != ParamKind::categorical)
        fail(p.name, i, "active_when must reference a categorical parameter");
      for (const auto& label : cond.equals)
        if (std::find(target->choices.begin(), target->choices.end(), label) ==
            target->choices.end())
          fail(p.name, i, "active_when label '" + label + "' is not a choice of '" + cond.param + "'");
      p.active_when = std::move(cond);
    }
    space.params.push_back(std::move(p));
  }
  return space;
}

SearchSpace load_space_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("search space: cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_space(buf.str());
}

std::vector<Configuration> sample(const SearchSpace& space, SplitMix64& rng, std::int64_t n) {
  if (n < 1) throw SpaceError("sample: n must be >= 1");
  std::vector<Configuration> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t s = 0; s < n; ++s) {
    Configuration config;
    std::map<std::string, double> numeric;  // resolved values for reference bounds
    for (const auto& p : space.params) {
      if (!is_active(p, config)) continue;
      if (p.kind == ParamKind::categorical) {
        std::int64_t idx = rng.uniform_int(0, static_cast<std::int64_t>(p.choices.size()) - 1);
        config.values[p.name] = p.choices[static_cast<std::size_t>(idx)];
        continue;
      }
      double lo = resolve_bound(p, false, numeric);
      double hi = resolve_bound(p, true, numeric);
      if (!(lo <= hi))
        throw SpaceError("sample: parameter '" + p.name + "': resolved bounds are empty (" +
                         std::to_string(lo) + " > " + std::to_string(hi) + ")");
      if (p.kind == ParamKind::continuous) {
        double v = p.scale == ParamScale::log
                       ? std::exp(rng.uniform(std::log(lo), std::log(hi)))
                       : rng.uniform(lo, hi);
        v = std::clamp(v, lo, hi);
        config.values[p.name] = v;
        numeric[p.name] = v;
      } else {
        std::int64_t ilo = static_cast<std::int64_t>(std::ceil(lo - 1e-9));
        std::int64_t ihi = static_cast<std::int64_t>(std::floor(hi + 1e-9));
        std::int64_t v;
        if (p.scale == ParamScale::log) {
          // round half-up after exponentiation
          double x = std::exp(rng.uniform(std::log(static_cast<double>(ilo)),
                                          std::log(static_cast<double>(ihi))));
          v = static_cast<std::int64_t>(std::floor(x + 0.5));
          v = std::clamp(v, ilo, ihi);
        } else {
          v = rng.uniform_int(ilo, ihi);
        }
        config.values[p.name] = v;
        numeric[p.name] = static_cast<double>(v);
      }
    }
    out.push_back(std::move(config));
  }
  return out;
}

std::vector<std::string> validate(const SearchSpace& space, const Configuration& config) {
  std::vector<std::string> violations;
  std::map<std::string, double> numeric;
  for (const auto& [name, value] : config.values) {
    if (!space.find(name)) violations.push_back("unknown parameter '" + name + "'");
    if (std::holds_alternative<double>(value))
      numeric[name] = std::get<double>(value);
    else if (std::holds_alternative<std::int64_t>(value))
      numeric[name] = static_cast<double>(std::get<std::int64_t>(value));
  }
  for (const auto& p : space.params) {
    auto it = config.values.find(p.name);
    bool active = is_active(p, config);
    if (!active) {
      if (it != config.values.end())
        violations.push_back("inactive parameter present: '" + p.name + "'");
      continue;
    }
    if (it == config.values.end()) {
      violations.push_back("active parameter missing: '" + p.name + "'");
      continue;
    }
    const ParamValue& v = it->second;
    if (p.kind == ParamKind::categorical) {
      if (!std::holds_alternative<std::string>(v)) {
        violations.push_back("parameter '" + p.name + "' must be a label");
      } else if (std::find(p.choices.begin(), p.choices.end(), std::get<std::string>(v)) ==
                 p.choices.end()) {
        violations.push_back("parameter '" + p.name + "': label '" + std::get<std::string>(v) +
                             "' is not a declared choice");
      }
      continue;
    }
    double x;
    if (std::holds_alternative<double>(v)) {
      if (p.kind == ParamKind::integer) {
        violations.push_back("parameter '" + p.name + "' must be an integer");
        continue;
      }
      x = std::get<double>(v);
    } else if (std::holds_alternative<std::int64_t>(v)) {
      x = static_cast<double>(std::get<std::int64_t>(v));
    } else {
      violations.push_back("parameter '" + p.name + "' must be numeric");
      continue;
    }
    bool resolvable = true;
    for (const auto& ref : {p.lower_ref, p.upper_ref})
      if (ref && !numeric.count(*ref)) {
        violations.push_back("parameter '" + p.name + "': reference bound '" + *ref +
                             "' missing from configuration");
        resolvable = false;
      }
    if (!resolvable) continue;
    double lo = resolve_bound(p, false, numeric);
    double hi = resolve_bound(p, true, numeric);
    if (x < lo || x > hi)
      violations.push_back("parameter '" + p.name + "' out of bounds: " + std::to_string(x) +
                           " not in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return violations;
}

}  // namespace hbopt::space
