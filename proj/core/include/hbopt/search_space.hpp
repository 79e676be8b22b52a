#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hbopt/rng.hpp"

namespace hbopt::space {

class SpaceError : public std::runtime_error {
 public:
  explicit SpaceError(const std::string& what) : std::runtime_error(what) {}
};

enum class ParamKind { continuous, integer, categorical };
enum class ParamScale { linear, log };

struct ActiveWhen {
  std::string param;
  std::vector<std::string> equals;  // active when param's label is any of these
};

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::continuous;
  ParamScale scale = ParamScale::linear;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<std::string> lower_ref;
  std::optional<std::string> upper_ref;
  std::vector<std::string> choices;
  std::optional<ActiveWhen> active_when;
};

struct SearchSpace {
  std::vector<ParamSpec> params;
  const ParamSpec* find(const std::string& name) const;
};

using ParamValue = std::variant<double, std::int64_t, std::string>;

struct Configuration {
  std::map<std::string, ParamValue> values;
  bool operator==(const Configuration&) const = default;
};

std::string to_string(const ParamValue& v);

// Parses and validates a search-space JSON document; errors carry the
// offending parameter's name and position.
SearchSpace parse_space(const std::string& document);
SearchSpace load_space_file(const std::string& path);

std::vector<Configuration> sample(const SearchSpace& space, SplitMix64& rng,
                                  std::int64_t n);

// Empty list means the configuration satisfies every invariant.
std::vector<std::string> validate(const SearchSpace& space, const Configuration& config);

}  // namespace hbopt::space
