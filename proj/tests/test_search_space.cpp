#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "hbopt/search_space.hpp"
#include "test_helpers.hpp"

using namespace hbopt;
using namespace hbopt::space;

namespace {

double num(const Configuration& c, const std::string& name) {
  const ParamValue& v = c.values.at(name);
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  return static_cast<double>(std::get<std::int64_t>(v));
}

// Kolmogorov-Smirnov distance of `xs` against the uniform CDF on [lo, hi].
double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f = (xs[i] - lo) / (hi - lo);
    d = std::max(d, std::abs((i + 1) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

}  // namespace

TEST_CASE("example space files parse with the declared geometry") {
  SearchSpace lenet = load_space_file(std::string(SPACES_DIR) + "/lenet.json");
  REQUIRE(lenet.params.size() == 4);
  const ParamSpec* lr = lenet.find("learning_rate");
  REQUIRE(lr != nullptr);
  CHECK(lr->kind == ParamKind::continuous);
  CHECK(lr->scale == ParamScale::log);
  CHECK(lr->lower == doctest::Approx(1e-3));
  CHECK(lr->upper == doctest::Approx(1e-1));
  const ParamSpec* k1 = lenet.find("layer1_kernels");
  REQUIRE(k1 != nullptr);
  REQUIRE(k1->upper_ref.has_value());
  CHECK(*k1->upper_ref == "layer2_kernels");

  SearchSpace lsqr = load_space_file(std::string(SPACES_DIR) + "/kernel_lsqr.json");
  const ParamSpec* degree = lsqr.find("degree");
  REQUIRE(degree != nullptr);
  REQUIRE(degree->active_when.has_value());
  CHECK(degree->active_when->param == "kernel");
  CHECK(degree->active_when->equals == std::vector<std::string>{"poly"});
  const ParamSpec* coef0 = lsqr.find("coef0");
  REQUIRE(coef0 != nullptr);
  CHECK(coef0->active_when->equals == std::vector<std::string>{"poly", "sigmoid"});

  CHECK_NOTHROW(load_space_file(std::string(SPACES_DIR) + "/cnn_cifar.json"));
  CHECK_NOTHROW(load_space_file(std::string(SPACES_DIR) + "/random_features.json"));
}

TEST_CASE("parse_space rejects malformed documents") {
  CHECK_THROWS_AS(parse_space("not json"), SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"no_params": []})"), SpaceError);
  CHECK_THROWS_WITH_AS(parse_space(R"({"params": []})"),
                       doctest::Contains("empty space"), SpaceError);
  CHECK_THROWS_WITH_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "continuous", "min": 0, "max": 1},
        {"name": "a", "kind": "continuous", "min": 0, "max": 1}]})"),
      doctest::Contains("duplicate name"), SpaceError);
  CHECK_THROWS_WITH_AS(
      parse_space(R"({"params": [{"name": "a", "kind": "continuous", "min": 2, "max": 1}]})"),
      doctest::Contains("bad bounds"), SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [{"name": "a", "kind": "continuous", "scale": "log", "min": 0, "max": 1}]})"),
      SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"params": [{"name": "a", "kind": "mystery", "min": 0, "max": 1}]})"),
                  SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"params": [{"name": "a", "min": 0, "max": 1}]})"), SpaceError);
  CHECK_THROWS_AS(parse_space(R"({"params": [{"name": "a", "kind": "categorical"}]})"), SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [{"name": "a", "kind": "categorical", "choices": ["x"], "min": 0}]})"),
      SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [{"name": "a", "kind": "continuous", "min": 0, "max": 1, "choices": ["x"]}]})"),
      SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [{"name": "a", "kind": "integer", "min": 0.5, "max": 3}]})"),
      SpaceError);
  // a self-reference is a cycle; forward references are rejected the same way
  CHECK_THROWS_WITH_AS(
      parse_space(R"({"params": [{"name": "a", "kind": "continuous", "min": 0, "max_ref": "a"}]})"),
      doctest::Contains("cyclic or forward reference"), SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "continuous", "min": 0, "max_ref": "b"},
        {"name": "b", "kind": "continuous", "min_ref": "a", "max": 9}]})"),
      SpaceError);
  // reference bounds must match the referencing parameter's kind
  CHECK_THROWS_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "integer", "min": 1, "max": 5},
        {"name": "b", "kind": "continuous", "min": 0, "max_ref": "a"}]})"),
      SpaceError);
  // active_when must name an earlier categorical parameter and real labels
  CHECK_THROWS_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "continuous", "min": 0, "max": 1,
         "active_when": {"param": "missing", "equals": "x"}}]})"),
      SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "continuous", "min": 0, "max": 1},
        {"name": "b", "kind": "continuous", "min": 0, "max": 1,
         "active_when": {"param": "a", "equals": "x"}}]})"),
      SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "categorical", "choices": ["x", "y"]},
        {"name": "b", "kind": "continuous", "min": 0, "max": 1,
         "active_when": {"param": "a", "equals": "z"}}]})"),
      SpaceError);
  CHECK_THROWS_AS(
      parse_space(R"({"params": [
        {"name": "a", "kind": "categorical", "choices": ["x", "y"]},
        {"name": "b", "kind": "continuous", "min": 0, "max": 1,
         "active_when": {"param": "a", "equals": []}}]})"),
      SpaceError);
  CHECK_THROWS_AS(load_space_file("/nonexistent/space.json"), SpaceError);
}

TEST_CASE("sampling respects bounds, references, and validation") {
  SearchSpace lenet = load_space_file(std::string(SPACES_DIR) + "/lenet.json");
  SplitMix64 rng(7);
  std::vector<Configuration> configs = sample(lenet, rng, 1000);
  REQUIRE(configs.size() == 1000);
  for (const auto& c : configs) {
    CHECK(validate(lenet, c).empty());
    double lr = num(c, "learning_rate");
    CHECK(lr >= 1e-3);
    CHECK(lr <= 1e-1);
    CHECK(std::holds_alternative<std::int64_t>(c.values.at("batch_size")));
    double bs = num(c, "batch_size");
    CHECK(bs >= 10);
    CHECK(bs <= 1000);
    CHECK(num(c, "layer1_kernels") >= 5);
    CHECK(num(c, "layer1_kernels") <= num(c, "layer2_kernels"));
    CHECK(num(c, "layer2_kernels") <= 60);
  }
}

TEST_CASE("sampling determinism and the i.i.d. prefix property") {
  SearchSpace lenet = load_space_file(std::string(SPACES_DIR) + "/lenet.json");
  SplitMix64 a(99), b(99), c(99);
  std::vector<Configuration> full = sample(lenet, a, 10);
  std::vector<Configuration> again = sample(lenet, b, 10);
  std::vector<Configuration> prefix = sample(lenet, c, 3);
  CHECK(full == again);
  REQUIRE(prefix.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(full[static_cast<std::size_t>(i)] == prefix[static_cast<std::size_t>(i)]);
}

TEST_CASE("log-scaled marginal is uniform in log within KS 0.02 at 1e5 samples") {
  SearchSpace space = parse_space(
      R"({"params": [{"name": "lr", "kind": "continuous", "scale": "log", "min": 1e-3, "max": 1e-1}]})");
  SplitMix64 rng(2024);
  std::vector<Configuration> configs = sample(space, rng, 100000);
  std::vector<double> logs;
  logs.reserve(configs.size());
  for (const auto& c : configs) logs.push_back(std::log(num(c, "lr")));
  CHECK(ks_uniform(std::move(logs), std::log(1e-3), std::log(1e-1)) <= 0.02);
}

TEST_CASE("conditional parameters are sampled only when active") {
  SearchSpace lsqr = load_space_file(std::string(SPACES_DIR) + "/kernel_lsqr.json");
  SplitMix64 rng(5);
  std::vector<Configuration> configs = sample(lsqr, rng, 2000);
  bool saw_poly = false, saw_other = false;
  for (const auto& c : configs) {
    const std::string& kernel = std::get<std::string>(c.values.at("kernel"));
    bool has_degree = c.values.count("degree") > 0;
    bool has_coef0 = c.values.count("coef0") > 0;
    CHECK(has_degree == (kernel == "poly"));
    CHECK(has_coef0 == (kernel == "poly" || kernel == "sigmoid"));
    if (has_degree) {
      double d = num(c, "degree");
      CHECK(d >= 2);
      CHECK(d <= 5);
    }
    saw_poly = saw_poly || kernel == "poly";
    saw_other = saw_other || kernel != "poly";
    CHECK(validate(lsqr, c).empty());
  }
  CHECK(saw_poly);
  CHECK(saw_other);
}

TEST_CASE("categorical sampling is uniform and a single choice is constant") {
  SearchSpace space = parse_space(
      R"({"params": [{"name": "opt", "kind": "categorical", "choices": ["sgd", "adam", "rmsprop"]}]})");
  SplitMix64 rng(3);
  std::map<std::string, int> freq;
  for (const auto& c : sample(space, rng, 3000)) ++freq[std::get<std::string>(c.values.at("opt"))];
  for (const auto& [label, count] : freq) {
    INFO(label);
    CHECK(count > 3000 / 3 - 150);
    CHECK(count < 3000 / 3 + 150);
  }

  SearchSpace single = parse_space(
      R"({"params": [{"name": "only", "kind": "categorical", "choices": ["x"]}]})");
  std::vector<Configuration> three = sample(single, rng, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0] == three[1]);
  CHECK(three[1] == three[2]);
  CHECK(std::get<std::string>(three[0].values.at("only")) == "x");
}

TEST_CASE("validate reports each violation kind") {
  SearchSpace lsqr = load_space_file(std::string(SPACES_DIR) + "/kernel_lsqr.json");
  SplitMix64 rng(1);
  Configuration good = sample(lsqr, rng, 1)[0];
  CHECK(validate(lsqr, good).empty());

  Configuration out_of_bounds = good;
  out_of_bounds.values["C"] = 1e9;
  auto v1 = validate(lsqr, out_of_bounds);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].find("out of bounds") != std::string::npos);

  Configuration unknown = good;
  unknown.values["mystery"] = 1.0;
  auto v2 = validate(lsqr, unknown);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].find("unknown parameter") != std::string::npos);

  Configuration inactive_present = good;
  inactive_present.values["kernel"] = std::string("rbf");
  inactive_present.values.erase("degree");
  inactive_present.values.erase("coef0");
  inactive_present.values["degree"] = std::int64_t{3};
  auto v3 = validate(lsqr, inactive_present);
  REQUIRE(v3.size() == 1);
  CHECK(v3[0].find("inactive parameter present") != std::string::npos);

  Configuration missing = good;
  missing.values.erase("C");
  auto v4 = validate(lsqr, missing);
  REQUIRE(v4.size() == 1);
  CHECK(v4[0].find("active parameter missing") != std::string::npos);

  Configuration bad_label = good;
  bad_label.values["preprocessor"] = std::string("noop");
  auto v5 = validate(lsqr, bad_label);
  REQUIRE(v5.size() == 1);
  CHECK(v5[0].find("not a declared choice") != std::string::npos);

  SearchSpace lenet = load_space_file(std::string(SPACES_DIR) + "/lenet.json");
  Configuration cfg = sample(lenet, rng, 1)[0];
  cfg.values["batch_size"] = 0.5;  // double where an integer is required
  auto v6 = validate(lenet, cfg);
  REQUIRE(v6.size() == 1);
  CHECK(v6[0].find("must be an integer") != std::string::npos);

  Configuration no_ref = sample(lenet, rng, 1)[0];
  no_ref.values.erase("layer2_kernels");
  auto v7 = validate(lenet, no_ref);
  bool mentions_ref = false, mentions_missing = false;
  for (const auto& v : v7) {
    mentions_ref = mentions_ref || v.find("reference bound") != std::string::npos;
    mentions_missing = mentions_missing || v.find("active parameter missing") != std::string::npos;
  }
  CHECK(mentions_ref);
  CHECK(mentions_missing);
}

TEST_CASE("reference bounds resolved against trailing declaration violate cleanly") {
  // upper bound below lower after resolution is reported, not silently clamped
  SearchSpace space = parse_space(
      R"({"params": [
        {"name": "hi", "kind": "integer", "min": 1, "max": 10},
        {"name": "lo", "kind": "integer", "min": 1, "max_ref": "hi"}]})");
  Configuration c;
  c.values["hi"] = std::int64_t{4};
  c.values["lo"] = std::int64_t{7};
  auto v = validate(space, c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("out of bounds") != std::string::npos);
}
