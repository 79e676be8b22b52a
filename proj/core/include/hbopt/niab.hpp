#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hbopt/evaluator.hpp"
#include "hbopt/gamma.hpp"
#include "hbopt/rng.hpp"

namespace hbopt::sim {

enum class Family { beta_continuous, discrete, stochastic, adversarial };
enum class Noise { none, bernoulli, uniform_bounded };
enum class EnvelopeSign { plus, alternating, adversarial };

std::string to_string(Family f);
std::string to_string(Noise n);
std::string to_string(EnvelopeSign s);

struct TheoryInstance {
  Family family = Family::beta_continuous;
  double alpha = 1.0;    // envelope exponent
  double beta = 1.0;     // CDF exponent
  double nu_star = 0.0;  // best limit; discrete family uses mu.front()
  std::vector<double> mu;  // discrete family: strictly increasing means in [0,1]
  Noise noise = Noise::none;
  std::uint64_t seed = 0;
  EnvelopeSign envelope_sign = EnvelopeSign::plus;
  double nu_hat = 0.25;       // reflection point when envelope_sign == adversarial
  double noise_width = 0.25;  // uniform_bounded half-width (shrunk to keep the mean exact)
  std::optional<std::int64_t> horizon_R;  // finite horizon: loss at j >= R equals nu

  void check() const;
  nlohmann::json to_json() const;
  static TheoryInstance from_json(const nlohmann::json& j);
};

double nu_star_of(const TheoryInstance& instance);

// Limit-distribution CDF and its (extended) inverse.
double f_cdf(const TheoryInstance& instance, double x);
double f_inv(const TheoryInstance& instance, double y);

// Appendix-style reflection: values inside the band [nu_hat, nu_hat+gamma_j]
// are mirrored across its center; everything else is untouched.
double adversarial_reflect(double nu_hat, double gamma_j, double lstar);

class SyntheticArm {
 public:
  virtual ~SyntheticArm() = default;
  virtual double loss(std::int64_t j) = 0;
  virtual double limit() const = 0;
  // deterministic arms can be queried at any level, in any order
  virtual bool rewindable() const = 0;
};

// LossOracle over synthetic arms: dispatches to ArmState::synthetic.
class SimOracle : public LossOracle {
 public:
  double evaluate(ArmState& arm, std::int64_t resource, std::int64_t trial_id) override;
  bool resumable() const override { return true; }
};

std::vector<double> draw_limits(const TheoryInstance& instance, SplitMix64& rng, std::int64_t n);

ArmPtr make_envelope_arm(const TheoryInstance& instance, double nu, std::int64_t arm_id);
ArmPtr make_stochastic_arm(const TheoryInstance& instance, double nu, std::int64_t arm_id);

// Draws n limits and wraps them in the family-appropriate arm type.
std::vector<ArmPtr> make_arms(const TheoryInstance& instance, SplitMix64& rng, std::int64_t n,
                              std::int64_t id_base = 0);

// Fresh ArmState sharing a deterministic synthetic handle (not valid for
// stochastic arms, whose streams are stateful).
ArmPtr clone_arm(const ArmPtr& arm);

struct AdversarialInstance {
  std::vector<ArmPtr> arms;
  double nu_hat = 0;
  double target_regret = 0;           // 2(nu_hat - nu_star)
  std::int64_t threshold_budget = 0;  // n * gamma_inv(2(nu_hat - nu_star))
};

AdversarialInstance make_adversarial_instance(std::int64_t n, double delta, double alpha,
                                              double beta, SplitMix64& rng, double nu_star = 0.0);

}  // namespace hbopt::sim
