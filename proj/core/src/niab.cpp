#include "hbopt/niab.hpp"

#include <algorithm>
#include <cmath>

namespace hbopt::sim {

using nlohmann::json;

std::string to_string(Family f) {
  switch (f) {
    case Family::beta_continuous: return "beta_continuous";
    case Family::discrete: return "discrete";
    case Family::stochastic: return "stochastic";
    case Family::adversarial: return "adversarial";
  }
  return "?";
}

std::string to_string(Noise n) {
  switch (n) {
    case Noise::none: return "none";
    case Noise::bernoulli: return "bernoulli";
    case Noise::uniform_bounded: return "uniform_bounded";
  }
  return "?";
}

std::string to_string(EnvelopeSign s) {
  switch (s) {
    case EnvelopeSign::plus: return "plus";
    case EnvelopeSign::alternating: return "alternating";
    case EnvelopeSign::adversarial: return "adversarial";
  }
  return "?";
}

namespace {

template <typename E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
            const std::string& what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw UsageError("unknown " + what + " '" + s + "'");
}

}  // namespace

void TheoryInstance::check() const {
  if (alpha <= 0 || beta <= 0) throw UsageError("instance: alpha and beta must be positive");
  if (family == Family::discrete) {
    if (mu.size() < 1) throw UsageError("instance: discrete family needs mu values");
    for (std::size_t i = 0; i + 1 < mu.size(); ++i)
      if (!(mu[i] < mu[i + 1])) throw UsageError("instance: mu must be strictly increasing");
    if (mu.front() < 0 || mu.back() > 1) throw UsageError("instance: mu must lie in [0,1]");
  } else {
    if (nu_star < 0 || nu_star >= 1) throw UsageError("instance: nu_star must be in [0,1)");
  }
  if (family == Family::stochastic && noise == Noise::none)
    throw UsageError("instance: stochastic family needs a noise model");
  if (noise_width <= 0) throw UsageError("instance: noise_width must be positive");
  if (horizon_R && *horizon_R < 1) throw UsageError("instance: horizon R must be >= 1");
}

json TheoryInstance::to_json() const {
  json j{{"family", to_string(family)},   {"alpha", alpha},
         {"beta", beta},                  {"nu_star", nu_star},
         {"noise", to_string(noise)},     {"seed", seed},
         {"envelope_sign", to_string(envelope_sign)},
         {"nu_hat", nu_hat},
         {"noise_width", noise_width}};
  if (!mu.empty()) j["mu"] = mu;
  if (horizon_R) j["R"] = *horizon_R;
  return j;
}

TheoryInstance TheoryInstance::from_json(const json& j) {
  TheoryInstance inst;
  if (j.contains("family"))
    inst.family = enum_from<Family>(j["family"].get<std::string>(),
                                    {{"beta_continuous", Family::beta_continuous},
                                     {"discrete", Family::discrete},
                                     {"stochastic", Family::stochastic},
                                     {"adversarial", Family::adversarial}},
                                    "family");
  inst.alpha = j.value("alpha", 1.0);
  inst.beta = j.value("beta", 1.0);
  inst.nu_star = j.value("nu_star", 0.0);
  if (j.contains("mu")) inst.mu = j["mu"].get<std::vector<double>>();
  if (j.contains("noise"))
    inst.noise = enum_from<Noise>(j["noise"].get<std::string>(),
                                  {{"none", Noise::none},
                                   {"bernoulli", Noise::bernoulli},
                                   {"uniform_bounded", Noise::uniform_bounded}},
                                  "noise");
  inst.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("envelope_sign"))
    inst.envelope_sign = enum_from<EnvelopeSign>(j["envelope_sign"].get<std::string>(),
                                                 {{"plus", EnvelopeSign::plus},
                                                  {"alternating", EnvelopeSign::alternating},
                                                  {"adversarial", EnvelopeSign::adversarial}},
                                                 "envelope_sign");
  inst.nu_hat = j.value("nu_hat", 0.25);
  inst.noise_width = j.value("noise_width", 0.25);
  if (j.contains("R")) inst.horizon_R = j["R"].get<std::int64_t>();
  inst.check();
  return inst;
}

double nu_star_of(const TheoryInstance& instance) {
  return instance.family == Family::discrete ? instance.mu.front() : instance.nu_star;
}

double f_cdf(const TheoryInstance& instance, double x) {
  if (instance.family == Family::discrete) {
    const auto& mu = instance.mu;
    auto count = std::upper_bound(mu.begin(), mu.end(), x) - mu.begin();
    return static_cast<double>(count) / static_cast<double>(mu.size());
  }
  double u = x - instance.nu_star;
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  return std::pow(u, instance.beta);
}

double f_inv(const TheoryInstance& instance, double y) {
  if (instance.family == Family::discrete) {
    // min{x : F(x) >= y}; y outside (0,1] clamps to the support's ends
    const auto& mu = instance.mu;
    if (y <= 0) return mu.front();
    std::size_t k = static_cast<std::size_t>(
        std::ceil(y * static_cast<double>(mu.size()) - 1e-12));
    if (k < 1) k = 1;
    if (k > mu.size()) k = mu.size();
    return mu[k - 1];
  }
  if (y <= 0) return instance.nu_star;
  if (y >= 1) return instance.nu_star + 1;
  return instance.nu_star + std::pow(y, 1.0 / instance.beta);
}

double adversarial_reflect(double nu_hat, double gamma_j, double lstar) {
  double center = nu_hat + gamma_j / 2;
  if (std::abs(center - lstar) <= gamma_j / 2) return 2 * center - lstar;
  return lstar;
}

double SimOracle::evaluate(ArmState& arm, std::int64_t resource, std::int64_t) {
  if (!arm.synthetic)
    throw UsageError("simulator: arm " + std::to_string(arm.arm_id) + " has no synthetic handle");
  return arm.synthetic->loss(resource);
}

namespace {

class EnvelopeArm : public SyntheticArm {
 public:
  EnvelopeArm(double nu, double alpha, EnvelopeSign sign, std::optional<std::int64_t> horizon)
      : nu_(nu), alpha_(alpha), sign_(sign), horizon_(horizon) {}

  double loss(std::int64_t j) override {
    if (j < 1) throw UsageError("arm: resource level must be >= 1");
    if (horizon_ && j >= *horizon_) return nu_;  // terminal loss at the horizon
    double g = gamma_of(alpha_, j);
    if (sign_ == EnvelopeSign::plus) return nu_ + g;
    // alternating: nu + (-1)^j gamma(j), clamped below by nu
    return j % 2 == 0 ? nu_ + g : nu_;
  }
  double limit() const override { return nu_; }
  bool rewindable() const override { return true; }

 private:
  double nu_, alpha_;
  EnvelopeSign sign_;
  std::optional<std::int64_t> horizon_;
};

class AdversarialArm : public SyntheticArm {
 public:
  AdversarialArm(double lstar, double nu_hat, double alpha, std::optional<std::int64_t> horizon)
      : lstar_(lstar), nu_hat_(nu_hat), alpha_(alpha), horizon_(horizon) {}

  double loss(std::int64_t j) override {
    if (j < 1) throw UsageError("arm: resource level must be >= 1");
    if (horizon_ && j >= *horizon_) return lstar_;
    return adversarial_reflect(nu_hat_, gamma_of(alpha_, j), lstar_);
  }
  double limit() const override { return lstar_; }
  bool rewindable() const override { return true; }

 private:
  double lstar_, nu_hat_, alpha_;
  std::optional<std::int64_t> horizon_;
};

class StochasticArm : public SyntheticArm {
 public:
  StochasticArm(double nu, Noise noise, double width, std::uint64_t seed, std::int64_t arm_id)
      : nu_(nu), noise_(noise), seed_(seed), arm_id_(static_cast<std::uint64_t>(arm_id)) {
    width_ = std::min({width, nu, 1 - nu});  // symmetric support keeps the mean exact
    if (width_ < 0) width_ = 0;
  }

  double loss(std::int64_t j) override {
    if (j < 1) throw UsageError("arm: resource level must be >= 1");
    if (j < count_)
      throw UsageError("non-monotone resource request: arm " + std::to_string(arm_id_) +
                       " was asked for level " + std::to_string(j) + " after level " +
                       std::to_string(count_));
    for (std::int64_t idx = count_ + 1; idx <= j; ++idx) sum_ += draw(idx);
    count_ = j;
    return sum_ / static_cast<double>(j);
  }
  double limit() const override { return nu_; }
  bool rewindable() const override { return false; }

 private:
  double draw(std::int64_t idx) const {
    double u = counter_uniform01(seed_, arm_id_, static_cast<std::uint64_t>(idx));
    if (noise_ == Noise::bernoulli) return u < nu_ ? 1.0 : 0.0;
    return nu_ + (2 * u - 1) * width_;
  }
  double nu_;
  Noise noise_;
  double width_;
  std::uint64_t seed_, arm_id_;
  std::int64_t count_ = 0;
  double sum_ = 0;
};

ArmPtr wrap_arm(std::shared_ptr<SyntheticArm> synthetic, double nu, std::int64_t arm_id) {
  auto arm = std::make_shared<ArmState>();
  arm->arm_id = arm_id;
  arm->synthetic = std::move(synthetic);
  arm->limit_loss = nu;
  return arm;
}

}  // namespace

std::vector<double> draw_limits(const TheoryInstance& instance, SplitMix64& rng, std::int64_t n) {
  instance.check();
  if (n < 1) throw UsageError("draw_limits: n must be >= 1");
  if (instance.family == Family::adversarial)
    throw UsageError("draw_limits: adversarial limits are constructed, use make_adversarial_instance");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    if (instance.family == Family::discrete) {
      std::int64_t idx = rng.uniform_int(0, static_cast<std::int64_t>(instance.mu.size()) - 1);
      out.push_back(instance.mu[static_cast<std::size_t>(idx)]);
    } else {
      // inverse CDF of F(x) = (x - nu_star)^beta
      out.push_back(instance.nu_star + std::pow(rng.uniform01(), 1.0 / instance.beta));
    }
  }
  return out;
}

ArmPtr make_envelope_arm(const TheoryInstance& instance, double nu, std::int64_t arm_id) {
  instance.check();
  if (instance.family != Family::beta_continuous && instance.family != Family::discrete)
    throw UsageError("make_envelope_arm: family must be beta_continuous or discrete");
  if (instance.envelope_sign == EnvelopeSign::adversarial)
    return wrap_arm(std::make_shared<AdversarialArm>(nu, instance.nu_hat, instance.alpha,
                                                     instance.horizon_R),
                    nu, arm_id);
  return wrap_arm(std::make_shared<EnvelopeArm>(nu, instance.alpha, instance.envelope_sign,
                                                instance.horizon_R),
                  nu, arm_id);
}

ArmPtr make_stochastic_arm(const TheoryInstance& instance, double nu, std::int64_t arm_id) {
  instance.check();
  if (instance.noise == Noise::none)
    throw UsageError("make_stochastic_arm: instance has no noise model");
  if (nu < 0 || nu > 1) throw UsageError("make_stochastic_arm: nu must be in [0,1]");
  return wrap_arm(std::make_shared<StochasticArm>(nu, instance.noise, instance.noise_width,
                                                  instance.seed, arm_id),
                  nu, arm_id);
}

std::vector<ArmPtr> make_arms(const TheoryInstance& instance, SplitMix64& rng, std::int64_t n,
                              std::int64_t id_base) {
  if (instance.family == Family::adversarial)
    throw UsageError("make_arms: use make_adversarial_instance for the adversarial family");
  std::vector<double> limits = draw_limits(instance, rng, n);
  std::vector<ArmPtr> arms;
  arms.reserve(limits.size());
  bool stochastic = instance.family == Family::stochastic || instance.noise != Noise::none;
  for (std::size_t i = 0; i < limits.size(); ++i) {
    std::int64_t id = id_base + static_cast<std::int64_t>(i);
    arms.push_back(stochastic ? make_stochastic_arm(instance, limits[i], id)
                              : make_envelope_arm(instance, limits[i], id));
  }
  return arms;
}

ArmPtr clone_arm(const ArmPtr& arm) {
  if (!arm->synthetic || !arm->synthetic->rewindable())
    throw UsageError("clone_arm: only deterministic synthetic arms can be cloned");
  auto fresh = std::make_shared<ArmState>();
  fresh->arm_id = arm->arm_id;
  fresh->synthetic = arm->synthetic;
  fresh->limit_loss = arm->limit_loss;
  fresh->config = arm->config;
  return fresh;
}

AdversarialInstance make_adversarial_instance(std::int64_t n, double delta, double alpha,
                                              double beta, SplitMix64& rng, double nu_star) {
  if (n < 1) throw UsageError("make_adversarial_instance: n must be >= 1");
  if (delta <= 0 || delta >= 1) throw UsageError("make_adversarial_instance: delta must be in (0,1)");
  if (alpha <= 0 || beta <= 0) throw UsageError("make_adversarial_instance: alpha, beta must be positive");

  TheoryInstance base;
  base.family = Family::beta_continuous;
  base.alpha = alpha;
  base.beta = beta;
  base.nu_star = nu_star;

  double c = 1 - std::pow(2.0, -beta);  // regularity constant for F(nu*+eps) = eps^beta
  double q = std::log(c / delta);
  if (q <= 0)
    throw UsageError("make_adversarial_instance: delta too large for the regularity constant");
  double nu_hat = f_inv(base, q / (static_cast<double>(n) + q));
  if (!(nu_hat > nu_star) || nu_hat >= 1)
    throw UsageError("make_adversarial_instance: parameters put nu_hat outside (nu_star, 1)");

  AdversarialInstance out;
  out.nu_hat = nu_hat;
  out.target_regret = 2 * (nu_hat - nu_star);
  out.threshold_budget = n * gamma_inv_unclamped(alpha, out.target_regret);
  std::vector<double> limits = draw_limits(base, rng, n);
  out.arms.reserve(limits.size());
  for (std::size_t i = 0; i < limits.size(); ++i) {
    auto arm = wrap_arm(std::make_shared<AdversarialArm>(limits[i], nu_hat, alpha, std::nullopt),
                        limits[i], static_cast<std::int64_t>(i));
    out.arms.push_back(std::move(arm));
  }
  return out;
}

}  // namespace hbopt::sim
