#pragma once

#include <cstdint>

namespace hbopt {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Sequential splitmix64 stream; cheap to seed and fully deterministic, which
// the reproducibility contracts require (library distributions may vary
// between standard-library implementations).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    return detail::mix64(state_);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // inclusive range, rejection sampled so every value is equally likely
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(next());  // full range
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span + 1) % span;
    std::uint64_t draw;
    do {
      draw = next();
    } while (draw > limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

 private:
  std::uint64_t state_;
};

// Stateless counter-based stream: the value depends only on (seed, arm_id,
// index), so distinct arms can be sampled concurrently and a stream can be
// extended without storing past draws.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t arm_id,
                                  std::uint64_t index) {
  std::uint64_t h = detail::mix64(seed + 0x9E3779B97F4A7C15ull);
  h = detail::mix64(h ^ (arm_id + 0xBF58476D1CE4E5B9ull));
  h = detail::mix64(h ^ (index + 0x94D049BB133111EBull));
  return h;
}

inline double counter_uniform01(std::uint64_t seed, std::uint64_t arm_id,
                                std::uint64_t index) {
  return static_cast<double>(counter_hash(seed, arm_id, index) >> 11) * 0x1.0p-53;
}

}  // namespace hbopt
