#ifndef MCDIMPUTE_RNG_HPP
#define MCDIMPUTE_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace mcdi {

/// Seeded random stream. Child streams depend only on (seed, label), never
/// on how many draws the parent has made, so work can be handed to threads
/// in any order and still reproduce.
class RngStream {
 public:
  static constexpr std::string_view algorithm = "mt19937_64";

  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  RngStream child(std::string_view label) const;
  RngStream child(std::uint64_t index) const;

  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace mcdi

#endif  // MCDIMPUTE_RNG_HPP
