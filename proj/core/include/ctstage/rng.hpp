#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ctstage {

/// Seeded random stream. Engine is std::mt19937_64, whose output sequence is
/// fixed by the C++ standard; the distributions below are implemented here so
/// draws do not depend on the standard library vendor.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double next_unit();
  double uniform(double lo, double hi);
  double normal(double mu, double sigma);
  std::int64_t poisson(double lambda);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  double standard_normal();

  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministically derives an independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ctstage
