#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ctstage/array.hpp"

namespace ctstage {

/// Binary foam: a solid cylinder (axis along the slice index) with
/// non-overlapping spherical voids.
struct FoamSpec {
  std::size_t size = 128;  // N; the volume is N x N x N
  std::size_t bubbles = 300;
  double r_min = 2.0;
  double r_max = 8.0;
  double cylinder_fraction = 0.95;  // cylinder radius = fraction * N / 2
  std::size_t max_attempts = 200000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Bubble {
  double x, y, z, r;
};

struct FoamPhantom {
  Volume volume;
  std::vector<Bubble> bubbles;
  /// Requested minus placed bubbles when placement ran out of attempts.
  std::size_t shortfall = 0;
};

/// Rejection-samples bubbles (log-uniform radii) until the target count or the
/// attempt budget is reached, then voxelizes. Deterministic in spec.seed.
FoamPhantom generate_foam(const FoamSpec& spec);

}  // namespace ctstage
