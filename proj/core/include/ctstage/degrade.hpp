#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctstage/array.hpp"
#include "ctstage/rng.hpp"

namespace ctstage {

struct DegradeSpec {
  double I0 = 100.0;
  double absorption_target = 0.5;
  double P_ring = 0.0;
  double sigma_ring = 0.005;
  double P_proj = 0.10;
  double P_zinger = 0.0;
  double v_zinger = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const DegradeSpec& d);
DegradeSpec degrade_spec_from_json(const nlohmann::json& j);

/// Fixed per-detector-pixel offsets, shape (M, N) stored as (1, M, N).
struct RingPattern {
  Array3 deviation;
  Array3 mask;
};

/// Scale alpha such that mean(exp(-alpha * p)) over pixels with p > 0 equals
/// 1 - absorption_target.
double absorption_scale(const ProjectionStack& p, double absorption_target);

/// Photon-count noise: c ~ Poisson(I0 exp(-alpha p)), p' = -ln(max(c, 1) / I0) / alpha.
ProjectionStack apply_poisson_noise(const ProjectionStack& p, double I0, double absorption_target, Rng& rng);

RingPattern make_ring_pattern(std::size_t rows, std::size_t cols, double P_ring, double sigma_ring, Rng& rng);

/// Adds the same detector offset image to every projection.
ProjectionStack apply_ring(const ProjectionStack& p, const RingPattern& pattern);

/// Sets a random pixel subset of a random projection subset to `value`.
ProjectionStack apply_zinger(const ProjectionStack& p, double P_proj, double P_zinger, double value, Rng& rng);

/// Noise, then rings, then zingers, each with a sub-seed derived from spec.seed.
ProjectionStack degrade(const ProjectionStack& p, const DegradeSpec& spec);

/// -ln((raw - dark) / (flat - dark)) with median (or first-field) aggregation.
/// Transmission is clamped to [1e-6, 10].
ProjectionStack flat_field_correct(const Array3& raw, const std::vector<Array3>& flats,
                                   const std::vector<Array3>& darks, bool use_median,
                                   std::vector<double> angles);

/// Pixelwise median of equally shaped images (mean of the two middle values
/// for an even count).
Array3 pixelwise_median(const std::vector<Array3>& images);

/// round(fraction * total), the count of selected items for a fraction.
std::size_t fraction_count(double fraction, std::size_t total);

}  // namespace ctstage
