#pragma once

#include <cstddef>
#include <cstdint>

#include "ctstage/array.hpp"
#include "ctstage/degrade.hpp"
#include "ctstage/phantom.hpp"

namespace ctstage {

struct SimulationSpec {
  std::size_t hq_angles = 256;
  std::size_t lq_factor = 4;  // LQ keeps every lq_factor-th HQ angle
  DegradeSpec degrade;
  /// Scale the attenuation so clean HQ projections sit at alpha = 1 (the
  /// degradation model's absorbance units).
  bool calibrate = true;

  void validate() const;
};

/// Everything derived from one phantom.
struct SimulatedScan {
  Volume phantom;           // scaled attenuation
  double attenuation_scale = 1.0;
  ProjectionStack p_hq;     // clean, HQ angles
  ProjectionStack p_lq;     // degraded, LQ angles
  ProjectionStack p_lq_clean;
  Volume r_hq;              // mask(fbp(T(p_hq)))
  Volume r_lq;              // mask(fbp(T(p_lq)))
};

SimulatedScan simulate_scan(const Volume& phantom, const SimulationSpec& spec);

}  // namespace ctstage
