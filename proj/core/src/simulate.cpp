#include "ctstage/simulate.hpp"

#include "ctstage/error.hpp"
#include "ctstage/geometry.hpp"

namespace ctstage {

void SimulationSpec::validate() const {
  require(hq_angles >= 2, "simulate.hq_angles must be at least 2");
  require(lq_factor >= 1, "simulate.lq_factor must be at least 1");
  require(hq_angles % lq_factor == 0, "simulate.hq_angles must be divisible by simulate.lq_factor");
  require(hq_angles / lq_factor >= 2, "simulate: the LQ scan needs at least 2 angles");
  degrade.validate();
}

SimulatedScan simulate_scan(const Volume& phantom, const SimulationSpec& spec) {
  spec.validate();
  phantom.validate();
  const auto [nz, ny, nx] = phantom.data.shape();
  require(ny == nx, "simulate: phantom slices must be square");
  const ParallelGeometry g = ParallelGeometry::equispaced(spec.hq_angles, nz, nx);

  SimulatedScan out;
  ProjectionStack p = forward_project(phantom, g);
  out.attenuation_scale = spec.calibrate ? absorption_scale(p, spec.degrade.absorption_target) : 1.0;
  if (!(out.attenuation_scale > 0.0)) throw NumericError("simulate: phantom has no attenuation");
  out.phantom = phantom;
  out.phantom.data *= out.attenuation_scale;
  p.data *= out.attenuation_scale;
  out.p_hq = std::move(p);
  out.r_hq = circular_mask(fbp(rearrange(out.p_hq), g));

  out.p_lq_clean = subsample_angles(out.p_hq, spec.lq_factor);
  out.p_lq = degrade(out.p_lq_clean, spec.degrade);
  const ParallelGeometry lq{out.p_lq.angles, nz, nx};
  out.r_lq = circular_mask(fbp(rearrange(out.p_lq), lq));
  return out;
}

}  // namespace ctstage
