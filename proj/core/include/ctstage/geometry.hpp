#pragma once

#include <cstddef>
#include <vector>

#include "ctstage/array.hpp"

namespace ctstage {

/// Parallel-beam scan: one detector row per volume slice, detector pitch equal
/// to one voxel, rotation centre at the middle of the detector.
struct ParallelGeometry {
  std::vector<double> angles;
  std::size_t rows = 0;  // M, equals the volume's slice count
  std::size_t cols = 0;  // N, equals the slice width and height

  static ParallelGeometry equispaced(std::size_t n_angles, std::size_t rows, std::size_t cols);

  std::size_t n_angles() const noexcept { return angles.size(); }
  void validate() const;
};

/// k * pi / n for k = 0..n-1.
std::vector<double> equispaced_angles(std::size_t n);
bool is_equispaced(const std::vector<double>& angles, double tol = 1e-9);

SinogramStack rearrange(const ProjectionStack& p);
ProjectionStack rearrange_inverse(const SinogramStack& s);

/// Ray sums with bilinear interpolation and unit step along each ray.
ProjectionStack forward_project(const Volume& v, const ParallelGeometry& g);

/// Per-slice filtered backprojection (Ram-Lak, no apodization), scaled by
/// pi / n_angles. Linear in `s`.
Volume fbp(const SinogramStack& s, const ParallelGeometry& g);

/// Keeps every factor-th projection starting at index 0.
ProjectionStack subsample_angles(const ProjectionStack& p, std::size_t factor);

/// Linear interpolation along the angle axis onto `target_rows` equispaced
/// angles. The half-turn symmetry s(theta + pi, u) = s(theta, -u) supplies the
/// neighbour for targets past the last input angle.
SinogramStack upsample_sinogram(const SinogramStack& s, std::size_t target_rows);

/// Zeroes voxels outside the inscribed circle of every slice.
Volume circular_mask(Volume v);

}  // namespace ctstage
