#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctstage/array.hpp"
#include "ctstage/wavelet.hpp"

namespace ctstage {

/// Parameters of the classical chain: median-based outlier removal on
/// projections, then wavelet-Fourier stripe removal on sinograms.
struct ClassicalParams {
  double dif = 0.5;    // outlier threshold, attenuation units
  std::size_t size = 3;  // odd median window side
  std::size_t level = 4;
  Wavelet wavelet = Wavelet::Db2;
  double sigma = 2.0;  // Fourier damping width, angle-frequency bins

  void validate() const;
  friend bool operator==(const ClassicalParams&, const ClassicalParams&) = default;
};

/// size x size median of each plane of `a`, half-sample symmetric edges.
Array3 median_filter_planes(const Array3& a, std::size_t size);

/// Replaces pixels exceeding their local median by more than `dif` with that
/// median. One-sided: low outliers are kept.
ProjectionStack remove_outlier_median(const ProjectionStack& p, double dif, std::size_t size);

/// Damps, per decomposition level, the Fourier coefficients along the angle
/// axis of the band that is low-pass along angles and high-pass along the
/// detector, by g(k) = 1 - exp(-k^2 / (2 sigma^2)).
SinogramStack ring_removal_wavelet_fourier(const SinogramStack& s, std::size_t level, Wavelet wavelet,
                                           double sigma);

Volume median_denoise(const Volume& r, std::size_t size);

/// Outlier removal followed by stripe removal, returned as projections.
ProjectionStack apply_classical_chain(const ProjectionStack& p, const ClassicalParams& params);

enum class GridDomain { Projection, Reconstruction };

struct GridScore {
  ClassicalParams params;
  double mse = 0.0;
};

struct GridSearchResult {
  ClassicalParams best;
  std::size_t best_index = 0;
  std::vector<GridScore> table;  // in grid order
};

struct GridSearchInput {
  ProjectionStack corrupted;
  GridDomain domain = GridDomain::Projection;
  std::optional<ProjectionStack> projection_reference;  // angle-matched to `corrupted`
  std::optional<Volume> reconstruction_reference;
  std::size_t median_denoise_size = 0;  // 0 disables the reconstruction-domain median
};

/// Exhaustive MSE evaluation of every grid point; ties go to the earlier entry.
GridSearchResult grid_search(const std::vector<ClassicalParams>& grid, const GridSearchInput& input);

/// Full chain through reconstruction: classical chain, FBP at the input
/// angles, circular mask, optional median denoise.
Volume classical_reconstruction(const ProjectionStack& p, const ClassicalParams& params,
                                std::size_t median_denoise_size);

void write_score_csv(std::ostream& os, const std::vector<GridScore>& table);

}  // namespace ctstage
