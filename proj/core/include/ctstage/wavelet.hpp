#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ctstage {

enum class Wavelet { Haar, Db2, Sym5 };

std::string to_string(Wavelet w);
Wavelet wavelet_from_string(const std::string& name);
/// Orthonormal decomposition low-pass filter.
std::span<const double> lowpass_filter(Wavelet w);

/// Row-major 2-D plane. Axis 0 is "vertical" (sinogram angle axis), axis 1
/// "horizontal" (detector axis).
struct Plane {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

/// Detail bands of one decomposition level. Names give the filter applied
/// along (axis 0, axis 1): `low_high` is low-pass along axis 0 and high-pass
/// along axis 1, the band holding structures constant along axis 0.
struct DetailBands {
  Plane low_high;
  Plane high_low;
  Plane high_high;
};

struct WaveletDecomposition {
  Wavelet wavelet = Wavelet::Haar;
  std::size_t rows = 0;  // original extent
  std::size_t cols = 0;
  Plane approx;
  std::vector<DetailBands> levels;  // levels[0] is the finest
};

/// Periodic orthonormal 2-D DWT after symmetric padding of both axes to a
/// multiple of 2^level.
WaveletDecomposition dwt2(const Plane& input, Wavelet w, std::size_t level);
Plane idwt2(const WaveletDecomposition& dec);

}  // namespace ctstage
