#pragma once

// Internal FFTW wrapper: applies a real, even frequency response to real 1-D
// sequences. Not thread-safe (FFTW planning is process-global).

#include <complex>
#include <cstddef>
#include <span>

#include <fftw3.h>

namespace ctstage::detail {

class RealSpectralFilter {
 public:
  /// `response[k]` multiplies DFT bin k (and its mirror n-k); length n/2 + 1.
  RealSpectralFilter(std::size_t n, std::span<const double> response);
  ~RealSpectralFilter();
  RealSpectralFilter(const RealSpectralFilter&) = delete;
  RealSpectralFilter& operator=(const RealSpectralFilter&) = delete;

  std::size_t length() const noexcept { return n_; }

  /// Filters `signal` (length <= n, zero-padded to n) and writes the first
  /// out.size() samples of the result.
  void apply(std::span<const double> signal, std::span<double> out);

 private:
  std::size_t n_;
  double* time_ = nullptr;
  fftw_complex* freq_ = nullptr;
  double* response_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace ctstage::detail
