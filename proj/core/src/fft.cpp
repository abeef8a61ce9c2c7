#include "fft.hpp"

#include <algorithm>
#include <cstring>

#include "ctstage/error.hpp"

namespace ctstage::detail {

RealSpectralFilter::RealSpectralFilter(std::size_t n, std::span<const double> response) : n_(n) {
  require(n >= 1, "spectral filter length must be positive");
  require(response.size() == n / 2 + 1, "spectral filter response must have n/2 + 1 bins");
  time_ = fftw_alloc_real(n);
  freq_ = fftw_alloc_complex(n / 2 + 1);
  response_ = fftw_alloc_real(n / 2 + 1);
  std::copy(response.begin(), response.end(), response_);
  const int len = static_cast<int>(n);
  // FFTW_ESTIMATE keeps the chosen algorithm, and therefore the rounding, fixed.
  forward_ = fftw_plan_dft_r2c_1d(len, time_, freq_, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r_1d(len, freq_, time_, FFTW_ESTIMATE);
}

RealSpectralFilter::~RealSpectralFilter() {
  if (forward_) fftw_destroy_plan(forward_);
  if (backward_) fftw_destroy_plan(backward_);
  fftw_free(time_);
  fftw_free(freq_);
  fftw_free(response_);
}

void RealSpectralFilter::apply(std::span<const double> signal, std::span<double> out) {
  require(signal.size() <= n_ && out.size() <= n_, "spectral filter input longer than transform");
  std::fill(time_, time_ + n_, 0.0);
  std::copy(signal.begin(), signal.end(), time_);
  fftw_execute(forward_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k <= n_ / 2; ++k) {
    const double g = response_[k] * scale;
    freq_[k][0] *= g;
    freq_[k][1] *= g;
  }
  fftw_execute(backward_);
  std::copy(time_, time_ + out.size(), out.begin());
}

}  // namespace ctstage::detail
