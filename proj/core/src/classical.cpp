#include "ctstage/classical.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include "ctstage/error.hpp"
#include "ctstage/geometry.hpp"
#include "ctstage/metrics.hpp"
#include "fft.hpp"

namespace ctstage {

namespace {

std::size_t mirror(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

void require_window(std::size_t size) {
  require(size >= 3 && size % 2 == 1, "median window size must be odd and >= 3");
}

void damp_angle_axis(Plane& band, double sigma) {
  const std::size_t n = band.rows;
  std::vector<double> response(n / 2 + 1);
  for (std::size_t k = 0; k < response.size(); ++k) {
    const double kk = static_cast<double>(k);
    response[k] = -std::expm1(-kk * kk / (2.0 * sigma * sigma));
  }
  detail::RealSpectralFilter filter(n, response);
  std::vector<double> column(n);
  for (std::size_t c = 0; c < band.cols; ++c) {
    for (std::size_t r = 0; r < n; ++r) column[r] = band.at(r, c);
    filter.apply(column, column);
    for (std::size_t r = 0; r < n; ++r) band.at(r, c) = column[r];
  }
}

}  // namespace

void ClassicalParams::validate() const {
  require(dif > 0.0, "classical dif must be > 0");
  require_window(size);
  require(level >= 1, "classical level must be >= 1");
  require(sigma > 0.0, "classical sigma must be > 0");
}

Array3 median_filter_planes(const Array3& a, std::size_t size) {
  require_window(size);
  const auto [np, h, w] = a.shape();
  const long half = static_cast<long>(size / 2);
  Array3 out(a.shape());
  std::vector<double> window(size * size);
  const std::size_t mid = window.size() / 2;
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::size_t k = 0;
        for (long dy = -half; dy <= half; ++dy) {
          const std::size_t yy = mirror(static_cast<long>(y) + dy, h);
          for (long dx = -half; dx <= half; ++dx) window[k++] = a(p, yy, mirror(static_cast<long>(x) + dx, w));
        }
        std::nth_element(window.begin(), window.begin() + static_cast<long>(mid), window.end());
        out(p, y, x) = window[mid];
      }
  return out;
}

ProjectionStack remove_outlier_median(const ProjectionStack& p, double dif, std::size_t size) {
  p.validate();
  require(dif > 0.0, "outlier dif must be > 0");
  const Array3 med = median_filter_planes(p.data, size);
  ProjectionStack out = p;
  auto v = out.data.values();
  const auto m = med.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] - m[i] > dif) v[i] = m[i];
  return out;
}

SinogramStack ring_removal_wavelet_fourier(const SinogramStack& s, std::size_t level, Wavelet wavelet,
                                           double sigma) {
  s.validate();
  require(level >= 1, "ring removal level must be >= 1");
  require(sigma > 0.0, "ring removal sigma must be > 0");
  require(s.n_angles() >= (std::size_t{1} << level),
          "ring removal level " + std::to_string(level) + " too deep for " + std::to_string(s.n_angles()) +
              " angles");
  const auto [m, na, n] = s.data.shape();
  SinogramStack out = s;
  for (std::size_t r = 0; r < m; ++r) {
    Plane sino(na, n);
    const auto src = s.data.plane(r);
    std::copy(src.begin(), src.end(), sino.v.begin());
    WaveletDecomposition dec = dwt2(sino, wavelet, level);
    for (auto& bands : dec.levels) damp_angle_axis(bands.low_high, sigma);
    const Plane rec = idwt2(dec);
    std::copy(rec.v.begin(), rec.v.end(), out.data.plane(r).begin());
  }
  return out;
}

Volume median_denoise(const Volume& r, std::size_t size) {
  r.validate();
  require(r.data.dim(1) == r.data.dim(2), "median_denoise needs square slices");
  return Volume{median_filter_planes(r.data, size), r.mask_applied};
}

ProjectionStack apply_classical_chain(const ProjectionStack& p, const ClassicalParams& params) {
  params.validate();
  const ProjectionStack cleaned = remove_outlier_median(p, params.dif, params.size);
  return rearrange_inverse(
      ring_removal_wavelet_fourier(rearrange(cleaned), params.level, params.wavelet, params.sigma));
}

Volume classical_reconstruction(const ProjectionStack& p, const ClassicalParams& params,
                                std::size_t median_denoise_size) {
  const ProjectionStack processed = apply_classical_chain(p, params);
  const ParallelGeometry g{processed.angles, processed.rows(), processed.cols()};
  Volume r = circular_mask(fbp(rearrange(processed), g));
  if (median_denoise_size > 0) r = median_denoise(r, median_denoise_size);
  return r;
}

GridSearchResult grid_search(const std::vector<ClassicalParams>& grid, const GridSearchInput& input) {
  require(!grid.empty(), "grid search needs at least one candidate");
  for (const auto& g : grid) g.validate();
  const ProjectionStack& p = input.corrupted;
  p.validate();
  if (input.domain == GridDomain::Projection) {
    require(input.projection_reference.has_value(), "projection-domain grid search needs a projection reference");
    require(input.projection_reference->data.shape() == p.data.shape(),
            "projection reference shape does not match corrupted projections");
  } else {
    require(input.reconstruction_reference.has_value(),
            "reconstruction-domain grid search needs a reconstruction reference");
    require(input.reconstruction_reference->data.shape() == Shape3{p.rows(), p.cols(), p.cols()},
            "reconstruction reference shape does not match the projections");
  }

  // Outlier removal depends only on (dif, size); reuse it across the grid.
  std::map<std::pair<double, std::size_t>, ProjectionStack> outlier_cache;
  GridSearchResult result;
  result.table.reserve(grid.size());
  for (const ClassicalParams& params : grid) {
    const auto key = std::make_pair(params.dif, params.size);
    auto it = outlier_cache.find(key);
    if (it == outlier_cache.end())
      it = outlier_cache.emplace(key, remove_outlier_median(p, params.dif, params.size)).first;
    const ProjectionStack processed = rearrange_inverse(
        ring_removal_wavelet_fourier(rearrange(it->second), params.level, params.wavelet, params.sigma));

    double score = 0.0;
    if (input.domain == GridDomain::Projection) {
      score = mse(processed.data, input.projection_reference->data);
    } else {
      const ParallelGeometry g{processed.angles, processed.rows(), processed.cols()};
      Volume r = circular_mask(fbp(rearrange(processed), g));
      if (input.median_denoise_size > 0) r = median_denoise(r, input.median_denoise_size);
      score = mse(r.data, input.reconstruction_reference->data);
    }
    result.table.push_back({params, score});
  }
  for (std::size_t i = 1; i < result.table.size(); ++i)
    if (result.table[i].mse < result.table[result.best_index].mse) result.best_index = i;
  result.best = result.table[result.best_index].params;
  return result;
}

void write_score_csv(std::ostream& os, const std::vector<GridScore>& table) {
  os << "dif,size,level,wavelet,sigma,mse\n";
  os << std::setprecision(17);
  for (const auto& s : table) {
    os << s.params.dif << ',' << s.params.size << ',' << s.params.level << ',' << to_string(s.params.wavelet) << ','
       << s.params.sigma << ',' << s.mse << '\n';
  }
}

}  // namespace ctstage
