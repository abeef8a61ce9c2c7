#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctstage/array.hpp"

namespace ctstage {

/// PSNR reported when the two images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double mse(std::span<const double> x, std::span<const double> ref);
double mse(const Array3& x, const Array3& ref);

/// 10 log10(range^2 / mse); kPsnrIdentical when mse == 0.
double psnr_from_mse(double mse_value, double range);
/// PSNR with range = max(ref) - min(ref) over the whole reference.
double psnr(const Array3& x, const Array3& ref);

struct SsimOptions {
  std::size_t window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all valid positions of a uniform window, with
/// C1 = (k1 range)^2 and C2 = (k2 range)^2. Images are row-major h x w.
double ssim(std::span<const double> x, std::span<const double> ref, std::size_t h, std::size_t w, double range,
            const SsimOptions& opt = {});

struct MetricReport {
  std::vector<double> psnr;
  std::vector<double> ssim;
  std::vector<double> mse;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_mse = 0.0;
  double range = 0.0;
};

/// Per-slice metrics against `ref` with one range taken over the whole
/// reference volume; averages are plain means of the per-slice values.
MetricReport evaluate_volume(const Volume& x, const Volume& ref, const SsimOptions& opt = {});

void write_report_csv(std::ostream& os, const MetricReport& r);
nlohmann::json report_summary(const MetricReport& r);

}  // namespace ctstage
