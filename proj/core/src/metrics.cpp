#include "ctstage/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "ctstage/error.hpp"

namespace ctstage {

double mse(std::span<const double> x, std::span<const double> ref) {
  require(x.size() == ref.size(), "mse: size mismatch");
  require(!x.empty(), "mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double mse(const Array3& x, const Array3& ref) {
  require(x.shape() == ref.shape(),
          "mse: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(ref.shape()));
  return mse(x.values(), ref.values());
}

double psnr_from_mse(double mse_value, double range) {
  require(range > 0.0, "psnr: reference range must be positive");
  if (mse_value == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(range * range / mse_value);
}

double psnr(const Array3& x, const Array3& ref) {
  const double m = mse(x, ref);
  return psnr_from_mse(m, ref.max() - ref.min());
}

namespace {

// Sums over every valid win x win window of a row-major h x w image.
std::vector<double> box_sums(const std::vector<double>& img, std::size_t h, std::size_t w, std::size_t win) {
  const std::size_t oh = h - win + 1, ow = w - win + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < win; ++k) s += img[y * w + x + k];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < win; ++k) s += rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(std::span<const double> x, std::span<const double> ref, std::size_t h, std::size_t w, double range,
            const SsimOptions& opt) {
  require(x.size() == h * w && ref.size() == h * w, "ssim: image size mismatch");
  require(opt.window >= 2, "ssim: window must be at least 2");
  require(h >= opt.window && w >= opt.window, "ssim: image smaller than the window");
  require(range > 0.0, "ssim: range must be positive");

  const std::size_t n = h * w;
  std::vector<double> a(x.begin(), x.end()), b(ref.begin(), ref.end()), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const std::size_t win = opt.window;
  const auto sa = box_sums(a, h, w, win), sb = box_sums(b, h, w, win);
  const auto saa = box_sums(aa, h, w, win), sbb = box_sums(bb, h, w, win), sab = box_sums(ab, h, w, win);

  const double np = static_cast<double>(win * win);
  const double cov_norm = np / (np - 1.0);
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double mx = sa[i] / np, my = sb[i] / np;
    const double vx = cov_norm * (saa[i] / np - mx * mx);
    const double vy = cov_norm * (sbb[i] / np - my * my);
    const double cxy = cov_norm * (sab[i] / np - mx * my);
    total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(sa.size());
}

MetricReport evaluate_volume(const Volume& x, const Volume& ref, const SsimOptions& opt) {
  require(x.data.shape() == ref.data.shape(), "evaluate: shape mismatch " + shape_string(x.data.shape()) + " vs " +
                                                  shape_string(ref.data.shape()));
  MetricReport r;
  r.range = ref.data.max() - ref.data.min();
  require(r.range > 0.0, "evaluate: reference volume is constant (zero range)");
  const auto [nz, h, w] = x.data.shape();
  for (std::size_t z = 0; z < nz; ++z) {
    const double m = mse(x.data.plane(z), ref.data.plane(z));
    r.mse.push_back(m);
    r.psnr.push_back(psnr_from_mse(m, r.range));
    r.ssim.push_back(ssim(x.data.plane(z), ref.data.plane(z), h, w, r.range, opt));
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e;
    return s / static_cast<double>(v.size());
  };
  r.mean_psnr = mean(r.psnr);
  r.mean_ssim = mean(r.ssim);
  r.mean_mse = mean(r.mse);
  return r;
}

void write_report_csv(std::ostream& os, const MetricReport& r) {
  os << "slice,psnr,ssim,mse\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.psnr.size(); ++i)
    os << i << ',' << r.psnr[i] << ',' << r.ssim[i] << ',' << r.mse[i] << '\n';
}

nlohmann::json report_summary(const MetricReport& r) {
  const auto finite_or_string = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  return {{"version", 1},
          {"slices", r.psnr.size()},
          {"range", r.range},
          {"mean_psnr", finite_or_string(r.mean_psnr)},
          {"mean_ssim", r.mean_ssim},
          {"mean_mse", r.mean_mse}};
}

}  // namespace ctstage
