#include "ctstage/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctstage/error.hpp"

namespace ctstage {

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kRingStream = 2;
constexpr std::uint64_t kZingerStream = 3;

constexpr double kMinTransmission = 1e-6;
constexpr double kMaxTransmission = 10.0;

void require_fraction(double f, const char* name) {
  require(f >= 0.0 && f <= 1.0, std::string(name) + " must lie in [0, 1]");
}

// First k entries of a uniformly shuffled 0..n-1 (partial Fisher-Yates).
std::vector<std::size_t> choose_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::size_t fraction_count(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

void DegradeSpec::validate() const {
  require(I0 > 0.0 && std::isfinite(I0), "degrade.I0 must be > 0");
  require(absorption_target > 0.0 && absorption_target < 1.0, "degrade.absorption_target must lie in (0, 1)");
  require_fraction(P_ring, "degrade.P_ring");
  require_fraction(P_proj, "degrade.P_proj");
  require_fraction(P_zinger, "degrade.P_zinger");
  require(sigma_ring >= 0.0, "degrade.sigma_ring must be >= 0");
  require(v_zinger > 0.0, "degrade.v_zinger must be > 0");
}

nlohmann::json to_json(const DegradeSpec& d) {
  return {{"I0", d.I0},           {"absorption_target", d.absorption_target},
          {"P_ring", d.P_ring},   {"sigma_ring", d.sigma_ring},
          {"P_proj", d.P_proj},   {"P_zinger", d.P_zinger},
          {"v_zinger", d.v_zinger}, {"seed", d.seed}};
}

DegradeSpec degrade_spec_from_json(const nlohmann::json& j) {
  DegradeSpec d;
  d.I0 = j.value("I0", d.I0);
  d.absorption_target = j.value("absorption_target", d.absorption_target);
  d.P_ring = j.value("P_ring", d.P_ring);
  d.sigma_ring = j.value("sigma_ring", d.sigma_ring);
  d.P_proj = j.value("P_proj", d.P_proj);
  d.P_zinger = j.value("P_zinger", d.P_zinger);
  d.v_zinger = j.value("v_zinger", d.v_zinger);
  d.seed = j.value("seed", d.seed);
  return d;
}

double absorption_scale(const ProjectionStack& p, double absorption_target) {
  require(absorption_target > 0.0 && absorption_target < 1.0, "absorption_target must lie in (0, 1)");
  std::vector<double> covered;
  for (double v : p.data.values()) {
    require(v >= 0.0, "noise simulation needs non-negative projections");
    if (v > 0.0) covered.push_back(v);
  }
  require(!covered.empty(), "noise simulation needs a projection stack that is not all zero");

  const double target = 1.0 - absorption_target;
  const auto mean_transmission = [&](double alpha) {
    double acc = 0.0;
    for (double v : covered) acc += std::exp(-alpha * v);
    return acc / static_cast<double>(covered.size());
  };
  double lo = 0.0;
  double hi = 1.0;
  while (mean_transmission(hi) > target) {
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("absorption scale diverged");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_transmission(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ProjectionStack apply_poisson_noise(const ProjectionStack& p, double I0, double absorption_target, Rng& rng) {
  p.validate();
  require(I0 > 0.0 && std::isfinite(I0), "I0 must be > 0");
  const double alpha = absorption_scale(p, absorption_target);
  ProjectionStack out = p;
  for (double& v : out.data.values()) {
    const double expected = I0 * std::exp(-alpha * v);
    const auto counts = static_cast<double>(rng.poisson(expected));
    v = -std::log(std::max(counts, 1.0) / I0) / alpha;
  }
  return out;
}

RingPattern make_ring_pattern(std::size_t rows, std::size_t cols, double P_ring, double sigma_ring, Rng& rng) {
  require(rows > 0 && cols > 0, "ring pattern dimensions must be positive");
  require_fraction(P_ring, "P_ring");
  require(sigma_ring >= 0.0, "sigma_ring must be >= 0");
  RingPattern pat{Array3({1, rows, cols}), Array3({1, rows, cols})};
  const std::size_t total = rows * cols;
  const auto picked = choose_without_replacement(total, fraction_count(P_ring, total), rng);
  for (std::size_t idx : picked) {
    pat.mask.values()[idx] = 1.0;
    pat.deviation.values()[idx] = rng.normal(0.0, sigma_ring);
  }
  return pat;
}

ProjectionStack apply_ring(const ProjectionStack& p, const RingPattern& pattern) {
  p.validate();
  require(pattern.deviation.shape() == Shape3{1, p.rows(), p.cols()},
          "ring pattern shape " + shape_string(pattern.deviation.shape()) + " does not match detector " +
              std::to_string(p.rows()) + "x" + std::to_string(p.cols()));
  ProjectionStack out = p;
  const auto dev = pattern.deviation.plane(0);
  for (std::size_t a = 0; a < p.n_angles(); ++a) {
    auto img = out.data.plane(a);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] += dev[i];
  }
  return out;
}

ProjectionStack apply_zinger(const ProjectionStack& p, double P_proj, double P_zinger, double value, Rng& rng) {
  p.validate();
  require_fraction(P_proj, "P_proj");
  require_fraction(P_zinger, "P_zinger");
  require(value > 0.0 && std::isfinite(value), "zinger value must be > 0");
  ProjectionStack out = p;
  const std::size_t pixels = p.rows() * p.cols();
  const auto projections = choose_without_replacement(p.n_angles(), fraction_count(P_proj, p.n_angles()), rng);
  const std::size_t per_projection = fraction_count(P_zinger, pixels);
  for (std::size_t a : projections) {
    auto img = out.data.plane(a);
    for (std::size_t idx : choose_without_replacement(pixels, per_projection, rng)) img[idx] = value;
  }
  return out;
}

ProjectionStack degrade(const ProjectionStack& p, const DegradeSpec& spec) {
  spec.validate();
  Rng noise_rng(derive_seed(spec.seed, kNoiseStream));
  ProjectionStack out = apply_poisson_noise(p, spec.I0, spec.absorption_target, noise_rng);
  if (spec.P_ring > 0.0) {
    Rng ring_rng(derive_seed(spec.seed, kRingStream));
    out = apply_ring(out, make_ring_pattern(p.rows(), p.cols(), spec.P_ring, spec.sigma_ring, ring_rng));
  }
  if (spec.P_zinger > 0.0 && spec.P_proj > 0.0) {
    Rng zinger_rng(derive_seed(spec.seed, kZingerStream));
    out = apply_zinger(out, spec.P_proj, spec.P_zinger, spec.v_zinger, zinger_rng);
  }
  return out;
}

Array3 pixelwise_median(const std::vector<Array3>& images) {
  require(!images.empty(), "median of an empty image list");
  const Shape3 shape = images.front().shape();
  for (const auto& im : images) require(im.shape() == shape, "median inputs must share one shape");
  Array3 out(shape);
  std::vector<double> buf(images.size());
  const std::size_t k = images.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) buf[j] = images[j].values()[i];
    std::sort(buf.begin(), buf.end());
    out.values()[i] = k % 2 == 1 ? buf[k / 2] : 0.5 * (buf[k / 2 - 1] + buf[k / 2]);
  }
  return out;
}

ProjectionStack flat_field_correct(const Array3& raw, const std::vector<Array3>& flats,
                                   const std::vector<Array3>& darks, bool use_median,
                                   std::vector<double> angles) {
  require(!flats.empty(), "flat-field correction needs at least one flat field");
  require(!darks.empty(), "flat-field correction needs at least one dark field");
  const Shape3 field_shape{1, raw.dim(1), raw.dim(2)};
  for (const auto& f : flats) require(f.shape() == field_shape, "flat field shape does not match projections");
  for (const auto& d : darks) require(d.shape() == field_shape, "dark field shape does not match projections");

  const Array3 flat = use_median ? pixelwise_median(flats) : flats.front();
  const Array3 dark = use_median ? pixelwise_median(darks) : darks.front();
  const auto fv = flat.values();
  const auto dv = dark.values();
  for (std::size_t i = 0; i < fv.size(); ++i) {
    require(fv[i] > dv[i], "flat field must exceed dark field at every pixel (pixel " + std::to_string(i) + ")");
  }

  ProjectionStack out{Array3(raw.shape()), std::move(angles)};
  for (std::size_t a = 0; a < raw.dim(0); ++a) {
    const auto src = raw.plane(a);
    auto dst = out.data.plane(a);
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double num = src[i] - dv[i];
      double t = num > 0.0 ? num / (fv[i] - dv[i]) : kMinTransmission;
      t = std::clamp(t, kMinTransmission, kMaxTransmission);
      dst[i] = -std::log(t);
    }
  }
  out.validate();
  return out;
}

}  // namespace ctstage
