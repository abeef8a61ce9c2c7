#include "ctstage/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "ctstage/error.hpp"
#include "fft.hpp"

namespace ctstage {

namespace {

constexpr double kPi = std::numbers::pi;

struct RayWeight {
  std::uint32_t pixel;
  double weight;
};

// Sparse rows of the projection matrix for one angle: bins[n]..bins[n+1]
// index into `weights`.
struct AngleSystem {
  std::vector<std::size_t> bins;
  std::vector<RayWeight> weights;
};

AngleSystem build_angle_system(double theta, std::size_t n) {
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const auto half = static_cast<long>(std::ceil(static_cast<double>(n) * std::numbers::sqrt2 / 2.0)) + 1;
  const long last = static_cast<long>(n) - 1;

  AngleSystem sys;
  sys.bins.reserve(n + 1);
  sys.bins.push_back(0);
  for (std::size_t bin = 0; bin < n; ++bin) {
    const double u = static_cast<double>(bin) - c;
    for (long t = -half; t <= half; ++t) {
      const double x = u * ct - static_cast<double>(t) * st + c;
      const double y = u * st + static_cast<double>(t) * ct + c;
      const double fx0 = std::floor(x);
      const double fy0 = std::floor(y);
      const auto x0 = static_cast<long>(fx0);
      const auto y0 = static_cast<long>(fy0);
      if (x0 < -1 || y0 < -1 || x0 > last || y0 > last) continue;
      const double ax = x - fx0;
      const double ay = y - fy0;
      const long xs[2] = {x0, x0 + 1};
      const long ys[2] = {y0, y0 + 1};
      const double wx[2] = {1.0 - ax, ax};
      const double wy[2] = {1.0 - ay, ay};
      for (int j = 0; j < 2; ++j) {
        if (ys[j] < 0 || ys[j] > last) continue;
        for (int i = 0; i < 2; ++i) {
          if (xs[i] < 0 || xs[i] > last) continue;
          const double w = wx[i] * wy[j];
          if (w == 0.0) continue;
          sys.weights.push_back({static_cast<std::uint32_t>(ys[j] * static_cast<long>(n) + xs[i]), w});
        }
      }
    }
    sys.bins.push_back(sys.weights.size());
  }
  return sys;
}

// DFT of the band-limited ramp kernel, circularly laid out on `len` samples.
std::vector<double> ram_lak_response(std::size_t len) {
  std::vector<double> kernel(len, 0.0);
  kernel[0] = 0.25;
  for (std::size_t k = 1; k < len; ++k) {
    const long offset = k < len / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(len);
    if (offset % 2 != 0) {
      const double d = kPi * static_cast<double>(offset);
      kernel[k] = -1.0 / (d * d);
    }
  }
  // The kernel is real and even, so its DFT is real: H[k] = sum h[j] cos(2 pi jk / len).
  std::vector<double> response(len / 2 + 1, 0.0);
  for (std::size_t k = 0; k <= len / 2; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      if (kernel[j] == 0.0) continue;
      acc += kernel[j] * std::cos(2.0 * kPi * static_cast<double>((j * k) % len) / static_cast<double>(len));
    }
    response[k] = acc;
  }
  return response;
}

}  // namespace

std::vector<double> equispaced_angles(std::size_t n) {
  std::vector<double> a(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = static_cast<double>(k) * kPi / static_cast<double>(n);
  return a;
}

bool is_equispaced(const std::vector<double>& angles, double tol) {
  const std::size_t n = angles.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (std::fabs(angles[k] - static_cast<double>(k) * kPi / static_cast<double>(n)) > tol) return false;
  }
  return n > 0;
}

ParallelGeometry ParallelGeometry::equispaced(std::size_t n_angles, std::size_t rows, std::size_t cols) {
  require(n_angles > 0 && rows > 0 && cols > 0, "geometry dimensions must be positive");
  return ParallelGeometry{equispaced_angles(n_angles), rows, cols};
}

void ParallelGeometry::validate() const {
  require(rows > 0 && cols > 0, "geometry dimensions must be positive");
  validate_angles(angles, angles.size());
  require(!angles.empty(), "geometry needs at least one angle");
}

SinogramStack rearrange(const ProjectionStack& p) {
  p.validate();
  const auto [na, m, n] = p.data.shape();
  SinogramStack s{Array3({m, na, n}), p.angles};
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(&p.data(a, r, 0), n, &s.data(r, a, 0));
  return s;
}

ProjectionStack rearrange_inverse(const SinogramStack& s) {
  s.validate();
  const auto [m, na, n] = s.data.shape();
  ProjectionStack p{Array3({na, m, n}), s.angles};
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t a = 0; a < na; ++a)
      std::copy_n(&s.data(r, a, 0), n, &p.data(a, r, 0));
  return p;
}

ProjectionStack forward_project(const Volume& v, const ParallelGeometry& g) {
  v.validate();
  g.validate();
  const auto [nz, ny, nx] = v.data.shape();
  require(ny == nx, "forward_project needs square slices, got " + shape_string(v.data.shape()));
  require(nx == g.cols, "volume width " + std::to_string(nx) + " does not match detector width " +
                            std::to_string(g.cols));
  require(nz == g.rows, "volume slice count " + std::to_string(nz) + " does not match detector rows " +
                            std::to_string(g.rows));

  ProjectionStack p{Array3({g.n_angles(), nz, nx}), g.angles};
  for (std::size_t a = 0; a < g.n_angles(); ++a) {
    const AngleSystem sys = build_angle_system(g.angles[a], nx);
    for (std::size_t z = 0; z < nz; ++z) {
      const auto slice = v.data.plane(z);
      double* out = &p.data(a, z, 0);
      for (std::size_t bin = 0; bin < nx; ++bin) {
        double acc = 0.0;
        for (std::size_t e = sys.bins[bin]; e < sys.bins[bin + 1]; ++e)
          acc += sys.weights[e].weight * slice[sys.weights[e].pixel];
        out[bin] = acc;
      }
    }
  }
  return p;
}

Volume fbp(const SinogramStack& s, const ParallelGeometry& g) {
  s.validate();
  const auto [m, na, n] = s.data.shape();
  require(na >= 2, "fbp needs at least 2 angles");
  require(n >= 8, "fbp needs at least 8 detector columns");
  require(g.n_angles() == na && g.cols == n, "sinogram does not match reconstruction geometry");
  for (std::size_t a = 0; a < na; ++a)
    require(std::fabs(g.angles[a] - s.angles[a]) < 1e-12, "sinogram angles differ from geometry angles");

  const std::size_t padded = std::bit_ceil(2 * n);
  const std::vector<double> response = ram_lak_response(padded);
  detail::RealSpectralFilter filter(padded, response);

  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  std::vector<double> cosines(na), sines(na);
  for (std::size_t a = 0; a < na; ++a) {
    cosines[a] = std::cos(s.angles[a]);
    sines[a] = std::sin(s.angles[a]);
  }
  const double scale = kPi / static_cast<double>(na);
  const double last = static_cast<double>(n) - 1.0;

  Volume out{Array3({m, n, n}), false};
  std::vector<double> filtered(na * n);
  for (std::size_t z = 0; z < m; ++z) {
    for (std::size_t a = 0; a < na; ++a) {
      filter.apply(std::span<const double>(&s.data(z, a, 0), n), std::span<double>(&filtered[a * n], n));
    }
    auto slice = out.data.plane(z);
    for (std::size_t a = 0; a < na; ++a) {
      const double* row = &filtered[a * n];
      const double ct = cosines[a];
      const double st = sines[a];
      for (std::size_t y = 0; y < n; ++y) {
        const double base = (static_cast<double>(y) - c) * st + c - c * ct;
        double* dst = &slice[y * n];
        for (std::size_t x = 0; x < n; ++x) {
          const double u = base + static_cast<double>(x) * ct;
          if (u < 0.0 || u > last) continue;
          const auto i0 = static_cast<std::size_t>(u);
          const double f = u - static_cast<double>(i0);
          const double v0 = row[i0];
          const double v1 = i0 + 1 < n ? row[i0 + 1] : 0.0;
          dst[x] += v0 + f * (v1 - v0);
        }
      }
    }
    for (double& val : slice) val *= scale;
  }
  return out;
}

ProjectionStack subsample_angles(const ProjectionStack& p, std::size_t factor) {
  p.validate();
  require(factor >= 1, "subsample factor must be positive");
  require(p.n_angles() % factor == 0, "subsample factor " + std::to_string(factor) + " does not divide " +
                                          std::to_string(p.n_angles()) + " angles");
  const std::size_t kept = p.n_angles() / factor;
  ProjectionStack out{Array3({kept, p.rows(), p.cols()}), {}};
  out.angles.reserve(kept);
  for (std::size_t k = 0; k < kept; ++k) {
    const auto src = p.data.plane(k * factor);
    std::copy(src.begin(), src.end(), out.data.plane(k).begin());
    out.angles.push_back(p.angles[k * factor]);
  }
  return out;
}

SinogramStack upsample_sinogram(const SinogramStack& s, std::size_t target_rows) {
  s.validate();
  const auto [m, na, n] = s.data.shape();
  require(target_rows >= na, "upsample target " + std::to_string(target_rows) + " is below the " +
                                 std::to_string(na) + " input angles");
  require(is_equispaced(s.angles), "upsample_sinogram needs equispaced input angles over [0, pi)");
  if (target_rows == na) return s;

  SinogramStack out{Array3({m, target_rows, n}), equispaced_angles(target_rows)};
  for (std::size_t j = 0; j < target_rows; ++j) {
    // Exact rational position j * na / target_rows on the input grid.
    const std::size_t num = j * na;
    const std::size_t i0 = num / target_rows;
    const std::size_t rem = num % target_rows;
    const double f = static_cast<double>(rem) / static_cast<double>(target_rows);
    for (std::size_t r = 0; r < m; ++r) {
      const double* lo = &s.data(r, i0, 0);
      double* dst = &out.data(r, j, 0);
      if (rem == 0) {
        std::copy_n(lo, n, dst);
        continue;
      }
      if (i0 + 1 < na) {
        const double* hi = &s.data(r, i0 + 1, 0);
        for (std::size_t k = 0; k < n; ++k) dst[k] = (1.0 - f) * lo[k] + f * hi[k];
      } else {
        // Neighbour at angle pi is row 0 mirrored across the detector centre.
        const double* wrap = &s.data(r, 0, 0);
        for (std::size_t k = 0; k < n; ++k) dst[k] = (1.0 - f) * lo[k] + f * wrap[n - 1 - k];
      }
    }
  }
  return out;
}

Volume circular_mask(Volume v) {
  const auto [nz, ny, nx] = v.data.shape();
  require(ny == nx, "circular_mask needs square slices, got " + shape_string(v.data.shape()));
  const double c = (static_cast<double>(nx) - 1.0) / 2.0;
  const double r2 = static_cast<double>(nx) * static_cast<double>(nx) / 4.0;
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        const double dx = static_cast<double>(x) - c;
        const double dy = static_cast<double>(y) - c;
        if (dx * dx + dy * dy > r2) v.data(z, y, x) = 0.0;
      }
  v.mask_applied = true;
  return v;
}

}  // namespace ctstage
