#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ctstage/geometry.hpp"
#include "ctstage/rng.hpp"
#include "oracles.hpp"

using namespace ctstage;

namespace {

Volume disk_volume(std::size_t n, double r, std::size_t slices = 1) {
  const auto img = oracle::disk_image(n, r);
  Volume v{Array3({slices, n, n}), false};
  for (std::size_t z = 0; z < slices; ++z) std::copy(img.begin(), img.end(), v.data.plane(z).begin());
  return v;
}

Array3 random_array(Shape3 s, std::uint64_t seed) {
  Rng rng(seed);
  Array3 a(s);
  for (double& v : a.values()) v = rng.uniform(-1.0, 1.0);
  return a;
}

double rel_diff(const Array3& a, const Array3& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
    den += b.values()[i] * b.values()[i];
  }
  return std::sqrt(num / den);
}

// Relative L2 error inside the inscribed circle.
double masked_error(const Volume& rec, const Volume& ref) {
  const std::size_t n = ref.data.dim(1);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double num = 0.0, den = 0.0;
  for (std::size_t z = 0; z < ref.slices(); ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = static_cast<double>(x) - c, dy = static_cast<double>(y) - c;
        if (dx * dx + dy * dy > static_cast<double>(n * n) / 4.0) continue;
        const double d = rec.data(z, y, x) - ref.data(z, y, x);
        num += d * d;
        den += ref.data(z, y, x) * ref.data(z, y, x);
      }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("rearrange permutes indices") {
  ProjectionStack p{Array3({2, 3, 4}), {0.0, 1.0}};
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t n = 0; n < 4; ++n) p.data(a, m, n) = 100.0 * a + 10.0 * m + n;
  const SinogramStack s = rearrange(p);
  REQUIRE(s.data.shape() == Shape3{3, 2, 4});
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t n = 0; n < 4; ++n) CHECK(s.data(m, a, n) == 100.0 * a + 10.0 * m + n);
  CHECK(s.angles == p.angles);

  const ProjectionStack back = rearrange_inverse(s);
  CHECK(back.data == p.data);
  CHECK(back.angles == p.angles);
  CHECK(rearrange(back).data == s.data);
}

TEST_CASE("single-angle rearrange") {
  ProjectionStack p{Array3({1, 5, 3}, 2.0), {0.5}};
  CHECK(rearrange(p).data.shape() == Shape3{5, 1, 3});
}

TEST_CASE("forward projection of zero is zero") {
  const ParallelGeometry g = ParallelGeometry::equispaced(16, 2, 16);
  const ProjectionStack p = forward_project(Volume{Array3({2, 16, 16}), false}, g);
  CHECK(p.data == Array3({16, 2, 16}));
}

TEST_CASE("forward projection of a centred disk matches chord lengths") {
  const std::size_t n = 128;
  const double r = 40.0;
  const ParallelGeometry g = ParallelGeometry::equispaced(64, 1, n);
  const ProjectionStack p = forward_project(disk_volume(n, r), g);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double centre_chord = oracle::disk_chord_numeric(r, 0.5);
  double lo = 1e300, hi = -1e300;
  for (std::size_t a = 0; a < g.n_angles(); ++a) {
    const double v = p.data(a, 0, n / 2);
    CHECK(std::fabs(v - centre_chord) / centre_chord < 0.02);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK((hi - lo) / hi < 0.01);
  // Off-centre bins.
  for (std::size_t col : {n / 2 + 10, n / 2 + 25}) {
    const double d = static_cast<double>(col) - c;
    const double chord = oracle::disk_chord_numeric(r, d);
    for (std::size_t a = 0; a < g.n_angles(); a += 7) CHECK(std::fabs(p.data(a, 0, col) - chord) / chord < 0.02);
  }
}

TEST_CASE("rotationally symmetric phantom projects the same at every angle") {
  const std::size_t n = 96;
  Volume v{Array3({1, n, n}), false};
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double rr = std::hypot(static_cast<double>(x) - c, static_cast<double>(y) - c);
      v.data(0, y, x) = std::exp(-rr * rr / (2.0 * 15.0 * 15.0));
    }
  const ParallelGeometry g = ParallelGeometry::equispaced(45, 1, n);
  const ProjectionStack p = forward_project(v, g);
  for (std::size_t col = n / 2 - 20; col <= n / 2 + 20; col += 5) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t a = 0; a < g.n_angles(); ++a) {
      lo = std::min(lo, p.data(a, 0, col));
      hi = std::max(hi, p.data(a, 0, col));
    }
    CHECK((hi - lo) / hi < 0.01);
  }
}

TEST_CASE("forward projection and fbp are linear") {
  const std::size_t n = 32;
  const ParallelGeometry g = ParallelGeometry::equispaced(24, 3, n);
  const Volume v1{random_array({3, n, n}, 1), false}, v2{random_array({3, n, n}, 2), false};
  const Volume v12{v1.data + v2.data, false};
  const ProjectionStack sum = forward_project(v12, g);
  const Array3 parts = forward_project(v1, g).data + forward_project(v2, g).data;
  CHECK(rel_diff(sum.data, parts) <= 1e-12);

  const SinogramStack s1{random_array({3, 24, n}, 3), g.angles}, s2{random_array({3, 24, n}, 4), g.angles};
  const SinogramStack s12{s1.data + s2.data, g.angles};
  const Array3 fsum = fbp(s12, g).data;
  const Array3 fparts = fbp(s1, g).data + fbp(s2, g).data;
  CHECK(rel_diff(fsum, fparts) <= 1e-10);

  const SinogramStack zero{Array3({3, 24, n}), g.angles};
  CHECK(fbp(zero, g).data == Array3({3, n, n}));
}

TEST_CASE("fbp recovers a disk from 256 angles") {
  const std::size_t n = 128;
  const Volume disk = disk_volume(n, 40.0);
  const ParallelGeometry g256 = ParallelGeometry::equispaced(256, 1, n);
  const Volume rec256 = fbp(rearrange(forward_project(disk, g256)), g256);
  const double e256 = masked_error(rec256, disk);
  CHECK(e256 < 0.05);

  const ParallelGeometry g64 = ParallelGeometry::equispaced(64, 1, n);
  const Volume rec64 = fbp(rearrange(forward_project(disk, g64)), g64);
  CHECK(e256 < masked_error(rec64, disk));
}

TEST_CASE("fbp rejects inconsistent input") {
  const ParallelGeometry g = ParallelGeometry::equispaced(8, 1, 16);
  CHECK_THROWS_AS(fbp(SinogramStack{Array3({1, 8, 12}), g.angles}, g), ValidationError);
  const ParallelGeometry one = ParallelGeometry::equispaced(1, 1, 16);
  CHECK_THROWS_AS(fbp(SinogramStack{Array3({1, 1, 16}), one.angles}, one), ValidationError);
}

TEST_CASE("angle subsampling") {
  const ProjectionStack p{random_array({1024, 1, 4}, 5), equispaced_angles(1024)};
  const ProjectionStack q = subsample_angles(p, 4);
  REQUIRE(q.n_angles() == 256);
  for (std::size_t k = 0; k < 256; ++k) {
    CHECK(q.angles[k] == p.angles[4 * k]);
    CHECK(q.data(k, 0, 3) == p.data(4 * k, 0, 3));
  }
  CHECK(is_equispaced(q.angles));
  CHECK(subsample_angles(p, 1).data == p.data);
  CHECK_THROWS_AS(subsample_angles(p, 0), ValidationError);
}

TEST_CASE("upsampling interpolates between exact angle positions") {
  SinogramStack s{Array3({1, 2, 3}), equispaced_angles(2)};
  for (std::size_t n = 0; n < 3; ++n) s.data(0, 1, n) = 1.0;
  const SinogramStack u = upsample_sinogram(s, 4);
  REQUIRE(u.data.shape() == Shape3{1, 4, 3});
  const double expected[4] = {0.0, 0.5, 1.0, 0.5};
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t n = 0; n < 3; ++n) CHECK(u.data(0, j, n) == doctest::Approx(expected[j]).epsilon(1e-15));
  CHECK(u.angles == equispaced_angles(4));
}

TEST_CASE("upsampling past the last angle uses the mirrored first row") {
  SinogramStack s{Array3({1, 2, 4}), equispaced_angles(2)};
  for (std::size_t n = 0; n < 4; ++n) {
    s.data(0, 0, n) = static_cast<double>(n);       // ramp
    s.data(0, 1, n) = 10.0;
  }
  const SinogramStack u = upsample_sinogram(s, 4);
  // angle 3pi/4 sits halfway between pi/2 and pi; the row at pi is row 0 reversed.
  for (std::size_t n = 0; n < 4; ++n) CHECK(u.data(0, 3, n) == doctest::Approx(0.5 * 10.0 + 0.5 * (3.0 - n)));
  // angle pi/4 sits halfway between 0 and pi/2.
  for (std::size_t n = 0; n < 4; ++n) CHECK(u.data(0, 1, n) == doctest::Approx(0.5 * n + 5.0));
}

TEST_CASE("upsampling to the same count is the identity and constants stay constant") {
  const SinogramStack s{random_array({2, 8, 5}, 9), equispaced_angles(8)};
  CHECK(upsample_sinogram(s, 8).data == s.data);
  const SinogramStack c{Array3({2, 8, 5}, 3.25), equispaced_angles(8)};
  const SinogramStack u = upsample_sinogram(c, 32);
  for (double v : u.data.values()) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));
  // 3 into 7 rows: non-integer ratio.
  const SinogramStack c3{Array3({1, 3, 2}, -1.5), equispaced_angles(3)};
  const SinogramStack u3 = upsample_sinogram(c3, 7);
  for (double v : u3.data.values()) CHECK(v == doctest::Approx(-1.5).epsilon(1e-14));
}

TEST_CASE("circular mask on a 4x4 slice zeroes the corners") {
  const Volume m = circular_mask(Volume{Array3({1, 4, 4}, 1.0), false});
  const double c = 1.5, r2 = 4.0;
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const double d2 = (x - c) * (x - c) + (y - c) * (y - c);
      CHECK(m.data(0, y, x) == (d2 > r2 ? 0.0 : 1.0));
    }
  CHECK(m.data(0, 0, 0) == 0.0);
  CHECK(m.data(0, 3, 3) == 0.0);
  CHECK(m.data(0, 1, 1) == 1.0);
  CHECK(m.data(0, 2, 2) == 1.0);
  CHECK(m.mask_applied);
}

TEST_CASE("circular mask is idempotent and keeps zero at zero") {
  const Volume v{random_array({2, 9, 9}, 12), false};
  const Volume once = circular_mask(v);
  CHECK(circular_mask(once).data == once.data);
  CHECK(circular_mask(Volume{Array3({1, 6, 6}), false}).data == Array3({1, 6, 6}));
}
