#include "ctstage/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "ctstage/error.hpp"
#include "ctstage/rng.hpp"

namespace ctstage {

void FoamSpec::validate() const {
  require(size >= 4, "foam size must be at least 4");
  require(r_min > 0.0 && r_min <= r_max, "foam radii must satisfy 0 < r_min <= r_max");
  require(r_max < static_cast<double>(size) / 4.0, "foam r_max must be below size / 4");
  require(cylinder_fraction > 0.0 && cylinder_fraction <= 1.0, "cylinder_fraction must lie in (0, 1]");
  require(cylinder_fraction * static_cast<double>(size) / 2.0 > r_max, "cylinder too small for r_max bubbles");
}

FoamPhantom generate_foam(const FoamSpec& spec) {
  spec.validate();
  const std::size_t n = spec.size;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double cyl = spec.cylinder_fraction * static_cast<double>(n) / 2.0;
  const double log_lo = std::log(spec.r_min);
  const double log_hi = std::log(spec.r_max);

  Rng rng(spec.seed);
  FoamPhantom out;
  out.bubbles.reserve(spec.bubbles);
  for (std::size_t attempt = 0; attempt < spec.max_attempts && out.bubbles.size() < spec.bubbles; ++attempt) {
    const double r = std::exp(rng.uniform(log_lo, log_hi));
    // Centre uniform over the disk that keeps the sphere inside the cylinder.
    const double reach = cyl - r;
    const double x = rng.uniform(-reach, reach);
    const double y = rng.uniform(-reach, reach);
    const double z = rng.uniform(0.0, static_cast<double>(n) - 1.0);
    if (x * x + y * y > reach * reach) continue;
    const bool overlaps = std::any_of(out.bubbles.begin(), out.bubbles.end(), [&](const Bubble& b) {
      const double dx = b.x - (x + c), dy = b.y - (y + c), dz = b.z - z;
      const double lim = b.r + r;
      return dx * dx + dy * dy + dz * dz <= lim * lim;
    });
    if (overlaps) continue;
    out.bubbles.push_back({x + c, y + c, z, r});
  }
  out.shortfall = spec.bubbles - out.bubbles.size();

  Array3 vol({n, n, n}, 0.0);
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t yy = 0; yy < n; ++yy)
      for (std::size_t xx = 0; xx < n; ++xx) {
        const double dx = static_cast<double>(xx) - c, dy = static_cast<double>(yy) - c;
        if (dx * dx + dy * dy <= cyl * cyl) vol(z, yy, xx) = 1.0;
      }

  for (const Bubble& b : out.bubbles) {
    const auto lo = [&](double centre) {
      return static_cast<std::size_t>(std::max(0.0, std::ceil(centre - b.r)));
    };
    const auto hi = [&](double centre) {
      return static_cast<std::size_t>(std::min(static_cast<double>(n) - 1.0, std::floor(centre + b.r)));
    };
    if (b.z + b.r < 0.0 || b.z - b.r > static_cast<double>(n) - 1.0) continue;
    for (std::size_t z = lo(b.z); z <= hi(b.z); ++z)
      for (std::size_t yy = lo(b.y); yy <= hi(b.y); ++yy)
        for (std::size_t xx = lo(b.x); xx <= hi(b.x); ++xx) {
          const double dx = static_cast<double>(xx) - b.x;
          const double dy = static_cast<double>(yy) - b.y;
          const double dz = static_cast<double>(z) - b.z;
          if (dx * dx + dy * dy + dz * dz < b.r * b.r) vol(z, yy, xx) = 0.0;
        }
  }
  out.volume = Volume{std::move(vol), false};
  return out;
}

}  // namespace ctstage
