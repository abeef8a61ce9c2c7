#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "ctstage/io.hpp"
#include "ctstage/manifest.hpp"
#include "ctstage/rng.hpp"
#include "scratch_dir.hpp"

using namespace ctstage;
using testing_support::ScratchDir;

namespace {

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("save_array writes a float32 payload and a sidecar") {
  ScratchDir dir("io");
  Array3 a({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  save_array(a, dir / "a.raw", {.axes = axes::kVolume});
  CHECK(std::filesystem::file_size(dir / "a.raw") == 16);
  const ArrayMetadata meta = load_metadata(dir / "a.raw");
  CHECK(meta.shape == Shape3{1, 2, 2});
  CHECK(meta.dtype == "float32");
  CHECK(meta.axes == axes::kVolume);
  const LoadedArray back = load_array(dir / "a.raw");
  CHECK(back.array == a);
}

TEST_CASE("save_array rejects empty and non-finite arrays") {
  ScratchDir dir("io_bad");
  CHECK_THROWS_AS(save_array(Array3({0, 3, 3}), dir / "e.raw"), ValidationError);
  Array3 nan({1, 1, 2});
  nan(0, 0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(save_array(nan, dir / "n.raw"), ValidationError);
  Array3 inf({1, 1, 2});
  inf(0, 0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(save_array(inf, dir / "i.raw"), ValidationError);
}

TEST_CASE("round trip of float32-representable values is bit exact") {
  ScratchDir dir("io_rt");
  Rng rng(3);
  Array3 a({3, 5, 7});
  for (double& v : a.values()) v = rng.uniform(-1e3, 1e3);
  quantize_to_storage(a);
  save_array(a, dir / "a.raw");
  const Array3 b = load_array(dir / "a.raw").array;
  REQUIRE(b.shape() == a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.values()[i] == a.values()[i]);

  save_array(b, dir / "b.raw");
  CHECK(file_bytes(dir / "a.raw") == file_bytes(dir / "b.raw"));
}

TEST_CASE("truncated payload and missing sidecar are corrupt files") {
  ScratchDir dir("io_corrupt");
  Array3 a({2, 2, 2}, 1.5);
  save_array(a, dir / "a.raw");
  std::filesystem::resize_file(dir / "a.raw", 20);
  CHECK_THROWS_AS(load_array(dir / "a.raw"), CorruptFileError);

  save_array(a, dir / "b.raw");
  std::filesystem::remove(sidecar_path(dir / "b.raw"));
  CHECK_THROWS_AS(load_array(dir / "b.raw"), CorruptFileError);
}

TEST_CASE("projection stacks keep their angles through storage") {
  ScratchDir dir("io_proj");
  ProjectionStack p{Array3({3, 2, 4}, 0.25), {0.0, 1.0, 2.0}};
  save_projections(p, dir / "p.raw");
  const ProjectionStack q = load_projections(dir / "p.raw");
  CHECK(q.data == p.data);
  CHECK(q.angles == p.angles);

  Volume v{Array3({2, 4, 4}, 1.0), true};
  save_volume(v, dir / "v.raw");
  CHECK(load_volume(dir / "v.raw").mask_applied);
}

TEST_CASE("angle validation") {
  ProjectionStack p{Array3({2, 1, 1}), {0.0, 0.0}};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.angles = {0.0, 4.0};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.angles = {0.0};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.angles = {0.0, 1.0};
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("manifest round trip and validation") {
  ScratchDir dir("manifest");
  DatasetManifest m;
  save_volume(Volume{Array3({2, 3, 3}, 1.0), false}, dir / "r_hq.raw");
  m.add({"r_hq", Quality::HighQuality, "r_hq.raw", {2, 3, 3}});
  m.seed = 42;
  m.degradation = {{"I0", 100.0}};
  m.save(dir / "manifest.json");

  const DatasetManifest back = DatasetManifest::load(dir / "manifest.json");
  REQUIRE(back.find("r_hq") != nullptr);
  CHECK(back.at("r_hq").quality == Quality::HighQuality);
  CHECK(back.at("r_hq").shape == Shape3{2, 3, 3});
  CHECK(back.seed == 42);
  CHECK(back.degradation.at("I0") == 100.0);
  CHECK_NOTHROW(back.validate());
  CHECK(load_volume(back.resolve("r_hq")).data == Array3({2, 3, 3}, 1.0));

  DatasetManifest wrong = back;
  wrong.add({"r_hq", Quality::HighQuality, "r_hq.raw", {2, 3, 4}});
  CHECK_THROWS(wrong.validate());
  CHECK_THROWS_AS(back.at("missing"), ValidationError);
}

TEST_CASE("manifest with an unknown version is rejected") {
  ScratchDir dir("manifest_version");
  {
    std::ofstream out(dir / "m.json");
    out << R"({"version": 2, "entries": []})";
  }
  CHECK_THROWS_AS(DatasetManifest::load(dir / "m.json"), CorruptFileError);
}

TEST_CASE("rng degenerate draws") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    CHECK(rng.normal(0.0, 0.0) == 0.0);
    CHECK(rng.normal(2.5, 0.0) == 2.5);
    CHECK(rng.poisson(0.0) == 0);
  }
}

TEST_CASE("equal seeds give equal streams") {
  Rng a(99), b(99), c(100);
  bool differs = false;
  for (int i = 0; i < 100000; ++i) {
    const auto x = a.next_u64();
    REQUIRE(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("poisson sample moments at lambda 100") {
  Rng rng(2024);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k = static_cast<double>(rng.poisson(100.0));
    sum += k;
    sq += k * k;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean - 100.0) < 0.5);
  CHECK(std::fabs(var - 100.0) < 1.0);
}

TEST_CASE("poisson small lambda moments") {
  Rng rng(5);
  for (double lambda : {0.3, 4.0, 29.5, 30.0, 57.0}) {
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(rng.poisson(lambda));
      sum += k;
      sq += k * k;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    const double se = std::sqrt(lambda / n);
    CHECK(std::fabs(mean - lambda) < 5.0 * se);
    CHECK(std::fabs(var - lambda) < 0.03 * lambda + 0.01);
  }
}

TEST_CASE("normal and uniform moments") {
  Rng rng(8);
  const int n = 400000;
  double s = 0.0, sq = 0.0, u = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(1.0, 2.0);
    s += z;
    sq += z * z;
    const double x = rng.next_unit();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    u += x;
  }
  const double mean = s / n;
  CHECK(std::fabs(mean - 1.0) < 0.02);
  CHECK(std::fabs(std::sqrt(sq / n - mean * mean) - 2.0) < 0.02);
  CHECK(std::fabs(u / n - 0.5) < 0.003);
}

TEST_CASE("below stays in range and covers it") {
  Rng rng(11);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[rng.below(7)];
  for (int h : hits) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("derived seeds differ per stream") {
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) != derive_seed(2, 1));
  CHECK(derive_seed(1, 1) == derive_seed(1, 1));
}
