#include "ctstage/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctstage/error.hpp"

namespace ctstage {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "payload format assumes a little-endian host");

fs::path sidecar_path(const fs::path& payload) {
  fs::path p = payload;
  p += ".json";
  return p;
}

void quantize_to_storage(Array3& a) {
  for (double& v : a.values()) v = static_cast<double>(static_cast<float>(v));
}

void save_array(const Array3& array, const fs::path& path, ArrayMetadata meta) {
  require(array.dim(0) > 0 && array.dim(1) > 0 && array.dim(2) > 0,
          "cannot save array with an empty axis " + shape_string(array.shape()));
  require(array.all_finite(), "cannot save array containing non-finite values: " + path.string());

  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw PersistenceError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }

  std::vector<float> payload(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) payload[i] = static_cast<float>(array.values()[i]);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw PersistenceError("write failed: " + path.string());
  }

  json side;
  side["shape"] = array.shape();
  side["dtype"] = "float32";
  side["axes"] = meta.axes;
  if (meta.angles) side["angles"] = *meta.angles;
  if (meta.mask_applied) side["mask_applied"] = true;

  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw PersistenceError("cannot open sidecar for " + path.string());
  out << side.dump(2) << '\n';
  if (!out) throw PersistenceError("sidecar write failed: " + path.string());
}

ArrayMetadata load_metadata(const fs::path& path) {
  const fs::path side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw CorruptFileError("missing sidecar " + side.string());
  ArrayMetadata meta;
  try {
    const json j = json::parse(in);
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw CorruptFileError("sidecar shape must have 3 axes: " + side.string());
    meta.shape = {shape[0], shape[1], shape[2]};
    meta.dtype = j.at("dtype").get<std::string>();
    if (j.contains("axes")) meta.axes = j.at("axes").get<std::vector<std::string>>();
    if (j.contains("angles")) meta.angles = j.at("angles").get<std::vector<double>>();
    meta.mask_applied = j.value("mask_applied", false);
  } catch (const json::exception& e) {
    throw CorruptFileError("malformed sidecar " + side.string() + ": " + e.what());
  }
  if (meta.dtype != "float32") throw CorruptFileError("unsupported dtype " + meta.dtype + " in " + side.string());
  return meta;
}

LoadedArray load_array(const fs::path& path) {
  ArrayMetadata meta = load_metadata(path);
  const std::size_t count = meta.shape[0] * meta.shape[1] * meta.shape[2];

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw CorruptFileError("missing payload " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * sizeof(float)) {
    throw CorruptFileError("payload " + path.string() + " has " + std::to_string(bytes) + " bytes, expected " +
                           std::to_string(count * sizeof(float)));
  }
  in.seekg(0);
  std::vector<float> payload(count);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw PersistenceError("read failed: " + path.string());

  std::vector<double> values(payload.begin(), payload.end());
  return {Array3(meta.shape, std::move(values)), std::move(meta)};
}

void save_projections(const ProjectionStack& p, const fs::path& path) {
  p.validate();
  save_array(p.data, path, {.axes = axes::kProjection, .angles = p.angles});
}

ProjectionStack load_projections(const fs::path& path) {
  auto loaded = load_array(path);
  if (!loaded.meta.angles) throw CorruptFileError("projection sidecar lacks angles: " + path.string());
  ProjectionStack p{std::move(loaded.array), std::move(*loaded.meta.angles)};
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  }
  return p;
}

void save_sinograms(const SinogramStack& s, const fs::path& path) {
  s.validate();
  save_array(s.data, path, {.axes = axes::kSinogram, .angles = s.angles});
}

SinogramStack load_sinograms(const fs::path& path) {
  auto loaded = load_array(path);
  if (!loaded.meta.angles) throw CorruptFileError("sinogram sidecar lacks angles: " + path.string());
  SinogramStack s{std::move(loaded.array), std::move(*loaded.meta.angles)};
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  }
  return s;
}

void save_volume(const Volume& v, const fs::path& path) {
  v.validate();
  save_array(v.data, path, {.axes = axes::kVolume, .angles = std::nullopt, .mask_applied = v.mask_applied});
}

Volume load_volume(const fs::path& path) {
  auto loaded = load_array(path);
  return Volume{std::move(loaded.array), loaded.meta.mask_applied};
}

}  // namespace ctstage
