#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctstage/array.hpp"

namespace ctstage {

/// Axis labels written to the sidecar.
namespace axes {
inline const std::vector<std::string> kProjection{"angle", "row", "col"};
inline const std::vector<std::string> kSinogram{"row", "angle", "col"};
inline const std::vector<std::string> kVolume{"slice", "y", "x"};
}  // namespace axes

struct ArrayMetadata {
  Shape3 shape{0, 0, 0};
  std::string dtype = "float32";
  std::vector<std::string> axes;
  std::optional<std::vector<double>> angles;
  bool mask_applied = false;
};

struct LoadedArray {
  Array3 array;
  ArrayMetadata meta;
};

/// Sidecar path for a raw payload: "<path>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Writes little-endian float32 values in row-major order to `path` and a JSON
/// sidecar next to it. Throws ValidationError for empty or non-finite input,
/// PersistenceError on I/O failure.
void save_array(const Array3& array, const std::filesystem::path& path, ArrayMetadata meta = {});
LoadedArray load_array(const std::filesystem::path& path);

/// Reads only the sidecar (shape check without loading the payload).
ArrayMetadata load_metadata(const std::filesystem::path& path);

void save_projections(const ProjectionStack& p, const std::filesystem::path& path);
ProjectionStack load_projections(const std::filesystem::path& path);
void save_sinograms(const SinogramStack& s, const std::filesystem::path& path);
SinogramStack load_sinograms(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

/// Rounds every value to the nearest float32, i.e. what a save/load cycle yields.
void quantize_to_storage(Array3& a);

}  // namespace ctstage
