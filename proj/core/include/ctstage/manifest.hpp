#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctstage/array.hpp"

namespace ctstage {

/// Quality tag attached to each stored array.
enum class Quality { LowQuality, HighQuality, Intermediate };

std::string to_string(Quality q);
Quality quality_from_string(const std::string& s);

struct ManifestEntry {
  std::string role;            // e.g. "p_lq", "r_hq", "s_star"
  Quality quality = Quality::Intermediate;
  std::filesystem::path path;  // relative to the manifest's directory
  Shape3 shape{0, 0, 0};
};

/// Index of the arrays a command produced, with the parameters that produced
/// them. Serialized as JSON with "version": 1.
class DatasetManifest {
 public:
  static constexpr int kVersion = 1;

  DatasetManifest() = default;

  void add(ManifestEntry entry);
  const ManifestEntry* find(const std::string& role) const;
  const ManifestEntry& at(const std::string& role) const;
  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }

  std::filesystem::path resolve(const ManifestEntry& e) const { return base_dir_ / e.path; }
  std::filesystem::path resolve(const std::string& role) const { return resolve(at(role)); }
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

  nlohmann::json geometry = nlohmann::json::object();
  nlohmann::json degradation = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();
  std::uint64_t seed = 0;

  /// Checks every entry's payload exists and its sidecar shape matches.
  void validate() const;

  void save(const std::filesystem::path& file);
  static DatasetManifest load(const std::filesystem::path& file);

 private:
  std::vector<ManifestEntry> entries_;
  std::filesystem::path base_dir_;
};

}  // namespace ctstage
