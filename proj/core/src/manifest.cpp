#include "ctstage/manifest.hpp"

#include <fstream>

#include "ctstage/error.hpp"
#include "ctstage/io.hpp"

namespace ctstage {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Quality q) {
  switch (q) {
    case Quality::LowQuality: return "low-quality";
    case Quality::HighQuality: return "high-quality";
    case Quality::Intermediate: return "intermediate";
  }
  return "intermediate";
}

Quality quality_from_string(const std::string& s) {
  if (s == "low-quality") return Quality::LowQuality;
  if (s == "high-quality") return Quality::HighQuality;
  if (s == "intermediate") return Quality::Intermediate;
  throw CorruptFileError("unknown quality tag '" + s + "'");
}

void DatasetManifest::add(ManifestEntry entry) {
  for (auto& e : entries_) {
    if (e.role == entry.role) {
      e = std::move(entry);
      return;
    }
  }
  entries_.push_back(std::move(entry));
}

const ManifestEntry* DatasetManifest::find(const std::string& role) const {
  for (const auto& e : entries_)
    if (e.role == role) return &e;
  return nullptr;
}

const ManifestEntry& DatasetManifest::at(const std::string& role) const {
  const ManifestEntry* e = find(role);
  if (!e) throw ValidationError("manifest has no entry with role '" + role + "'");
  return *e;
}

void DatasetManifest::validate() const {
  for (const auto& e : entries_) {
    const fs::path p = resolve(e);
    if (!fs::exists(p)) throw CorruptFileError("manifest entry '" + e.role + "' missing payload " + p.string());
    const ArrayMetadata meta = load_metadata(p);
    if (meta.shape != e.shape) {
      throw CorruptFileError("manifest entry '" + e.role + "' shape " + shape_string(e.shape) +
                             " does not match sidecar " + shape_string(meta.shape));
    }
  }
}

void DatasetManifest::save(const fs::path& file) {
  json j;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["geometry"] = geometry;
  j["degradation"] = degradation;
  j["provenance"] = provenance;
  json arr = json::array();
  for (const auto& e : entries_) {
    arr.push_back({{"role", e.role},
                   {"quality", to_string(e.quality)},
                   {"path", e.path.generic_string()},
                   {"shape", e.shape}});
  }
  j["entries"] = arr;

  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw PersistenceError("cannot write manifest " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw PersistenceError("manifest write failed: " + file.string());
  base_dir_ = file.parent_path();
}

DatasetManifest DatasetManifest::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw PersistenceError("cannot open manifest " + file.string());
  DatasetManifest m;
  try {
    const json j = json::parse(in);
    const int version = j.at("version").get<int>();
    if (version != kVersion) throw CorruptFileError("unsupported manifest version " + std::to_string(version));
    m.seed = j.value("seed", std::uint64_t{0});
    m.geometry = j.value("geometry", json::object());
    m.degradation = j.value("degradation", json::object());
    m.provenance = j.value("provenance", json::object());
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.role = je.at("role").get<std::string>();
      e.quality = quality_from_string(je.at("quality").get<std::string>());
      e.path = je.at("path").get<std::string>();
      const auto shape = je.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 3) throw CorruptFileError("manifest shape must have 3 axes");
      e.shape = {shape[0], shape[1], shape[2]};
      m.entries_.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw CorruptFileError("malformed manifest " + file.string() + ": " + e.what());
  }
  m.base_dir_ = file.parent_path();
  return m;
}

}  // namespace ctstage
