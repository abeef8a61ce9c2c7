#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "ctstage/classical.hpp"

namespace ctstage::cli {

namespace fs = std::filesystem;

/// Inputs shared by every command: where the run's config comes from and
/// where its outputs go.
struct RunContext {
  ExperimentConfig config;
  nlohmann::json config_json;  // resolved config, recorded in manifests
  fs::path out;
};

void cmd_phantom(const RunContext& ctx);
/// Uses the phantom manifest when given, otherwise generates one from the config.
void cmd_simulate(const RunContext& ctx, const std::optional<fs::path>& phantom_manifest);
void cmd_train(const RunContext& ctx, const std::string& mode, const std::vector<fs::path>& data_manifests,
               const std::string& input_role, const std::string& resume_from);
void cmd_infer(const fs::path& model_dir, const fs::path& data_manifest, const fs::path& out);
void cmd_evaluate(const fs::path& result_manifest, const fs::path& reference_manifest, const std::string& role,
                  const std::string& reference_role, const fs::path& out);
void cmd_gridsearch(const RunContext& ctx, const fs::path& grid_file, const fs::path& data_manifest,
                    const std::string& domain, bool apply_best);
/// Prints the timing table and writes timing.csv and timing.json.
void cmd_bench(const fs::path& model_dir, const fs::path& data_manifest, const fs::path& out);

std::vector<ClassicalParams> load_grid(const fs::path& file);

/// 8-bit binary PGM of an h x w plane, linearly windowed to [min, max]; the
/// window is recorded in "<path>.json".
void write_pgm_preview(std::span<const double> plane, std::size_t h, std::size_t w, const fs::path& path,
                       const std::string& source);

}  // namespace ctstage::cli
