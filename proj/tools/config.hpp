#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctstage/multistage.hpp"
#include "ctstage/phantom.hpp"
#include "ctstage/simulate.hpp"

namespace ctstage::cli {

/// Everything a run needs. Per-module seeds are derived from `seed`.
struct ExperimentConfig {
  FoamSpec phantom;
  SimulationSpec simulate;
  std::size_t hidden_layers = 4;
  std::size_t width = 16;
  std::size_t postprocess_width = 0;  // 0: budget-matched to the multi-stage total
  ReferenceMode reference_mode = ReferenceMode::AngleSubset;
  StageConfigs stages = default_stage_configs();
  TrainConfig postprocess;
  std::size_t median_denoise_size = 0;
  std::uint64_t seed = 0;

  std::size_t multistage_parameter_count() const;
  RegressorSpec postprocess_spec() const;
  MultiStageTrainOptions multistage_options() const;
};

nlohmann::json to_json(const ExperimentConfig& c);

/// Defaults, overlaid with the config file, overlaid with `overrides`
/// ("dotted.path=value", value parsed as JSON when possible). Unknown fields
/// and wrongly typed values raise a ValidationError naming the field.
ExperimentConfig load_config(const std::filesystem::path* file, const std::vector<std::string>& overrides);
ExperimentConfig config_from_json(const nlohmann::json& j);

enum class SeedStream : std::uint64_t { Phantom = 1, Degrade = 2, Train = 3 };
std::uint64_t stream_seed(const ExperimentConfig& c, SeedStream s);

}  // namespace ctstage::cli
