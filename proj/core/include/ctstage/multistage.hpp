#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctstage/array.hpp"
#include "ctstage/geometry.hpp"
#include "ctstage/learn.hpp"

namespace ctstage {

/// How stage-1 and stage-2 targets are obtained.
enum class ReferenceMode {
  AngleSubset,     // LQ angles are a subset of the HQ scan; select matching projections
  SimulatedFromReconstruction,  // forward-project the HQ reconstruction
};

std::string to_string(ReferenceMode m);
ReferenceMode reference_mode_from_string(const std::string& s);

/// One reference object: corrupted LQ scan plus its high-quality counterparts.
struct TrainingObject {
  ProjectionStack p_lq;
  std::optional<ProjectionStack> p_hq;  // HQ angles; required in AngleSubset mode
  Volume r_hq;
};

struct StageConfigs {
  TrainConfig projection;
  TrainConfig sinogram;
  TrainConfig reconstruction;
};

/// Flips and rotations for projection and reconstruction stages, flips only
/// for the sinogram stage.
StageConfigs default_stage_configs();

struct MultiStageModel {
  RegressorModel stage_p;  // 1 channel: p_hat
  RegressorModel stage_s;  // 2 channels: upsample(T(p*)), upsample(T(p_hat))
  RegressorModel stage_r;  // 3 channels: R(s*), R(T(p*)), R(T(p_hat))
  std::vector<double> lq_angles;
  std::vector<double> hq_angles;
  std::size_t rows = 0;
  std::size_t cols = 0;
  ReferenceMode reference_mode = ReferenceMode::AngleSubset;

  std::size_t upsample_rows() const noexcept { return hq_angles.size(); }
  ParallelGeometry lq_geometry() const { return {lq_angles, rows, cols}; }
  ParallelGeometry hq_geometry() const { return {hq_angles, rows, cols}; }
  std::size_t parameter_count() const;
  void validate() const;

  /// Layout: stage_p/model.bin, stage_s/model.bin, stage_r/model.bin, multistage.json.
  void save(const std::filesystem::path& dir) const;
  static MultiStageModel load(const std::filesystem::path& dir);
};

struct MultiStageTrainOptions {
  StageConfigs configs = default_stage_configs();
  std::size_t hidden_layers = 4;
  std::size_t width = 16;
  std::size_t hq_angles = 0;  // 0: taken from the first object's p_hq
  ReferenceMode reference_mode = ReferenceMode::AngleSubset;
  std::uint64_t seed = 0;
  /// When set, checkpoints, multistage.json and per-object intermediates are
  /// written here as each stage finishes.
  std::optional<std::filesystem::path> work_dir;
  /// Stages before this one ("p", "s" or "r") are loaded from work_dir instead
  /// of trained.
  std::string resume_from = "p";
};

/// Sequential training: stage p, then s on the frozen p outputs, then r on the
/// frozen p and s outputs.
MultiStageModel train_multistage(const std::vector<TrainingObject>& objects, const MultiStageTrainOptions& options);

struct StageTiming {
  std::string name;
  double seconds = 0.0;
};

struct StageArtifacts {
  ProjectionStack p_star;
  SinogramStack s_lq_up;     // upsample(T(p_hat))
  SinogramStack s_pstar_up;  // upsample(T(p*))
  SinogramStack s_star;
  Volume r_lq;     // mask(R(T(p_hat))), LQ angles
  Volume r_pstar;  // mask(R(T(p*))), LQ angles
  Volume r_sstar;  // mask(R(s*)), HQ angles
  Volume r_star;
  std::vector<StageTiming> timings;
  double total_seconds = 0.0;
};

StageArtifacts infer_multistage(const MultiStageModel& model, const ProjectionStack& p_lq);

/// mask(fbp(s)) at the sinogram's own angles.
Volume reconstruct_masked(const SinogramStack& s);

ProjectionStack apply_projection_stage(const RegressorModel& f, const ProjectionStack& p);
SinogramStack apply_sinogram_stage(const RegressorModel& f, const SinogramStack& s_pstar_up,
                                   const SinogramStack& s_lq_up);
Volume apply_reconstruction_stage(const RegressorModel& f, const Volume& r_sstar, const Volume& r_pstar,
                                  const Volume& r_lq);

/// Single-network baseline on reconstruction slices (1 input channel).
RegressorModel train_postprocess(const std::vector<Volume>& r_lq, const std::vector<Volume>& r_hq,
                                 const TrainConfig& config, const RegressorSpec& spec, std::uint64_t seed);
Volume infer_postprocess(const RegressorModel& model, const Volume& r_lq);

/// Post-processing spec whose parameter count best matches `budget`.
RegressorSpec budget_matched_postprocess_spec(std::size_t budget, std::size_t hidden_layers);

}  // namespace ctstage
