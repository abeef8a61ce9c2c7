#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctstage/array.hpp"

namespace ctstage {

/// Same-resolution stack of 3x3 convolutions: `hidden_layers` rectified layers
/// of `width` channels, then a linear single-channel output layer.
struct RegressorSpec {
  std::size_t in_channels = 1;
  std::size_t hidden_layers = 4;
  std::size_t width = 16;
  bool residual = true;  // add input channel 0 to the output

  void validate() const;
  std::size_t parameter_count() const;
  friend bool operator==(const RegressorSpec&, const RegressorSpec&) = default;
};

/// Width whose parameter count is closest to `target` (smaller width on ties).
std::size_t budget_matched_width(std::size_t target, std::size_t in_channels, std::size_t hidden_layers);

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> weights;  // (out, in, 3, 3) row-major
  std::vector<double> bias;     // (out)

  double& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights[((o * in_channels + i) * 3 + ky) * 3 + kx];
  }
  double w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * 3 + ky) * 3 + kx];
  }
};

/// im2col buffer kept from the forward pass.
struct ConvCache {
  Shape3 input_shape{0, 0, 0};
  AlignedVector columns;  // (9 * in) x (H * W)
};

struct ConvGradients {
  std::vector<double> weights;
  std::vector<double> bias;
  Array3 input;
};

/// 3x3 cross-correlation with one pixel of reflect padding (mirror without
/// repeating the edge), same-size output.
Array3 conv2d_forward(const Array3& input, const ConvLayer& layer, ConvCache* cache = nullptr);
ConvGradients conv2d_backward(const Array3& grad_out, const ConvCache& cache, const ConvLayer& layer);

struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;  // wall clock since training start; not persisted
};

struct RegressorModel {
  RegressorSpec spec;
  std::vector<ConvLayer> layers;
  Normalization norm;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0: weights are the initialization

  /// Kaiming-normal hidden layers, zero output layer, identity normalization.
  static RegressorModel initialize(const RegressorSpec& spec, std::uint64_t seed);

  void validate() const;
  std::size_t parameter_count() const { return spec.parameter_count(); }
};

/// Normalizes, runs the stack, denormalizes; output shape (1, H, W). With
/// `residual`, the result is input[0] + std0 * net(x), so a zero network is an
/// exact identity on channel 0.
Array3 predict(const RegressorModel& model, const Array3& input);

struct ParameterGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

/// Normalized-space MSE of one sample and, when `grads` is given, its exact
/// gradient with respect to every weight and bias.
double loss_and_gradient(const RegressorModel& model, const Array3& input, const Array3& target,
                         ParameterGradients* grads);

enum class DihedralOp : std::uint8_t {
  Identity = 0,
  FlipHorizontal,
  FlipVertical,
  Rotate180,
  Transpose,
  Rotate90,
  Rotate270,
  AntiTranspose,
};

struct AugmentToggles {
  bool hflip = true;
  bool vflip = true;
  bool rotate = true;
  friend bool operator==(const AugmentToggles&, const AugmentToggles&) = default;
};

/// The dihedral transforms generated by the enabled toggles.
std::vector<DihedralOp> allowed_ops(const AugmentToggles& toggles);

struct TrainingPair {
  Array3 input;   // (C, H, W)
  Array3 target;  // (1, H, W)
};

Array3 apply_dihedral(const Array3& image, DihedralOp op);
TrainingPair augment(const TrainingPair& pair, DihedralOp op);

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 10;
  double wall_clock_seconds = 600.0;
  AugmentToggles augment;
  double validation_fraction = 0.2;
  std::size_t steps_per_epoch = 0;       // 0: one pass over the training split
  std::size_t max_validation_pairs = 0;  // 0: all validation pairs
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults = {});

/// ADAM on per-image MSE with random dihedral augmentation. Returns the
/// weights with the best validation loss; stops at the epoch budget, after
/// `patience` epochs without strict improvement, or at the wall-clock budget.
RegressorModel train(RegressorModel model, const std::vector<TrainingPair>& pairs, const TrainConfig& config);

/// Per-channel mean and standard deviation over the given inputs (std falls
/// back to 1 for a constant channel).
Normalization compute_normalization(const std::vector<const Array3*>& inputs);

void save_model(const RegressorModel& model, const std::filesystem::path& path);
RegressorModel load_model(const std::filesystem::path& path);

}  // namespace ctstage
