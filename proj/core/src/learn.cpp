#include "ctstage/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <Eigen/Core>

#include "ctstage/error.hpp"
#include "ctstage/rng.hpp"

namespace ctstage {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kSplitStream = 12;
constexpr std::uint64_t kOrderStream = 13;
constexpr std::uint64_t kAugmentStream = 14;

inline std::size_t reflect_index(long i, std::size_t n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= static_cast<long>(n)) return 2 * n - 2 - static_cast<std::size_t>(i);
  return static_cast<std::size_t>(i);
}

void im2col(const Array3& in, AlignedVector& col) {
  const auto [c_in, h, w] = in.shape();
  const std::size_t hw = h * w;
  col.resize(9 * c_in * hw);
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* dst = col.data() + ((c * 3 + ky) * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const double* src = &in(c, reflect_index(static_cast<long>(y + ky) - 1, h), 0);
          double* row = dst + y * w;
          if (kx == 1) {
            std::memcpy(row, src, w * sizeof(double));
          } else if (kx == 0) {
            row[0] = src[1];
            std::memcpy(row + 1, src, (w - 1) * sizeof(double));
          } else {
            std::memcpy(row, src + 1, (w - 1) * sizeof(double));
            row[w - 1] = src[w - 2];
          }
        }
      }
}

void col2im(const double* col, Array3& grad_in) {
  const auto [c_in, h, w] = grad_in.shape();
  const std::size_t hw = h * w;
  std::fill(grad_in.values().begin(), grad_in.values().end(), 0.0);
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* src = col + ((c * 3 + ky) * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          double* dst = &grad_in(c, reflect_index(static_cast<long>(y + ky) - 1, h), 0);
          const double* row = src + y * w;
          if (kx == 1) {
            for (std::size_t x = 0; x < w; ++x) dst[x] += row[x];
          } else if (kx == 0) {
            dst[1] += row[0];
            for (std::size_t x = 1; x < w; ++x) dst[x - 1] += row[x];
          } else {
            for (std::size_t x = 0; x + 1 < w; ++x) dst[x + 1] += row[x];
            dst[w - 2] += row[w - 1];
          }
        }
      }
}

void check_layer(const Array3& input, const ConvLayer& layer) {
  require(input.dim(0) == layer.in_channels, "conv input has " + std::to_string(input.dim(0)) +
                                                  " channels, layer expects " + std::to_string(layer.in_channels));
  require(input.dim(1) >= 2 && input.dim(2) >= 2, "conv input must be at least 2x2");
  require(layer.weights.size() == layer.out_channels * layer.in_channels * 9 &&
              layer.bias.size() == layer.out_channels,
          "conv layer parameter arrays have inconsistent sizes");
}

void conv_forward_into(const Array3& input, const ConvLayer& layer, AlignedVector& columns, Array3& out) {
  check_layer(input, layer);
  const std::size_t h = input.dim(1), w = input.dim(2), hw = h * w;
  im2col(input, columns);
  if (out.shape() != Shape3{layer.out_channels, h, w}) out = Array3({layer.out_channels, h, w});
  thread_local AlignedVector weights;
  weights.assign(layer.weights.begin(), layer.weights.end());
  ConstMapRM wm(weights.data(), static_cast<long>(layer.out_channels), static_cast<long>(9 * layer.in_channels));
  ConstMapRM cm(columns.data(), static_cast<long>(9 * layer.in_channels), static_cast<long>(hw));
  MapRM om(out.storage().data(), static_cast<long>(layer.out_channels), static_cast<long>(hw));
  om.noalias() = wm * cm;
  for (std::size_t o = 0; o < layer.out_channels; ++o) om.row(static_cast<long>(o)).array() += layer.bias[o];
}

// Weight/bias gradients, and the input gradient when `grad_in` is non-null.
void conv_backward_into(const Array3& grad_out, const AlignedVector& columns, const Shape3& input_shape,
                        const ConvLayer& layer, std::vector<double>& grad_w, std::vector<double>& grad_b,
                        Array3* grad_in) {
  const std::size_t h = input_shape[1], w = input_shape[2], hw = h * w;
  require(grad_out.shape() == Shape3{layer.out_channels, h, w}, "conv backward: gradient shape mismatch");
  require(columns.size() == 9 * layer.in_channels * hw, "conv backward: cache does not match layer");
  const long k = static_cast<long>(9 * layer.in_channels);
  const long co = static_cast<long>(layer.out_channels);
  ConstMapRM gm(grad_out.storage().data(), co, static_cast<long>(hw));
  ConstMapRM cm(columns.data(), k, static_cast<long>(hw));
  thread_local AlignedVector gw_buf;
  gw_buf.resize(layer.weights.size());
  MapRM gw(gw_buf.data(), co, k);
  gw.noalias() = gm * cm.transpose();
  grad_w.assign(gw_buf.begin(), gw_buf.end());
  grad_b.assign(layer.out_channels, 0.0);
  for (std::size_t o = 0; o < layer.out_channels; ++o)
    for (double v : grad_out.plane(o)) grad_b[o] += v;
  if (grad_in) {
    thread_local AlignedVector grad_cols, weights;
    grad_cols.resize(columns.size());
    weights.assign(layer.weights.begin(), layer.weights.end());
    ConstMapRM wm(weights.data(), co, k);
    MapRM gc(grad_cols.data(), k, static_cast<long>(hw));
    gc.noalias() = wm.transpose() * gm;
    if (grad_in->shape() != input_shape) *grad_in = Array3(input_shape);
    col2im(grad_cols.data(), *grad_in);
  }
}

// Activations and caches for one forward pass; reused across training steps.
struct Workspace {
  Array3 normalized;
  std::vector<AlignedVector> columns;
  std::vector<Array3> activations;  // output of every layer (post-ReLU for hidden ones)
  std::vector<Array3> grads;        // per-layer gradient buffers
};

void normalize_into(const RegressorModel& m, const Array3& input, Array3& out) {
  require(input.dim(0) == m.spec.in_channels, "input has " + std::to_string(input.dim(0)) +
                                                  " channels, model expects " + std::to_string(m.spec.in_channels));
  require(m.norm.mean.size() == m.spec.in_channels && m.norm.stddev.size() == m.spec.in_channels,
          "model normalization statistics missing");
  out = input;
  for (std::size_t c = 0; c < input.dim(0); ++c) {
    const double mu = m.norm.mean[c], inv = 1.0 / m.norm.stddev[c];
    for (double& v : out.plane(c)) v = (v - mu) * inv;
  }
}

// Runs every layer; returns a reference to the network output (1, H, W).
const Array3& run_network(const RegressorModel& m, const Array3& input, Workspace& ws) {
  normalize_into(m, input, ws.normalized);
  const std::size_t n = m.layers.size();
  ws.columns.resize(n);
  ws.activations.resize(n);
  const Array3* cur = &ws.normalized;
  for (std::size_t l = 0; l < n; ++l) {
    conv_forward_into(*cur, m.layers[l], ws.columns[l], ws.activations[l]);
    if (l + 1 < n)
      for (double& v : ws.activations[l].values()) v = v > 0.0 ? v : 0.0;
    cur = &ws.activations[l];
  }
  return ws.activations.back();
}

double sample_loss(const RegressorModel& m, const Array3& input, const Array3& target, Workspace& ws,
                   ParameterGradients* grads) {
  const std::size_t h = input.dim(1), w = input.dim(2), hw = h * w;
  require(target.shape() == Shape3{1, h, w}, "target must be (1, H, W) matching the input");
  const Array3& out = run_network(m, input, ws);
  const double s0 = m.norm.stddev[0];
  const double base0 = m.norm.mean[0];
  const auto x0 = input.plane(0);
  const auto t = target.plane(0);
  const auto o = out.plane(0);

  const std::size_t n = m.layers.size();
  ws.grads.resize(n);
  Array3& g_out = ws.grads[n - 1];
  if (g_out.shape() != Shape3{1, h, w}) g_out = Array3({1, h, w});
  auto g = g_out.plane(0);
  double loss = 0.0;
  const double inv_s0 = 1.0 / s0;
  for (std::size_t i = 0; i < hw; ++i) {
    const double offset = m.spec.residual ? (x0[i] - t[i]) * inv_s0 : (base0 - t[i]) * inv_s0;
    const double d = o[i] + offset;
    loss += d * d;
    g[i] = 2.0 * d / static_cast<double>(hw);
  }
  loss /= static_cast<double>(hw);
  if (!grads) return loss;

  grads->weights.resize(n);
  grads->bias.resize(n);
  for (std::size_t l = n; l-- > 0;) {
    const Array3& layer_in = l == 0 ? ws.normalized : ws.activations[l - 1];
    Array3* g_in = l == 0 ? nullptr : &ws.grads[l - 1];
    conv_backward_into(ws.grads[l], ws.columns[l], layer_in.shape(), m.layers[l], grads->weights[l], grads->bias[l],
                       g_in);
    if (g_in) {
      // ReLU: pass gradient only where the activation was positive.
      auto gv = g_in->values();
      const auto av = layer_in.values();
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (av[i] <= 0.0) gv[i] = 0.0;
    }
  }
  return loss;
}

}  // namespace

void RegressorSpec::validate() const {
  require(in_channels >= 1 && in_channels <= 3, "regressor in_channels must be 1..3");
  require(hidden_layers >= 1, "regressor needs at least one hidden layer");
  require(width >= 1, "regressor width must be >= 1");
}

std::size_t RegressorSpec::parameter_count() const {
  const std::size_t first = 9 * in_channels * width + width;
  const std::size_t middle = (hidden_layers - 1) * (9 * width * width + width);
  const std::size_t last = 9 * width + 1;
  return first + middle + last;
}

std::size_t budget_matched_width(std::size_t target, std::size_t in_channels, std::size_t hidden_layers) {
  std::size_t best = 1;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  for (std::size_t w = 1; w <= 1024; ++w) {
    const std::size_t count = RegressorSpec{in_channels, hidden_layers, w, true}.parameter_count();
    const std::size_t gap = count > target ? count - target : target - count;
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
    if (count > target) break;
  }
  return best;
}

Array3 conv2d_forward(const Array3& input, const ConvLayer& layer, ConvCache* cache) {
  Array3 out;
  if (cache) {
    conv_forward_into(input, layer, cache->columns, out);
    cache->input_shape = input.shape();
  } else {
    thread_local AlignedVector scratch;
    conv_forward_into(input, layer, scratch, out);
  }
  return out;
}

ConvGradients conv2d_backward(const Array3& grad_out, const ConvCache& cache, const ConvLayer& layer) {
  ConvGradients g;
  g.input = Array3(cache.input_shape);
  conv_backward_into(grad_out, cache.columns, cache.input_shape, layer, g.weights, g.bias, &g.input);
  return g;
}

RegressorModel RegressorModel::initialize(const RegressorSpec& spec, std::uint64_t seed) {
  spec.validate();
  RegressorModel m;
  m.spec = spec;
  Rng rng(derive_seed(seed, kInitStream));
  std::size_t in = spec.in_channels;
  for (std::size_t l = 0; l <= spec.hidden_layers; ++l) {
    const bool output = l == spec.hidden_layers;
    ConvLayer layer;
    layer.in_channels = in;
    layer.out_channels = output ? 1 : spec.width;
    layer.weights.assign(layer.out_channels * in * 9, 0.0);
    layer.bias.assign(layer.out_channels, 0.0);
    if (!output) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(9 * in));
      for (double& wv : layer.weights) wv = rng.normal(0.0, stddev);
    }
    m.layers.push_back(std::move(layer));
    in = spec.width;
  }
  m.norm.mean.assign(spec.in_channels, 0.0);
  m.norm.stddev.assign(spec.in_channels, 1.0);
  return m;
}

void RegressorModel::validate() const {
  spec.validate();
  require(layers.size() == spec.hidden_layers + 1, "model layer count does not match its spec");
  for (const auto& l : layers)
    for (double v : l.weights) require(std::isfinite(v), "model contains non-finite weights");
  require(norm.mean.size() == spec.in_channels && norm.stddev.size() == spec.in_channels,
          "model normalization has wrong channel count");
  for (double s : norm.stddev) require(s > 0.0 && std::isfinite(s), "normalization std must be positive");
}

Array3 predict(const RegressorModel& model, const Array3& input) {
  thread_local Workspace ws;
  const Array3& out = run_network(model, input, ws);
  const std::size_t h = input.dim(1), w = input.dim(2);
  Array3 result({1, h, w});
  auto r = result.plane(0);
  const auto o = out.plane(0);
  const auto x0 = input.plane(0);
  const double s0 = model.norm.stddev[0];
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = (model.spec.residual ? x0[i] : model.norm.mean[0]) + s0 * o[i];
  return result;
}

double loss_and_gradient(const RegressorModel& model, const Array3& input, const Array3& target,
                         ParameterGradients* grads) {
  Workspace ws;
  return sample_loss(model, input, target, ws, grads);
}

std::vector<DihedralOp> allowed_ops(const AugmentToggles& t) {
  using D = DihedralOp;
  if (t.rotate && (t.hflip || t.vflip))
    return {D::Identity, D::FlipHorizontal, D::FlipVertical, D::Rotate180,
            D::Transpose, D::Rotate90,      D::Rotate270,    D::AntiTranspose};
  if (t.rotate) return {D::Identity, D::Rotate90, D::Rotate180, D::Rotate270};
  if (t.hflip && t.vflip) return {D::Identity, D::FlipHorizontal, D::FlipVertical, D::Rotate180};
  if (t.hflip) return {D::Identity, D::FlipHorizontal};
  if (t.vflip) return {D::Identity, D::FlipVertical};
  return {D::Identity};
}

Array3 apply_dihedral(const Array3& image, DihedralOp op) {
  const auto [c, h, w] = image.shape();
  const bool swaps = op == DihedralOp::Transpose || op == DihedralOp::Rotate90 || op == DihedralOp::Rotate270 ||
                     op == DihedralOp::AntiTranspose;
  require(!swaps || h == w, "rotation and transpose augmentations need square images");
  if (op == DihedralOp::Identity) return image;
  Array3 out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::size_t sy = y, sx = x;
        switch (op) {
          case DihedralOp::Identity: break;
          case DihedralOp::FlipHorizontal: sx = w - 1 - x; break;
          case DihedralOp::FlipVertical: sy = h - 1 - y; break;
          case DihedralOp::Rotate180: sy = h - 1 - y; sx = w - 1 - x; break;
          case DihedralOp::Transpose: sy = x; sx = y; break;
          case DihedralOp::Rotate90: sy = w - 1 - x; sx = y; break;
          case DihedralOp::Rotate270: sy = x; sx = h - 1 - y; break;
          case DihedralOp::AntiTranspose: sy = w - 1 - x; sx = h - 1 - y; break;
        }
        out(ch, y, x) = image(ch, sy, sx);
      }
  return out;
}

TrainingPair augment(const TrainingPair& pair, DihedralOp op) {
  return {apply_dihedral(pair.input, op), apply_dihedral(pair.target, op)};
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
  require(patience >= 1, "patience must be >= 1");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, "validation_fraction must lie in (0, 1)");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "ADAM betas must lie in [0, 1)");
  require(epsilon > 0.0, "ADAM epsilon must be > 0");
  require(wall_clock_seconds > 0.0, "wall_clock_seconds must be > 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"patience", c.patience},
          {"wall_clock_seconds", c.wall_clock_seconds},
          {"augment", {{"hflip", c.augment.hflip}, {"vflip", c.augment.vflip}, {"rotate", c.augment.rotate}}},
          {"validation_fraction", c.validation_fraction},
          {"steps_per_epoch", c.steps_per_epoch},
          {"max_validation_pairs", c.max_validation_pairs},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& d) {
  TrainConfig c = d;
  c.epochs = j.value("epochs", d.epochs);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.patience = j.value("patience", d.patience);
  c.wall_clock_seconds = j.value("wall_clock_seconds", d.wall_clock_seconds);
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    c.augment.hflip = a.value("hflip", d.augment.hflip);
    c.augment.vflip = a.value("vflip", d.augment.vflip);
    c.augment.rotate = a.value("rotate", d.augment.rotate);
  }
  c.validation_fraction = j.value("validation_fraction", d.validation_fraction);
  c.steps_per_epoch = j.value("steps_per_epoch", d.steps_per_epoch);
  c.max_validation_pairs = j.value("max_validation_pairs", d.max_validation_pairs);
  c.seed = j.value("seed", d.seed);
  return c;
}

Normalization compute_normalization(const std::vector<const Array3*>& inputs) {
  require(!inputs.empty(), "normalization needs at least one input");
  const std::size_t channels = inputs.front()->dim(0);
  Normalization n;
  n.mean.assign(channels, 0.0);
  n.stddev.assign(channels, 1.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0, count = 0.0;
    for (const Array3* a : inputs)
      for (double v : a->plane(c)) sum += v;
    for (const Array3* a : inputs) count += static_cast<double>(a->plane(c).size());
    const double mean = sum / count;
    double ss = 0.0;
    for (const Array3* a : inputs)
      for (double v : a->plane(c)) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / count);
    n.mean[c] = mean;
    n.stddev[c] = sd > 1e-12 * std::max(1.0, std::fabs(mean)) ? sd : 1.0;
  }
  return n;
}

RegressorModel train(RegressorModel model, const std::vector<TrainingPair>& pairs, const TrainConfig& config) {
  config.validate();
  model.validate();
  for (const auto& p : pairs) {
    require(p.input.dim(0) == model.spec.in_channels, "training input channel count does not match the model");
    require(p.target.shape() == Shape3{1, p.input.dim(1), p.input.dim(2)}, "training target shape mismatch");
  }
  require(pairs.size() >= 2, "training needs at least 2 pairs (one training, one validation)");

  // Split.
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng split_rng(derive_seed(config.seed, kSplitStream));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.below(i)]);
  }
  const std::size_t n_val =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.validation_fraction * pairs.size())));
  require(n_val < pairs.size(), "empty training split");
  std::vector<std::size_t> val_idx(order.end() - static_cast<long>(n_val), order.end());
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<long>(n_val));
  std::sort(val_idx.begin(), val_idx.end());
  if (config.max_validation_pairs > 0 && val_idx.size() > config.max_validation_pairs)
    val_idx.resize(config.max_validation_pairs);

  std::vector<const Array3*> train_inputs;
  for (std::size_t i : train_idx) train_inputs.push_back(&pairs[i].input);
  model.norm = compute_normalization(train_inputs);
  model.history.clear();
  model.best_epoch = 0;

  const std::vector<DihedralOp> ops = allowed_ops(config.augment);
  Rng order_rng(derive_seed(config.seed, kOrderStream));
  Rng aug_rng(derive_seed(config.seed, kAugmentStream));

  std::size_t n_params = 0;
  for (const auto& l : model.layers) n_params += l.weights.size() + l.bias.size();
  std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
  std::uint64_t step = 0;

  Workspace ws;
  ParameterGradients grads;
  const auto validation_loss = [&] {
    double acc = 0.0;
    for (std::size_t i : val_idx) acc += sample_loss(model, pairs[i].input, pairs[i].target, ws, nullptr);
    return acc / static_cast<double>(val_idx.size());
  };

  RegressorModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> queue;
  std::size_t queue_pos = 0;
  const std::size_t steps_per_epoch = config.steps_per_epoch > 0 ? config.steps_per_epoch : train_idx.size();
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double train_acc = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      if (queue_pos == queue.size()) {
        queue = train_idx;
        for (std::size_t i = queue.size(); i > 1; --i) std::swap(queue[i - 1], queue[order_rng.below(i)]);
        queue_pos = 0;
      }
      const TrainingPair& src = pairs[queue[queue_pos++]];
      const DihedralOp op = ops[aug_rng.below(ops.size())];
      double loss;
      if (op == DihedralOp::Identity) {
        loss = sample_loss(model, src.input, src.target, ws, &grads);
      } else {
        const TrainingPair aug = augment(src, op);
        loss = sample_loss(model, aug.input, aug.target, ws, &grads);
      }
      if (!std::isfinite(loss)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      train_acc += loss;

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      std::size_t k = 0;
      const auto update = [&](std::vector<double>& params, const std::vector<double>& g) {
        for (std::size_t i = 0; i < params.size(); ++i, ++k) {
          adam_m[k] = config.beta1 * adam_m[k] + (1.0 - config.beta1) * g[i];
          adam_v[k] = config.beta2 * adam_v[k] + (1.0 - config.beta2) * g[i] * g[i];
          const double mhat = adam_m[k] / bc1;
          const double vhat = adam_v[k] / bc2;
          params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
      };
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(model.layers[l].weights, grads.weights[l]);
        update(model.layers[l].bias, grads.bias[l]);
      }
    }

    const double val = validation_loss();
    if (!std::isfinite(val)) throw NumericError("validation loss became non-finite at epoch " + std::to_string(epoch));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    model.history.push_back({epoch, train_acc / static_cast<double>(steps_per_epoch), val, elapsed});

    if (val < best_val) {
      best_val = val;
      since_best = 0;
      best.layers = model.layers;
      best.best_epoch = epoch;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
    if (elapsed >= config.wall_clock_seconds) break;
  }

  best.norm = model.norm;
  best.history = model.history;
  if (model.history.empty()) best.best_epoch = 0;
  return best;
}

}  // namespace ctstage
