#pragma once

// Feed-forward network over utterance embeddings: a shared tanh trunk feeding
// a two-layer regression head (sin H, cos H, S, V) and a six-way
// classification head, trained with CCC loss, cross-entropy and their
// alpha-weighted combination.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "colorser/labels.hpp"
#include "colorser/matrix.hpp"

namespace colorser::neural {

inline constexpr std::size_t kRegressionOutputs = 4;  // sin H, cos H, S, V
inline constexpr std::size_t kSinDim = 0;
inline constexpr std::size_t kCosDim = 1;
inline constexpr std::size_t kSatDim = 2;
inline constexpr std::size_t kValDim = 3;

/// weight is out x in, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

struct MlpShape {
  std::size_t input = 0;
  std::vector<std::size_t> trunk{256, 128};
  std::size_t regression_hidden = 64;

  bool operator==(const MlpShape&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> trunk;
  /// Hidden layer then the 4-output linear layer.
  std::array<DenseLayer, 2> regression_head;
  DenseLayer classification_head;
  std::uint64_t seed = 0;

  MlpShape shape() const;
  /// Flat views over every weight and bias, in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  /// Same shape, all zeros.
  MlpParams zeros_like() const;

  bool operator==(const MlpParams&) const = default;
};

/// Glorot-uniform weights and zero biases, bit-identical for a given seed.
MlpParams init_params(const MlpShape& shape, std::uint64_t seed);

struct ForwardOutput {
  Matrix regression;  // B x 4
  Matrix logits;      // B x 6
};

ForwardOutput forward(const MlpParams& params, const Matrix& batch);

/// Which regression outputs enter the CCC average.
struct TargetSet {
  bool hue = true;
  bool saturation = true;
  bool value = true;

  static TargetSet all() { return {}; }
  static TargetSet only_hue() { return {true, false, false}; }
  static TargetSet only_saturation() { return {false, true, false}; }
  static TargetSet only_value() { return {false, false, true}; }

  std::array<bool, kRegressionOutputs> mask() const { return {hue, hue, saturation, value}; }
  bool any() const { return hue || saturation || value; }
  bool operator==(const TargetSet&) const = default;
};

/// Mean over the selected columns of 1 - CCC computed down the batch axis.
double batch_ccc_loss(const Matrix& pred, const Matrix& target);
double batch_ccc_loss(const Matrix& pred, const Matrix& target, std::span<const bool> column_mask);

/// Mean negative log-softmax of the true class.
double cross_entropy(const Matrix& logits, std::span<const int> labels);

/// (1 - alpha) * CCC loss + alpha * cross-entropy. The regression term is not
/// evaluated at alpha = 1, nor the classification term at alpha = 0.
double multitask_loss(const Matrix& reg_pred, const Matrix& reg_target, const Matrix& logits,
                      std::span<const int> labels, double alpha, const TargetSet& targets = TargetSet::all());

struct LossAndGradients {
  double loss = 0.0;
  MlpParams gradients;
};

/// Exact gradients of multitask_loss with respect to every parameter.
LossAndGradients backward(const MlpParams& params, const Matrix& batch, const Matrix& targets,
                          std::span<const int> labels, double alpha, const TargetSet& target_set = TargetSet::all());

/// Gradients of cross-entropy alone through trunk and classification head.
/// Independent of backward(); used as the classification-only reference.
LossAndGradients classification_backward(const MlpParams& params, const Matrix& batch, std::span<const int> labels);

struct AdamWConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  /// Length of the linear decay; the rate reaches 0 at this step.
  std::size_t total_steps = 1;
};

struct AdamWState {
  MlpParams first_moment;
  MlpParams second_moment;

  static AdamWState for_params(const MlpParams& params);
};

/// Learning rate at 1-based step t: base * (1 - t / total).
double linear_schedule(double base_rate, std::size_t step_index, std::size_t total_steps);

/// Decoupled weight decay then the bias-corrected Adam update, in place.
void adamw_step(MlpParams& params, const MlpParams& gradients, AdamWState& state, std::size_t step_index,
                const AdamWConfig& config);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 1e-5;
  double alpha = 0.0;
  double weight_decay = 0.01;
  TargetSet target_set = TargetSet::all();
  std::uint64_t seed = 0;
  std::vector<std::size_t> trunk{256, 128};
  std::size_t regression_hidden = 64;
};

void validate(const TrainConfig& config);

/// features N x D, targets N x 4 (sin H, cos H, S, V), labels in 0..5.
struct Dataset {
  Matrix features;
  Matrix targets;
  std::vector<int> labels;

  std::size_t size() const { return features.rows(); }
};

/// Row of regression targets for a color label.
std::array<double, kRegressionOutputs> regression_target(const ColorLabel& color);

struct ValidationScores {
  std::optional<double> hue_ae;
  std::optional<double> sat_pcc;
  std::optional<double> sat_ccc;
  std::optional<double> val_pcc;
  std::optional<double> val_ccc;
  std::optional<double> accuracy;
  /// CCC loss over the selected targets on the whole validation set.
  std::optional<double> regression_loss;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<ValidationScores> validation;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochRecord> history;
  /// 1-based epoch whose parameters were kept.
  std::size_t best_epoch = 0;
};

/// Seeded shuffling, initialization and batching. With a validation set the
/// returned parameters come from the best validation epoch: accuracy when
/// classification is trained (ties go to lower regression loss, then to the
/// earlier epoch), otherwise the lowest regression loss.
TrainResult train(const Dataset& training, const Dataset* validation, const TrainConfig& config);

/// Classification-only trainer sharing initialization and batching with
/// train(). Equivalent to train() at alpha = 1.
TrainResult train_classifier_only(const Dataset& training, const Dataset* validation, const TrainConfig& config);

ValidationScores evaluate(const MlpParams& params, const Dataset& data, const TrainConfig& config);

struct ColorPrediction {
  /// Empty when the (sin, cos) outputs are too close to zero to define a hue.
  std::optional<double> hue_deg;
  double saturation = 0.0;
  double value = 0.0;
  Emotion emotion = Emotion::Ang;
  std::array<double, kRegressionOutputs> raw{};
};

std::vector<ColorPrediction> predict_colors(const MlpParams& params, const Matrix& features);

/// Seeded 64-bit generator shared by initialization and shuffling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double normal();

 private:
  std::uint64_t state_;
};

nlohmann::json to_json(const MlpParams& params);
MlpParams mlp_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults = {});

}  // namespace colorser::neural
