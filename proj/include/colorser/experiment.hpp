#pragma once

// Leave-one-speaker-out experiment drivers: SVR vs. DNN color regression and
// the multitask alpha sweep.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "colorser/features.hpp"
#include "colorser/labels.hpp"
#include "colorser/metrics.hpp"
#include "colorser/neural.hpp"
#include "colorser/svr.hpp"

namespace colorser::experiment {

/// Recorded in every report header.
inline constexpr std::string_view kProtocol =
    "leave-one-speaker-out; train = regular-session utterances of the other speakers; "
    "validation = phrase_free-session utterances of the other speakers; "
    "test = phrase_free-session utterances of the held-out speaker; "
    "the held-out speaker's regular session is unused";

inline constexpr std::string_view kAggregationNote =
    "pooled = metrics over all test utterances of all folds; fold_mean = unweighted mean of per-fold metrics; "
    "undefined hue predictions count as a 180 degree error";

struct FoldSpec {
  std::string held_out_speaker;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
};

/// One fold per speaker, speakers in sorted order.
std::vector<FoldSpec> make_loso_folds(std::span<const UtteranceMeta> metas);

struct ExperimentConfig {
  /// Empty lists fall back to svr::default_grid for that axis.
  svr::SvrGrid grid;
  /// When non-empty and grid.gamma is empty, gamma = scale / D for each entry.
  std::vector<double> gamma_scale;
  svr::SvrConfig svr_base;
  neural::TrainConfig dnn;
  std::string feature_name = "features";
  /// Standardize features with training-fold statistics.
  bool standardize = true;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct RegressionScores {
  std::optional<double> hue_ae;
  std::optional<double> sat_pcc;
  std::optional<double> sat_ccc;
  std::optional<double> val_pcc;
  std::optional<double> val_ccc;
  std::size_t hue_undefined = 0;
};

struct UtterancePrediction {
  std::string utterance_id;
  std::string speaker_id;
  Emotion emotion = Emotion::Ang;
  ColorLabel truth;
  /// Empty hue with has_regression set means the model output no defined angle.
  bool has_regression = false;
  std::optional<double> hue_deg;
  double saturation = 0.0;
  double value = 0.0;
  std::optional<Emotion> predicted_emotion;
};

struct FoldResult {
  std::string held_out_speaker;
  std::size_t n_test = 0;
  std::optional<RegressionScores> scores;
  std::optional<double> accuracy;
  std::optional<metrics::ConfusionMatrix> confusion;
  /// Model-selection details (grid choices, best epoch).
  nlohmann::json selection;
};

struct SettingResult {
  std::string name;
  std::optional<double> alpha;
  std::vector<FoldResult> folds;
  std::optional<RegressionScores> pooled;
  std::optional<RegressionScores> fold_mean;
  std::optional<double> pooled_accuracy;
  std::optional<double> fold_mean_accuracy;
  std::optional<metrics::ConfusionMatrix> pooled_confusion;
  std::vector<UtterancePrediction> predictions;
};

struct RunReport {
  std::string experiment;
  nlohmann::json config;
  std::vector<std::string> fold_speakers;
  std::vector<SettingResult> settings;
};

/// Pooled and fold-averaged metrics recomputed from per-utterance predictions.
RegressionScores score_regression(std::span<const UtterancePrediction> predictions);
void finalize_setting(SettingResult& setting);

/// SVR (grid-searched, hue via sin/cos pair) plus DNN individual and joint rows.
RunReport run_experiment1(const FeatureSet& features, std::span<const AggregatedLabel> labels,
                          std::span<const UtteranceMeta> metas, const ExperimentConfig& config);

/// One multitask DNN run per alpha; alpha = 1 rows carry no regression metrics.
RunReport run_experiment2(const FeatureSet& features, std::span<const AggregatedLabel> labels,
                          std::span<const UtteranceMeta> metas, std::span<const double> alphas,
                          const ExperimentConfig& config);

inline constexpr std::array<double, 5> kDefaultAlphas{0.6, 0.7, 0.8, 0.9, 1.0};

nlohmann::json to_json(const RunReport& report);

}  // namespace colorser::experiment
