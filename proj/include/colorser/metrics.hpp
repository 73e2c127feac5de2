#pragma once

#include <array>
#include <span>

#include "colorser/labels.hpp"

namespace colorser::metrics {

/// Paired truth/prediction values. Views only; the caller owns the data.
struct PairedSeries {
  std::span<const double> truth;
  std::span<const double> prediction;
};

/// Population moments of a paired series.
struct Moments {
  double mean_truth = 0.0;
  double mean_pred = 0.0;
  double var_truth = 0.0;
  double var_pred = 0.0;
  double covariance = 0.0;
};

Moments moments(PairedSeries series);

/// Pearson correlation. Throws DomainError when either series is constant.
double pcc(PairedSeries series);

struct CccResult {
  double value = 0.0;
  /// Both series constant at the same value, so the denominator vanished;
  /// value is then 1.
  bool degenerate = false;
};

/// Concordance correlation 2 cov / (var_y + var_yhat + (mu_y - mu_yhat)^2).
CccResult ccc_detailed(PairedSeries series);
double ccc(PairedSeries series);
double ccc_loss(PairedSeries series);

double mean_angular_error(std::span<const double> truth_deg, std::span<const double> pred_deg);

using ConfusionMatrix = std::array<std::array<std::size_t, kEmotionCount>, kEmotionCount>;

double accuracy(std::span<const Emotion> truth, std::span<const Emotion> pred);
/// counts[truth][pred].
ConfusionMatrix confusion(std::span<const Emotion> truth, std::span<const Emotion> pred);

}  // namespace colorser::metrics
