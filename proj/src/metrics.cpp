#include "colorser/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"

namespace colorser::metrics {
namespace {

void check_series(PairedSeries s, const char* what) {
  if (s.truth.size() != s.prediction.size()) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(s.truth.size()) + " vs " +
                          std::to_string(s.prediction.size()) + ")");
  }
  if (s.truth.size() < 2) throw DomainError(std::string(what) + ": need at least 2 pairs");
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    if (!std::isfinite(s.truth[i]) || !std::isfinite(s.prediction[i])) {
      throw ValidationError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

template <typename A, typename B>
void check_lengths(std::span<A> a, std::span<B> b, const char* what) {
  if (a.size() != b.size()) throw ValidationError(std::string(what) + ": length mismatch");
  if (a.empty()) throw ValidationError(std::string(what) + ": empty input");
}

}  // namespace

Moments moments(PairedSeries s) {
  check_series(s, "moments");
  const auto n = static_cast<double>(s.truth.size());
  Moments m;
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    m.mean_truth += s.truth[i];
    m.mean_pred += s.prediction[i];
  }
  m.mean_truth /= n;
  m.mean_pred /= n;
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    const double dt = s.truth[i] - m.mean_truth;
    const double dp = s.prediction[i] - m.mean_pred;
    m.var_truth += dt * dt;
    m.var_pred += dp * dp;
    m.covariance += dt * dp;
  }
  m.var_truth /= n;
  m.var_pred /= n;
  m.covariance /= n;
  return m;
}

double pcc(PairedSeries s) {
  const Moments m = moments(s);
  if (m.var_truth <= 0.0 || m.var_pred <= 0.0) throw DomainError("pcc: undefined for a constant series");
  return std::clamp(m.covariance / std::sqrt(m.var_truth * m.var_pred), -1.0, 1.0);
}

CccResult ccc_detailed(PairedSeries s) {
  const Moments m = moments(s);
  const double gap = m.mean_truth - m.mean_pred;
  const double denominator = m.var_truth + m.var_pred + gap * gap;
  if (denominator == 0.0) return {gap == 0.0 ? 1.0 : 0.0, true};
  return {2.0 * m.covariance / denominator, false};
}

double ccc(PairedSeries s) { return ccc_detailed(s).value; }

double ccc_loss(PairedSeries s) { return 1.0 - ccc(s); }

double mean_angular_error(std::span<const double> truth_deg, std::span<const double> pred_deg) {
  check_lengths(truth_deg, pred_deg, "mean_angular_error");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth_deg.size(); ++i) sum += circular::angular_error(truth_deg[i], pred_deg[i]);
  return sum / static_cast<double>(truth_deg.size());
}

double accuracy(std::span<const Emotion> truth, std::span<const Emotion> pred) {
  check_lengths(truth, pred, "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

ConfusionMatrix confusion(std::span<const Emotion> truth, std::span<const Emotion> pred) {
  check_lengths(truth, pred, "confusion");
  ConfusionMatrix counts{};
  for (std::size_t i = 0; i < truth.size(); ++i) counts[index_of(truth[i])][index_of(pred[i])] += 1;
  return counts;
}

}  // namespace colorser::metrics
