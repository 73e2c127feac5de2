#pragma once

// epsilon-insensitive support vector regression with an RBF kernel, solved in
// the dual by SMO with maximal-violating-pair working-set selection.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorser/matrix.hpp"

namespace colorser::svr {

struct SvrConfig {
  double c = 1.0;
  double epsilon = 0.1;
  double gamma = 1.0;
  /// Iteration budget is max_passes * N pair updates; 0 selects 10 * N passes.
  std::size_t max_passes = 0;
  /// Stop when the maximal KKT violation drops below this.
  double tolerance = 1e-3;

  bool operator==(const SvrConfig&) const = default;
};

void validate(const SvrConfig& config);

/// Per-dimension standardization fitted on training rows. Dimensions with
/// zero spread keep scale 1.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaler fit(const Matrix& rows);
  bool empty() const { return mean.empty(); }
  std::vector<double> apply(std::span<const double> row) const;
  Matrix apply(const Matrix& rows) const;

  bool operator==(const FeatureScaler&) const = default;
};

struct SolverReport {
  bool converged = false;
  std::size_t iterations = 0;
  /// Minimized dual objective 0.5 b'Qb + p'b at the returned point.
  double dual_objective = 0.0;
  /// Final maximal KKT violation.
  double kkt_gap = 0.0;
};

struct SvrModel {
  Matrix support_vectors;
  /// alpha_i - alpha_i^* for each support vector.
  std::vector<double> dual_coefficients;
  double bias = 0.0;
  SvrConfig config;
  /// Applied to queries before kernel evaluation when non-empty.
  FeatureScaler scaler;
  SolverReport solver;

  std::size_t dimension() const { return support_vectors.cols(); }
};

/// k(x, z) = exp(-gamma * |x - z|^2)
double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

Matrix kernel_matrix(const Matrix& rows, double gamma);

/// Trains on the given rows as-is (no scaling). Non-convergence is reported
/// through model.solver.converged rather than thrown.
SvrModel train_svr(const Matrix& features, std::span<const double> targets, const SvrConfig& config);

/// 0.5 c'Kc + eps * sum|c| - y'c for coefficients c on the training kernel.
double dual_objective(const Matrix& kernel, std::span<const double> targets, double epsilon,
                      std::span<const double> coefficients);

double predict_svr(const SvrModel& model, std::span<const double> x);
std::vector<double> predict_svr(const SvrModel& model, const Matrix& rows);

struct HueSvrPair {
  SvrModel sin_model;
  SvrModel cos_model;
};

/// Trains the sine and cosine regressors on identical rows.
HueSvrPair train_hue_pair(const Matrix& features, std::span<const double> hue_deg, const SvrConfig& config);

/// Hue in [0, 360) from the two component predictions. Throws
/// UndefinedAngleError when both predictions are near zero.
double predict_hue(const HueSvrPair& pair, std::span<const double> x);
/// Undefined hues come back empty.
std::vector<std::optional<double>> predict_hue(const HueSvrPair& pair, const Matrix& rows);

std::vector<double> temporal_average_pooling(const Matrix& frames);

// Grid search ------------------------------------------------------------------

struct SvrGrid {
  std::vector<double> c;
  std::vector<double> epsilon;
  std::vector<double> gamma;
};

/// c in {0.1, 1, 10, 100}, epsilon in {0.01, 0.1}, gamma in {1, 10, 0.1} / D.
SvrGrid default_grid(std::size_t dimension);

/// Configs in grid order: c outermost, gamma innermost.
std::vector<SvrConfig> expand_grid(const SvrGrid& grid, const SvrConfig& base);

struct GridEntry {
  SvrConfig config;
  bool converged = false;
  /// Validation score; empty when the point failed to converge.
  std::optional<double> score;
};

template <typename Model>
struct GridSearchResult {
  SvrConfig best;
  double best_score = 0.0;
  Model model;
  std::vector<GridEntry> entries;
};

/// Scores by validation CCC (higher is better). Ties keep the earlier point.
/// Throws ConvergenceError if no grid point converged.
GridSearchResult<SvrModel> grid_search(const Matrix& train_x, std::span<const double> train_y, const Matrix& val_x,
                                       std::span<const double> val_y, const SvrGrid& grid,
                                       const SvrConfig& base = {});

/// Scores hue pairs by validation mean angular error (lower is better).
/// Undefined validation hues count as the maximal 180 degree error.
GridSearchResult<HueSvrPair> grid_search_hue(const Matrix& train_x, std::span<const double> train_hue_deg,
                                             const Matrix& val_x, std::span<const double> val_hue_deg,
                                             const SvrGrid& grid, const SvrConfig& base = {});

// Persistence ------------------------------------------------------------------

nlohmann::json to_json(const SvrModel& model);
SvrModel svr_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HueSvrPair& pair);
HueSvrPair hue_pair_from_json(const nlohmann::json& j);

}  // namespace colorser::svr
