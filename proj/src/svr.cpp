#include "colorser/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/metrics.hpp"
#include "colorser/simd.hpp"

namespace colorser::svr {
namespace {

constexpr int kFormatVersion = 1;
constexpr double kTau = 1e-12;

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite feature value");
  }
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite target value");
  }
}

// Solver over the 2N-variable form: beta = [alpha; alpha*], sign +1 for the
// first half and -1 for the second, Q_ts = sign_t sign_s K(t mod N, s mod N).
class SmoSolver {
 public:
  SmoSolver(const Matrix& kernel, std::span<const double> targets, const SvrConfig& config)
      : kernel_(kernel), n_(targets.size()), c_(config.c), tolerance_(config.tolerance),
        beta_(2 * n_, 0.0), gradient_(2 * n_), linear_(2 * n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      linear_[i] = config.epsilon - targets[i];
      linear_[i + n_] = config.epsilon + targets[i];
    }
    gradient_ = linear_;
    const std::size_t passes = config.max_passes == 0 ? 10 * n_ : config.max_passes;
    max_iterations_ = passes * n_;
  }

  SolverReport solve() {
    SolverReport report;
    while (true) {
      const auto selection = select_working_set();
      report.kkt_gap = selection.gap;
      if (selection.gap < tolerance_ || selection.j < 0) {
        report.converged = true;
        break;
      }
      if (report.iterations >= max_iterations_) break;
      update_pair(static_cast<std::size_t>(selection.i), static_cast<std::size_t>(selection.j));
      ++report.iterations;
    }
    double objective = 0.0;
    for (std::size_t t = 0; t < 2 * n_; ++t) objective += beta_[t] * (gradient_[t] + linear_[t]);
    report.dual_objective = 0.5 * objective;
    return report;
  }

  std::vector<double> coefficients() const {
    std::vector<double> coef(n_);
    for (std::size_t i = 0; i < n_; ++i) coef[i] = beta_[i] - beta_[i + n_];
    return coef;
  }

  double bias() const {
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      const double yg = sign(t) * gradient_[t];
      if (at_upper(t)) {
        if (sign(t) < 0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else if (at_lower(t)) {
        if (sign(t) > 0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else {
        free_sum += yg;
        ++free_count;
      }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (upper + lower);
    return -rho;
  }

 private:
  struct Selection {
    long i = -1;
    long j = -1;
    double gap = 0.0;
  };

  double sign(std::size_t t) const { return t < n_ ? 1.0 : -1.0; }
  std::size_t row(std::size_t t) const { return t < n_ ? t : t - n_; }
  double q(std::size_t t, std::size_t s) const { return sign(t) * sign(s) * kernel_(row(t), row(s)); }
  bool at_upper(std::size_t t) const { return beta_[t] >= c_; }
  bool at_lower(std::size_t t) const { return beta_[t] <= 0.0; }
  bool in_up(std::size_t t) const { return sign(t) > 0 ? !at_upper(t) : !at_lower(t); }
  bool in_low(std::size_t t) const { return sign(t) > 0 ? !at_lower(t) : !at_upper(t); }

  // i maximizes the violation -y G over I_up; j minimizes the second-order
  // objective decrease over I_low.
  Selection select_working_set() const {
    double g_max = -std::numeric_limits<double>::infinity();
    long i = -1;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      if (in_up(t)) {
        const double v = -sign(t) * gradient_[t];
        if (v > g_max) {
          g_max = v;
          i = static_cast<long>(t);
        }
      }
    }
    double g_max2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    long j = -1;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      if (!in_low(t)) continue;
      const double yg = sign(t) * gradient_[t];
      g_max2 = std::max(g_max2, yg);
      if (i < 0) continue;
      const double b = g_max + yg;
      if (b > 0.0) {
        const auto ii = static_cast<std::size_t>(i);
        double a = q(ii, ii) + q(t, t) - 2.0 * sign(ii) * sign(t) * q(ii, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best_obj) {
          best_obj = obj;
          j = static_cast<long>(t);
        }
      }
    }
    Selection s{i, j, g_max + g_max2};
    if (i < 0 || !std::isfinite(s.gap)) s.gap = 0.0;
    return s;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double old_i = beta_[i];
    const double old_j = beta_[j];
    const double q_ii = q(i, i), q_jj = q(j, j), q_ij = q(i, j);
    if (sign(i) != sign(j)) {
      double quad = q_ii + q_jj + 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-gradient_[i] - gradient_[j]) / quad;
      const double diff = beta_[i] - beta_[j];
      beta_[i] += delta;
      beta_[j] += delta;
      if (diff > 0.0) {
        if (beta_[j] < 0.0) { beta_[j] = 0.0; beta_[i] = diff; }
      } else {
        if (beta_[i] < 0.0) { beta_[i] = 0.0; beta_[j] = -diff; }
      }
      if (diff > 0.0) {
        if (beta_[i] > c_) { beta_[i] = c_; beta_[j] = c_ - diff; }
      } else {
        if (beta_[j] > c_) { beta_[j] = c_; beta_[i] = c_ + diff; }
      }
    } else {
      double quad = q_ii + q_jj - 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (gradient_[i] - gradient_[j]) / quad;
      const double sum = beta_[i] + beta_[j];
      beta_[i] -= delta;
      beta_[j] += delta;
      if (sum > c_) {
        if (beta_[i] > c_) { beta_[i] = c_; beta_[j] = sum - c_; }
      } else {
        if (beta_[j] < 0.0) { beta_[j] = 0.0; beta_[i] = sum; }
      }
      if (sum > c_) {
        if (beta_[j] > c_) { beta_[j] = c_; beta_[i] = sum - c_; }
      } else {
        if (beta_[i] < 0.0) { beta_[i] = 0.0; beta_[j] = sum; }
      }
    }
    const double d_i = beta_[i] - old_i;
    const double d_j = beta_[j] - old_j;
    for (std::size_t t = 0; t < 2 * n_; ++t) gradient_[t] += q(t, i) * d_i + q(t, j) * d_j;
  }

  const Matrix& kernel_;
  std::size_t n_;
  double c_;
  double tolerance_;
  std::size_t max_iterations_ = 0;
  std::vector<double> beta_;
  std::vector<double> gradient_;
  std::vector<double> linear_;
};

SvrConfig config_from_json(const nlohmann::json& j) {
  SvrConfig c;
  c.c = j.at("c").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.max_passes = j.value("max_passes", std::size_t{0});
  c.tolerance = j.value("tolerance", 1e-3);
  validate(c);
  return c;
}

nlohmann::json config_to_json(const SvrConfig& c) {
  return {{"c", c.c}, {"epsilon", c.epsilon}, {"gamma", c.gamma}, {"max_passes", c.max_passes},
          {"tolerance", c.tolerance}};
}

void check_dimension(const SvrModel& model, std::size_t dim) {
  const std::size_t expected = model.scaler.empty() ? model.dimension() : model.scaler.mean.size();
  if (dim != expected) {
    throw ValidationError("predict_svr: feature dimension " + std::to_string(dim) + " does not match model dimension " +
                          std::to_string(expected));
  }
}

template <typename Model, typename Trainer, typename Scorer>
GridSearchResult<Model> run_grid(const SvrGrid& grid, const SvrConfig& base, Trainer train, Scorer score,
                                 bool higher_is_better) {
  const auto configs = expand_grid(grid, base);
  if (configs.empty()) throw ValidationError("grid_search: empty grid");
  GridSearchResult<Model> result;
  bool have_best = false;
  for (const auto& config : configs) {
    Model model = train(config);
    GridEntry entry{config, false, std::nullopt};
    if constexpr (std::is_same_v<Model, HueSvrPair>) {
      entry.converged = model.sin_model.solver.converged && model.cos_model.solver.converged;
    } else {
      entry.converged = model.solver.converged;
    }
    if (entry.converged) {
      const double s = score(model);
      entry.score = s;
      const bool better = !have_best || (higher_is_better ? s > result.best_score : s < result.best_score);
      if (better) {
        result.best = config;
        result.best_score = s;
        result.model = std::move(model);
        have_best = true;
      }
    }
    result.entries.push_back(entry);
  }
  if (!have_best) {
    std::string message = "grid_search: no grid point converged:";
    for (const auto& e : result.entries) {
      message += " (c=" + std::to_string(e.config.c) + ", epsilon=" + std::to_string(e.config.epsilon) +
                 ", gamma=" + std::to_string(e.config.gamma) + ")";
    }
    throw ConvergenceError(message);
  }
  return result;
}

}  // namespace

void validate(const SvrConfig& config) {
  if (!(config.c > 0.0) || !std::isfinite(config.c)) throw ValidationError("SvrConfig: c must be > 0");
  if (!(config.epsilon >= 0.0) || !std::isfinite(config.epsilon)) throw ValidationError("SvrConfig: epsilon must be >= 0");
  if (!(config.gamma > 0.0) || !std::isfinite(config.gamma)) throw ValidationError("SvrConfig: gamma must be > 0");
  if (!(config.tolerance > 0.0)) throw ValidationError("SvrConfig: tolerance must be > 0");
}

FeatureScaler FeatureScaler::fit(const Matrix& rows) {
  if (rows.rows() == 0) throw ValidationError("FeatureScaler: no rows");
  FeatureScaler s;
  s.mean.assign(rows.cols(), 0.0);
  s.scale.assign(rows.cols(), 0.0);
  const auto n = static_cast<double>(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) s.mean[c] += rows(r, c);
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) {
      const double d = rows(r, c) - s.mean[c];
      s.scale[c] += d * d;
    }
  }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (!(v > 0.0)) v = 1.0;
  }
  return s;
}

std::vector<double> FeatureScaler::apply(std::span<const double> row) const {
  if (empty()) return {row.begin(), row.end()};
  if (row.size() != mean.size()) throw ValidationError("FeatureScaler: dimension mismatch");
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / scale[c];
  return out;
}

Matrix FeatureScaler::apply(const Matrix& rows) const {
  if (empty()) return rows;
  if (rows.cols() != mean.size()) throw ValidationError("FeatureScaler: dimension mismatch");
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) out(r, c) = (rows(r, c) - mean[c]) / scale[c];
  }
  return out;
}

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  return std::exp(-gamma * simd::squared_distance(x, z));
}

Matrix kernel_matrix(const Matrix& rows, double gamma) {
  const std::size_t n = rows.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rbf_kernel(rows.row(i), rows.row(j), gamma);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

SvrModel train_svr(const Matrix& features, std::span<const double> targets, const SvrConfig& config) {
  validate(config);
  if (features.rows() != targets.size()) throw ValidationError("train_svr: feature rows and targets differ in count");
  if (features.rows() < 2) throw ValidationError("train_svr: need at least 2 training points");
  require_finite(features, "train_svr");
  require_finite(targets, "train_svr");

  const Matrix kernel = kernel_matrix(features, config.gamma);
  SmoSolver solver(kernel, targets, config);
  SvrModel model;
  model.config = config;
  model.solver = solver.solve();
  model.bias = solver.bias();

  const std::vector<double> coef = solver.coefficients();
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < coef.size(); ++i) {
    if (coef[i] != 0.0) support.push_back(i);
  }
  model.support_vectors = Matrix(support.size(), features.cols());
  model.dual_coefficients.reserve(support.size());
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto src = features.row(support[k]);
    std::copy(src.begin(), src.end(), model.support_vectors.row(k).begin());
    model.dual_coefficients.push_back(coef[support[k]]);
  }
  // A model with no support vectors still needs its input dimension.
  if (support.empty()) model.support_vectors = Matrix(0, features.cols());
  return model;
}

double dual_objective(const Matrix& kernel, std::span<const double> targets, double epsilon,
                      std::span<const double> coefficients) {
  const std::size_t n = targets.size();
  if (kernel.rows() != n || kernel.cols() != n || coefficients.size() != n) {
    throw ValidationError("dual_objective: size mismatch");
  }
  double quadratic = 0.0;
  double linear = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    quadratic += coefficients[i] * simd::dot(kernel.row(i), coefficients);
    linear += epsilon * std::abs(coefficients[i]) - targets[i] * coefficients[i];
  }
  return 0.5 * quadratic + linear;
}

double predict_svr(const SvrModel& model, std::span<const double> x) {
  check_dimension(model, x.size());
  const std::vector<double> query = model.scaler.apply(x);
  double sum = model.bias;
  for (std::size_t k = 0; k < model.dual_coefficients.size(); ++k) {
    sum += model.dual_coefficients[k] * rbf_kernel(model.support_vectors.row(k), query, model.config.gamma);
  }
  return sum;
}

std::vector<double> predict_svr(const SvrModel& model, const Matrix& rows) {
  std::vector<double> out;
  out.reserve(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out.push_back(predict_svr(model, rows.row(r)));
  return out;
}

HueSvrPair train_hue_pair(const Matrix& features, std::span<const double> hue_deg, const SvrConfig& config) {
  std::vector<double> sines, cosines;
  sines.reserve(hue_deg.size());
  cosines.reserve(hue_deg.size());
  for (double h : hue_deg) {
    const auto [s, c] = circular::hue_to_components(h);
    sines.push_back(s);
    cosines.push_back(c);
  }
  return {train_svr(features, sines, config), train_svr(features, cosines, config)};
}

double predict_hue(const HueSvrPair& pair, std::span<const double> x) {
  return circular::components_to_hue(predict_svr(pair.sin_model, x), predict_svr(pair.cos_model, x));
}

std::vector<std::optional<double>> predict_hue(const HueSvrPair& pair, const Matrix& rows) {
  std::vector<std::optional<double>> out;
  out.reserve(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    try {
      out.emplace_back(predict_hue(pair, rows.row(r)));
    } catch (const UndefinedAngleError&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

std::vector<double> temporal_average_pooling(const Matrix& frames) {
  if (frames.rows() == 0) throw DomainError("temporal_average_pooling: no frames");
  std::vector<double> pooled(frames.cols(), 0.0);
  for (std::size_t t = 0; t < frames.rows(); ++t) simd::axpy(1.0, frames.row(t), pooled);
  for (double& v : pooled) v /= static_cast<double>(frames.rows());
  return pooled;
}

SvrGrid default_grid(std::size_t dimension) {
  if (dimension == 0) throw ValidationError("default_grid: zero dimension");
  const auto d = static_cast<double>(dimension);
  return {{0.1, 1.0, 10.0, 100.0}, {0.01, 0.1}, {1.0 / d, 10.0 / d, 0.1 / d}};
}

std::vector<SvrConfig> expand_grid(const SvrGrid& grid, const SvrConfig& base) {
  std::vector<SvrConfig> out;
  for (double c : grid.c) {
    for (double eps : grid.epsilon) {
      for (double gamma : grid.gamma) {
        SvrConfig config = base;
        config.c = c;
        config.epsilon = eps;
        config.gamma = gamma;
        validate(config);
        out.push_back(config);
      }
    }
  }
  return out;
}

GridSearchResult<SvrModel> grid_search(const Matrix& train_x, std::span<const double> train_y, const Matrix& val_x,
                                       std::span<const double> val_y, const SvrGrid& grid, const SvrConfig& base) {
  if (val_x.rows() != val_y.size()) throw ValidationError("grid_search: validation rows and targets differ in count");
  return run_grid<SvrModel>(
      grid, base, [&](const SvrConfig& config) { return train_svr(train_x, train_y, config); },
      [&](const SvrModel& model) {
        const std::vector<double> pred = predict_svr(model, val_x);
        return metrics::ccc({val_y, pred});
      },
      true);
}

GridSearchResult<HueSvrPair> grid_search_hue(const Matrix& train_x, std::span<const double> train_hue_deg,
                                             const Matrix& val_x, std::span<const double> val_hue_deg,
                                             const SvrGrid& grid, const SvrConfig& base) {
  if (val_x.rows() != val_hue_deg.size()) {
    throw ValidationError("grid_search_hue: validation rows and targets differ in count");
  }
  if (val_hue_deg.empty()) throw ValidationError("grid_search_hue: empty validation set");
  return run_grid<HueSvrPair>(
      grid, base, [&](const SvrConfig& config) { return train_hue_pair(train_x, train_hue_deg, config); },
      [&](const HueSvrPair& pair) {
        const auto pred = predict_hue(pair, val_x);
        double total = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          total += pred[i] ? circular::angular_error(val_hue_deg[i], *pred[i]) : 180.0;
        }
        return total / static_cast<double>(pred.size());
      },
      false);
}

nlohmann::json to_json(const SvrModel& model) {
  nlohmann::json sv = nlohmann::json::array();
  for (std::size_t r = 0; r < model.support_vectors.rows(); ++r) {
    const auto row = model.support_vectors.row(r);
    sv.push_back(std::vector<double>(row.begin(), row.end()));
  }
  nlohmann::json j{
      {"format", "colorser-svr"},
      {"version", kFormatVersion},
      {"config", config_to_json(model.config)},
      {"bias", model.bias},
      {"dimension", model.dimension()},
      {"dual_coefficients", model.dual_coefficients},
      {"support_vectors", sv},
      {"solver",
       {{"converged", model.solver.converged},
        {"iterations", model.solver.iterations},
        {"dual_objective", model.solver.dual_objective},
        {"kkt_gap", model.solver.kkt_gap}}},
  };
  if (model.scaler.empty()) {
    j["scaler"] = nullptr;
  } else {
    j["scaler"] = {{"mean", model.scaler.mean}, {"scale", model.scaler.scale}};
  }
  return j;
}

SvrModel svr_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "colorser-svr") throw ValidationError("not an SVR model file");
    if (j.at("version").get<int>() != kFormatVersion) throw ValidationError("unsupported SVR model version");
    SvrModel model;
    model.config = config_from_json(j.at("config"));
    model.bias = j.at("bias").get<double>();
    model.dual_coefficients = j.at("dual_coefficients").get<std::vector<double>>();
    const auto dim = j.at("dimension").get<std::size_t>();
    const auto& sv = j.at("support_vectors");
    if (sv.size() != model.dual_coefficients.size()) {
      throw ValidationError("support vector count does not match coefficient count");
    }
    model.support_vectors = Matrix(sv.size(), dim);
    for (std::size_t r = 0; r < sv.size(); ++r) {
      const auto row = sv[r].get<std::vector<double>>();
      if (row.size() != dim) throw ValidationError("support vector has wrong dimension");
      std::copy(row.begin(), row.end(), model.support_vectors.row(r).begin());
    }
    if (!j.at("scaler").is_null()) {
      model.scaler.mean = j["scaler"].at("mean").get<std::vector<double>>();
      model.scaler.scale = j["scaler"].at("scale").get<std::vector<double>>();
      if (model.scaler.mean.size() != dim || model.scaler.scale.size() != dim) {
        throw ValidationError("scaler dimension mismatch");
      }
    }
    const auto& solver = j.at("solver");
    model.solver.converged = solver.at("converged").get<bool>();
    model.solver.iterations = solver.at("iterations").get<std::size_t>();
    model.solver.dual_objective = solver.at("dual_objective").get<double>();
    model.solver.kkt_gap = solver.at("kkt_gap").get<double>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("SVR model JSON: ") + e.what());
  }
}

nlohmann::json to_json(const HueSvrPair& pair) {
  return {{"format", "colorser-svr-hue-pair"},
          {"version", kFormatVersion},
          {"sin_model", to_json(pair.sin_model)},
          {"cos_model", to_json(pair.cos_model)}};
}

HueSvrPair hue_pair_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "colorser-svr-hue-pair") throw ValidationError("not an SVR hue pair file");
    HueSvrPair pair{svr_model_from_json(j.at("sin_model")), svr_model_from_json(j.at("cos_model"))};
    if (pair.sin_model.dimension() != pair.cos_model.dimension()) {
      throw ValidationError("hue pair models disagree on feature dimension");
    }
    return pair;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("SVR hue pair JSON: ") + e.what());
  }
}

}  // namespace colorser::svr
