#include "colorser/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/metrics.hpp"
#include "colorser/simd.hpp"

namespace colorser::neural {
namespace {

constexpr int kFormatVersion = 1;
constexpr std::uint64_t kShuffleStream = 0x5DEECE66DULL;

// Activations kept for the backward pass.
struct Trace {
  std::vector<Matrix> trunk;  // output of each trunk layer (post-tanh)
  Matrix regression_hidden;   // post-tanh
  Matrix regression;
  Matrix logits;
};

DenseLayer make_layer(std::size_t in, std::size_t out) {
  return {in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
}

std::span<const double> weight_row(const DenseLayer& layer, std::size_t o) {
  return {layer.weight.data() + o * layer.in, layer.in};
}

std::span<double> weight_row(DenseLayer& layer, std::size_t o) { return {layer.weight.data() + o * layer.in, layer.in}; }

Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.cols() != layer.in) {
    throw ValidationError("forward: input width " + std::to_string(input.cols()) + " does not match layer input " +
                          std::to_string(layer.in));
  }
  Matrix out(input.rows(), layer.out);
  for (std::size_t b = 0; b < input.rows(); ++b) {
    const auto x = input.row(b);
    for (std::size_t o = 0; o < layer.out; ++o) out(b, o) = simd::dot(x, weight_row(layer, o)) + layer.bias[o];
  }
  return out;
}

void apply_tanh(Matrix& m) {
  for (double& v : m.values()) v = std::tanh(v);
}

// Accumulates parameter gradients and, when requested, the input gradient.
void dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_out, DenseLayer& grad_layer,
                    Matrix* grad_input) {
  for (std::size_t b = 0; b < input.rows(); ++b) {
    const auto x = input.row(b);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double g = grad_out(b, o);
      if (g == 0.0) continue;
      simd::axpy(g, x, weight_row(grad_layer, o));
      grad_layer.bias[o] += g;
      if (grad_input) simd::axpy(g, weight_row(layer, o), grad_input->row(b));
    }
  }
}

// In place: grad *= 1 - activation^2.
void tanh_backward(Matrix& grad, const Matrix& activation) {
  auto g = grad.values();
  const auto a = activation.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
}

Trace run_forward(const MlpParams& params, const Matrix& batch, bool regression, bool classification) {
  if (params.trunk.empty()) throw ValidationError("forward: network has no trunk layers");
  if (batch.cols() != params.trunk.front().in) {
    throw ValidationError("forward: batch width " + std::to_string(batch.cols()) + " does not match network input " +
                          std::to_string(params.trunk.front().in));
  }
  Trace trace;
  const Matrix* current = &batch;
  for (const auto& layer : params.trunk) {
    Matrix z = dense_forward(layer, *current);
    apply_tanh(z);
    trace.trunk.push_back(std::move(z));
    current = &trace.trunk.back();
  }
  if (regression) {
    trace.regression_hidden = dense_forward(params.regression_head[0], *current);
    apply_tanh(trace.regression_hidden);
    trace.regression = dense_forward(params.regression_head[1], trace.regression_hidden);
  }
  if (classification) trace.logits = dense_forward(params.classification_head, *current);
  return trace;
}

void check_labels(std::span<const int> labels, std::size_t rows) {
  if (labels.size() != rows) throw ValidationError("labels: count does not match batch size");
  for (int l : labels) {
    if (l < 0 || l >= static_cast<int>(kEmotionCount)) {
      throw ValidationError("labels: emotion index out of range: " + std::to_string(l));
    }
  }
}

// Max-shifted softmax of one logit row.
std::array<double, kEmotionCount> softmax_row(std::span<const double> logits) {
  std::array<double, kEmotionCount> p{};
  const double shift = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t c = 0; c < kEmotionCount; ++c) {
    p[c] = std::exp(logits[c] - shift);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

// dCE/dlogits for the batch mean.
Matrix cross_entropy_gradient(const Matrix& logits, std::span<const int> labels) {
  Matrix grad(logits.rows(), logits.cols());
  const auto batch = static_cast<double>(logits.rows());
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto p = softmax_row(logits.row(b));
    for (std::size_t c = 0; c < kEmotionCount; ++c) {
      const double indicator = static_cast<int>(c) == labels[b] ? 1.0 : 0.0;
      grad(b, c) = (p[c] - indicator) / batch;
    }
  }
  return grad;
}

std::size_t selected_count(std::span<const bool> mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

// d(batch_ccc_loss)/d(pred); batch statistics couple every row.
Matrix ccc_loss_gradient(const Matrix& pred, const Matrix& target, std::span<const bool> mask) {
  Matrix grad(pred.rows(), pred.cols());
  const std::size_t k = selected_count(mask);
  const auto n = static_cast<double>(pred.rows());
  for (std::size_t col = 0; col < pred.cols(); ++col) {
    if (!mask[col]) continue;
    double mp = 0.0, mt = 0.0;
    for (std::size_t b = 0; b < pred.rows(); ++b) {
      mp += pred(b, col);
      mt += target(b, col);
    }
    mp /= n;
    mt /= n;
    double vp = 0.0, vt = 0.0, cov = 0.0;
    for (std::size_t b = 0; b < pred.rows(); ++b) {
      const double dp = pred(b, col) - mp;
      const double dt = target(b, col) - mt;
      vp += dp * dp;
      vt += dt * dt;
      cov += dp * dt;
    }
    vp /= n;
    vt /= n;
    cov /= n;
    const double gap = mp - mt;
    const double denominator = vp + vt + gap * gap;
    if (denominator == 0.0) continue;  // degenerate CCC is piecewise constant
    for (std::size_t b = 0; b < pred.rows(); ++b) {
      const double d_cov = (target(b, col) - mt) / n;
      const double d_den = 2.0 * (pred(b, col) - mp) / n + 2.0 * gap / n;
      const double d_ccc = 2.0 * d_cov / denominator - 2.0 * cov * d_den / (denominator * denominator);
      grad(b, col) = -d_ccc / static_cast<double>(k);
    }
  }
  return grad;
}

void scale(Matrix& m, double factor) {
  for (double& v : m.values()) v *= factor;
}

// Backward through the trunk given the gradient at its output.
void trunk_backward(const MlpParams& params, const Matrix& batch, Trace& trace, Matrix grad, MlpParams& grads) {
  for (std::size_t l = params.trunk.size(); l-- > 0;) {
    tanh_backward(grad, trace.trunk[l]);
    const Matrix& input = l == 0 ? batch : trace.trunk[l - 1];
    if (l == 0) {
      dense_backward(params.trunk[l], input, grad, grads.trunk[l], nullptr);
    } else {
      Matrix grad_input(input.rows(), input.cols());
      dense_backward(params.trunk[l], input, grad, grads.trunk[l], &grad_input);
      grad = std::move(grad_input);
    }
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

struct Batch {
  Matrix features;
  Matrix targets;
  std::vector<int> labels;
};

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
  Batch b{Matrix(rows.size(), data.features.cols()), Matrix(rows.size(), kRegressionOutputs), {}};
  b.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = data.features.row(rows[i]);
    std::copy(f.begin(), f.end(), b.features.row(i).begin());
    if (!data.targets.empty()) {
      const auto t = data.targets.row(rows[i]);
      std::copy(t.begin(), t.end(), b.targets.row(i).begin());
    }
    if (!data.labels.empty()) b.labels.push_back(data.labels[rows[i]]);
  }
  return b;
}

void check_dataset(const Dataset& data, const TrainConfig& config, const char* what) {
  if (data.size() == 0) throw ValidationError(std::string(what) + ": empty dataset");
  const bool needs_targets = config.alpha < 1.0;
  const bool needs_labels = config.alpha > 0.0;
  if (needs_targets && (data.targets.rows() != data.size() || data.targets.cols() != kRegressionOutputs)) {
    throw ValidationError(std::string(what) + ": regression targets must be N x 4");
  }
  if (needs_labels) check_labels(data.labels, data.size());
  for (double v : data.features.values()) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite feature value");
  }
}

bool better_epoch(const ValidationScores& candidate, const ValidationScores& best, bool classification,
                  bool regression) {
  if (classification) {
    if (*candidate.accuracy != *best.accuracy) return *candidate.accuracy > *best.accuracy;
    return regression && *candidate.regression_loss < *best.regression_loss;
  }
  return *candidate.regression_loss < *best.regression_loss;
}

using GradientFn = LossAndGradients (*)(const MlpParams&, const Batch&, const TrainConfig&);

LossAndGradients multitask_gradients(const MlpParams& params, const Batch& batch, const TrainConfig& config) {
  return backward(params, batch.features, batch.targets, batch.labels, config.alpha, config.target_set);
}

LossAndGradients classifier_gradients(const MlpParams& params, const Batch& batch, const TrainConfig&) {
  return classification_backward(params, batch.features, batch.labels);
}

TrainResult run_training(const Dataset& training, const Dataset* validation, const TrainConfig& config,
                         GradientFn gradient_fn) {
  validate(config);
  check_dataset(training, config, "train");
  if (validation) check_dataset(*validation, config, "validation");
  if (config.batch_size > training.size()) {
    throw ValidationError("train: batch_size " + std::to_string(config.batch_size) + " exceeds dataset size " +
                          std::to_string(training.size()));
  }
  const std::size_t n = training.size();
  const std::size_t remainder = n % config.batch_size;
  // A trailing batch of one has no CCC; drop it.
  const std::size_t batches = n / config.batch_size + (remainder >= 2 ? 1 : 0);

  TrainResult result;
  result.params = init_params({training.features.cols(), config.trunk, config.regression_hidden}, config.seed);
  AdamWState state = AdamWState::for_params(result.params);
  const AdamWConfig optimizer{.learning_rate = config.learning_rate,
                              .weight_decay = config.weight_decay,
                              .total_steps = config.epochs * batches};
  Rng shuffle_rng(config.seed ^ kShuffleStream);

  const bool classification = config.alpha > 0.0;
  const bool regression = config.alpha < 1.0;
  MlpParams current = result.params;
  std::optional<ValidationScores> best;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled_indices(n, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const Batch batch = gather(training, std::span(order).subspan(begin, end - begin));
      LossAndGradients lg = gradient_fn(current, batch, config);
      loss_sum += lg.loss;
      adamw_step(current, lg.gradients, state, ++step, optimizer);
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(batches), std::nullopt};
    if (validation) {
      record.validation = evaluate(current, *validation, config);
      if (!best || better_epoch(*record.validation, *best, classification, regression)) {
        best = record.validation;
        result.params = current;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(std::move(record));
  }
  if (!validation) {
    result.params = current;
    result.best_epoch = config.epochs;
  }
  return result;
}

nlohmann::json layer_to_json(const DenseLayer& layer) {
  return {{"in", layer.in}, {"out", layer.out}, {"weight", layer.weight}, {"bias", layer.bias}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer layer{j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
                   j.at("weight").get<std::vector<double>>(), j.at("bias").get<std::vector<double>>()};
  if (layer.weight.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
    throw ValidationError("layer parameter count does not match its shape");
  }
  return layer;
}

}  // namespace

// Rng ---------------------------------------------------------------------------

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("Rng::below: zero bound");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % bound;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * circular::kPi * u2);
}

// Parameters ----------------------------------------------------------------------

MlpShape MlpParams::shape() const {
  MlpShape s;
  s.input = trunk.empty() ? 0 : trunk.front().in;
  s.trunk.clear();
  for (const auto& l : trunk) s.trunk.push_back(l.out);
  s.regression_hidden = regression_head[0].out;
  return s;
}

std::vector<std::span<double>> MlpParams::tensors() {
  std::vector<std::span<double>> out;
  const auto add = [&](DenseLayer& l) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  };
  for (auto& l : trunk) add(l);
  add(regression_head[0]);
  add(regression_head[1]);
  add(classification_head);
  return out;
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<MlpParams*>(this)->tensors()) out.emplace_back(s);
  return out;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

MlpParams init_params(const MlpShape& shape, std::uint64_t seed) {
  if (shape.input == 0) throw ValidationError("init_params: zero input width");
  if (shape.trunk.empty()) throw ValidationError("init_params: trunk needs at least one layer");
  for (std::size_t w : shape.trunk) {
    if (w == 0) throw ValidationError("init_params: zero hidden width");
  }
  if (shape.regression_hidden == 0) throw ValidationError("init_params: zero regression head width");

  MlpParams p;
  p.seed = seed;
  std::size_t in = shape.input;
  for (std::size_t w : shape.trunk) {
    p.trunk.push_back(make_layer(in, w));
    in = w;
  }
  p.regression_head = {make_layer(in, shape.regression_hidden), make_layer(shape.regression_hidden, kRegressionOutputs)};
  p.classification_head = make_layer(in, kEmotionCount);

  Rng rng(seed);
  const auto fill = [&](DenseLayer& l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (double& w : l.weight) w = (2.0 * rng.uniform() - 1.0) * limit;
  };
  for (auto& l : p.trunk) fill(l);
  fill(p.regression_head[0]);
  fill(p.regression_head[1]);
  fill(p.classification_head);
  return p;
}

ForwardOutput forward(const MlpParams& params, const Matrix& batch) {
  Trace t = run_forward(params, batch, true, true);
  return {std::move(t.regression), std::move(t.logits)};
}

// Losses ------------------------------------------------------------------------

double batch_ccc_loss(const Matrix& pred, const Matrix& target) {
  std::unique_ptr<bool[]> flags(new bool[pred.cols()]);
  std::fill(flags.get(), flags.get() + pred.cols(), true);
  return batch_ccc_loss(pred, target, std::span<const bool>(flags.get(), pred.cols()));
}

double batch_ccc_loss(const Matrix& pred, const Matrix& target, std::span<const bool> column_mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ValidationError("batch_ccc_loss: prediction and target shapes differ");
  }
  if (column_mask.size() != pred.cols()) throw ValidationError("batch_ccc_loss: mask width mismatch");
  if (pred.rows() < 2) throw DomainError("batch_ccc_loss: CCC needs a batch of at least 2");
  const std::size_t k = selected_count(column_mask);
  if (k == 0) throw ValidationError("batch_ccc_loss: no target columns selected");
  std::vector<double> p(pred.rows()), t(pred.rows());
  double total = 0.0;
  for (std::size_t col = 0; col < pred.cols(); ++col) {
    if (!column_mask[col]) continue;
    for (std::size_t b = 0; b < pred.rows(); ++b) {
      p[b] = pred(b, col);
      t[b] = target(b, col);
    }
    total += metrics::ccc_loss({t, p});
  }
  return total / static_cast<double>(k);
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.cols() != kEmotionCount) throw ValidationError("cross_entropy: logits must have 6 columns");
  check_labels(labels, logits.rows());
  if (logits.rows() == 0) throw ValidationError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto row = logits.row(b);
    const double shift = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - shift);
    total += std::log(sum) - (row[static_cast<std::size_t>(labels[b])] - shift);
  }
  return total / static_cast<double>(logits.rows());
}

double multitask_loss(const Matrix& reg_pred, const Matrix& reg_target, const Matrix& logits,
                      std::span<const int> labels, double alpha, const TargetSet& targets) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("multitask_loss: alpha must lie in [0, 1]");
  if (alpha == 1.0) return cross_entropy(logits, labels);
  const auto mask = targets.mask();
  const double regression = batch_ccc_loss(reg_pred, reg_target, mask);
  if (alpha == 0.0) return regression;
  return (1.0 - alpha) * regression + alpha * cross_entropy(logits, labels);
}

LossAndGradients backward(const MlpParams& params, const Matrix& batch, const Matrix& targets,
                          std::span<const int> labels, double alpha, const TargetSet& target_set) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("backward: alpha must lie in [0, 1]");
  const bool regression = alpha < 1.0;
  const bool classification = alpha > 0.0;
  if (regression && (targets.rows() != batch.rows() || targets.cols() != kRegressionOutputs)) {
    throw ValidationError("backward: targets must be B x 4");
  }
  if (classification) check_labels(labels, batch.rows());
  if (regression && !target_set.any()) throw ValidationError("backward: no regression targets selected");

  Trace trace = run_forward(params, batch, regression, classification);
  LossAndGradients out{0.0, params.zeros_like()};
  const Matrix& shared = trace.trunk.back();
  Matrix grad_shared(shared.rows(), shared.cols());

  if (regression) {
    const auto mask = target_set.mask();
    const double ccc_term = batch_ccc_loss(trace.regression, targets, mask);
    Matrix grad_reg = ccc_loss_gradient(trace.regression, targets, mask);
    if (classification) {
      scale(grad_reg, 1.0 - alpha);
      out.loss += (1.0 - alpha) * ccc_term;
    } else {
      out.loss += ccc_term;
    }
    Matrix grad_hidden(trace.regression_hidden.rows(), trace.regression_hidden.cols());
    dense_backward(params.regression_head[1], trace.regression_hidden, grad_reg, out.gradients.regression_head[1],
                   &grad_hidden);
    tanh_backward(grad_hidden, trace.regression_hidden);
    dense_backward(params.regression_head[0], shared, grad_hidden, out.gradients.regression_head[0], &grad_shared);
  }
  if (classification) {
    const double ce = cross_entropy(trace.logits, labels);
    Matrix grad_logits = cross_entropy_gradient(trace.logits, labels);
    if (regression) {
      scale(grad_logits, alpha);
      out.loss += alpha * ce;
    } else {
      out.loss += ce;
    }
    dense_backward(params.classification_head, shared, grad_logits, out.gradients.classification_head, &grad_shared);
  }
  trunk_backward(params, batch, trace, std::move(grad_shared), out.gradients);
  return out;
}

LossAndGradients classification_backward(const MlpParams& params, const Matrix& batch, std::span<const int> labels) {
  check_labels(labels, batch.rows());
  Trace trace = run_forward(params, batch, false, true);
  LossAndGradients out{cross_entropy(trace.logits, labels), params.zeros_like()};
  const Matrix& shared = trace.trunk.back();
  Matrix grad_shared(shared.rows(), shared.cols());
  dense_backward(params.classification_head, shared, cross_entropy_gradient(trace.logits, labels),
                 out.gradients.classification_head, &grad_shared);
  trunk_backward(params, batch, trace, std::move(grad_shared), out.gradients);
  return out;
}

// Optimizer -----------------------------------------------------------------------

AdamWState AdamWState::for_params(const MlpParams& params) {
  return {params.zeros_like(), params.zeros_like()};
}

double linear_schedule(double base_rate, std::size_t step_index, std::size_t total_steps) {
  if (total_steps == 0) throw ValidationError("linear_schedule: zero total steps");
  const double progress = std::min(1.0, static_cast<double>(step_index) / static_cast<double>(total_steps));
  return base_rate * (1.0 - progress);
}

void adamw_step(MlpParams& params, const MlpParams& gradients, AdamWState& state, std::size_t step_index,
                const AdamWConfig& config) {
  if (step_index == 0) throw ValidationError("adamw_step: step index is 1-based");
  auto p = params.tensors();
  const auto g = gradients.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw ValidationError("adamw_step: parameter and gradient shapes differ");
  }
  const double rate = linear_schedule(config.learning_rate, step_index, config.total_steps);
  const double t = static_cast<double>(step_index);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - rate * config.weight_decay;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].size() != g[k].size() || p[k].size() != m[k].size() || p[k].size() != v[k].size()) {
      throw ValidationError("adamw_step: tensor size mismatch");
    }
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      m[k][i] = config.beta1 * m[k][i] + (1.0 - config.beta1) * g[k][i];
      v[k][i] = config.beta2 * v[k][i] + (1.0 - config.beta2) * g[k][i] * g[k][i];
      const double m_hat = m[k][i] / correction1;
      const double v_hat = v[k][i] / correction2;
      p[k][i] = p[k][i] * decay - rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

// Training ------------------------------------------------------------------------

void validate(const TrainConfig& config) {
  if (config.epochs < 1) throw ValidationError("TrainConfig: epochs must be >= 1");
  if (config.batch_size < 2) throw ValidationError("TrainConfig: batch_size must be >= 2");
  if (!(config.learning_rate > 0.0)) throw ValidationError("TrainConfig: learning_rate must be > 0");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) throw ValidationError("TrainConfig: alpha must lie in [0, 1]");
  if (!(config.weight_decay >= 0.0)) throw ValidationError("TrainConfig: weight_decay must be >= 0");
  if (config.alpha < 1.0 && !config.target_set.any()) throw ValidationError("TrainConfig: empty target set");
}

std::array<double, kRegressionOutputs> regression_target(const ColorLabel& color) {
  const auto [s, c] = circular::hue_to_components(color.hue_deg);
  return {s, c, color.saturation, color.value};
}

ValidationScores evaluate(const MlpParams& params, const Dataset& data, const TrainConfig& config) {
  ValidationScores scores;
  const bool regression = config.alpha < 1.0;
  const bool classification = config.alpha > 0.0;
  const Trace trace = run_forward(params, data.features, regression, classification);
  const std::size_t n = data.size();
  if (regression) {
    const auto& ts = config.target_set;
    if (n >= 2) scores.regression_loss = batch_ccc_loss(trace.regression, data.targets, ts.mask());
    const auto column = [&](const Matrix& m, std::size_t col) {
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = m(i, col);
      return out;
    };
    const auto score_attribute = [&](std::size_t col, std::optional<double>& pcc_out, std::optional<double>& ccc_out) {
      if (n < 2) return;
      const auto truth = column(data.targets, col);
      const auto pred = column(trace.regression, col);
      std::vector<double> clamped(pred);
      for (double& v : clamped) v = std::clamp(v, 0.0, 1.0);
      ccc_out = metrics::ccc({truth, clamped});
      try {
        pcc_out = metrics::pcc({truth, clamped});
      } catch (const DomainError&) {
        pcc_out.reset();
      }
    };
    if (ts.hue) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double truth = circular::components_to_hue(data.targets(i, kSinDim), data.targets(i, kCosDim));
        try {
          total += circular::angular_error(
              truth, circular::components_to_hue(trace.regression(i, kSinDim), trace.regression(i, kCosDim)));
        } catch (const UndefinedAngleError&) {
          total += 180.0;
        }
      }
      scores.hue_ae = total / static_cast<double>(n);
    }
    if (ts.saturation) score_attribute(kSatDim, scores.sat_pcc, scores.sat_ccc);
    if (ts.value) score_attribute(kValDim, scores.val_pcc, scores.val_ccc);
  }
  if (classification) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = trace.logits.row(i);
      const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      correct += best == data.labels[i] ? 1 : 0;
    }
    scores.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return scores;
}

TrainResult train(const Dataset& training, const Dataset* validation, const TrainConfig& config) {
  return run_training(training, validation, config, &multitask_gradients);
}

TrainResult train_classifier_only(const Dataset& training, const Dataset* validation, const TrainConfig& config) {
  TrainConfig classification = config;
  classification.alpha = 1.0;
  return run_training(training, validation, classification, &classifier_gradients);
}

std::vector<ColorPrediction> predict_colors(const MlpParams& params, const Matrix& features) {
  const ForwardOutput out = forward(params, features);
  std::vector<ColorPrediction> predictions;
  predictions.reserve(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    ColorPrediction p;
    for (std::size_t k = 0; k < kRegressionOutputs; ++k) p.raw[k] = out.regression(i, k);
    try {
      p.hue_deg = circular::components_to_hue(p.raw[kSinDim], p.raw[kCosDim]);
    } catch (const UndefinedAngleError&) {
      p.hue_deg.reset();
    }
    p.saturation = std::clamp(p.raw[kSatDim], 0.0, 1.0);
    p.value = std::clamp(p.raw[kValDim], 0.0, 1.0);
    const auto row = out.logits.row(i);
    p.emotion = emotion_from_index(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    predictions.push_back(p);
  }
  return predictions;
}

// Persistence -----------------------------------------------------------------------

nlohmann::json to_json(const MlpParams& params) {
  nlohmann::json trunk = nlohmann::json::array();
  for (const auto& l : params.trunk) trunk.push_back(layer_to_json(l));
  return {{"format", "colorser-mlp"},
          {"version", kFormatVersion},
          {"seed", params.seed},
          {"trunk", trunk},
          {"regression_head", {layer_to_json(params.regression_head[0]), layer_to_json(params.regression_head[1])}},
          {"classification_head", layer_to_json(params.classification_head)}};
}

MlpParams mlp_params_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "colorser-mlp") throw ValidationError("not an MLP checkpoint");
    if (j.at("version").get<int>() != kFormatVersion) throw ValidationError("unsupported MLP checkpoint version");
    MlpParams p;
    p.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& l : j.at("trunk")) p.trunk.push_back(layer_from_json(l));
    const auto& head = j.at("regression_head");
    if (head.size() != 2) throw ValidationError("regression head must have two layers");
    p.regression_head = {layer_from_json(head[0]), layer_from_json(head[1])};
    p.classification_head = layer_from_json(j.at("classification_head"));
    if (p.trunk.empty()) throw ValidationError("checkpoint has no trunk layers");
    for (std::size_t i = 1; i < p.trunk.size(); ++i) {
      if (p.trunk[i].in != p.trunk[i - 1].out) throw ValidationError("trunk layer sizes do not compose");
    }
    const std::size_t shared = p.trunk.back().out;
    if (p.regression_head[0].in != shared || p.regression_head[1].in != p.regression_head[0].out ||
        p.regression_head[1].out != kRegressionOutputs || p.classification_head.in != shared ||
        p.classification_head.out != kEmotionCount) {
      throw ValidationError("head layer sizes do not compose");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("MLP checkpoint JSON: ") + e.what());
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"alpha", c.alpha},
          {"weight_decay", c.weight_decay},
          {"targets",
           {{"hue", c.target_set.hue}, {"saturation", c.target_set.saturation}, {"value", c.target_set.value}}},
          {"seed", c.seed},
          {"trunk", c.trunk},
          {"regression_hidden", c.regression_hidden}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults) {
  try {
    TrainConfig c = defaults;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.alpha = j.value("alpha", c.alpha);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.trunk = j.value("trunk", c.trunk);
    c.regression_hidden = j.value("regression_hidden", c.regression_hidden);
    if (j.contains("targets")) {
      const auto& t = j["targets"];
      c.target_set = {t.value("hue", true), t.value("saturation", true), t.value("value", true)};
    }
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("training config JSON: ") + e.what());
  }
}

}  // namespace colorser::neural
