#include "colorser/experiment.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/text_io.hpp"

namespace colorser::experiment {
namespace {

using nlohmann::json;

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json scores_json(const std::optional<RegressionScores>& s) {
  if (!s) return nullptr;
  return {{"hue_ae", optional_json(s->hue_ae)},   {"sat_pcc", optional_json(s->sat_pcc)},
          {"sat_ccc", optional_json(s->sat_ccc)}, {"val_pcc", optional_json(s->val_pcc)},
          {"val_ccc", optional_json(s->val_ccc)}, {"hue_undefined", s->hue_undefined}};
}

json confusion_json(const std::optional<metrics::ConfusionMatrix>& m) {
  if (!m) return nullptr;
  json labels = json::array();
  for (Emotion e : kAllEmotions) labels.push_back(std::string(to_string(e)));
  json counts = json::array();
  for (const auto& row : *m) counts.push_back(std::vector<std::size_t>(row.begin(), row.end()));
  return {{"labels", labels}, {"counts", counts}};
}

json prediction_json(const UtterancePrediction& p) {
  json j{{"utterance_id", p.utterance_id},
         {"speaker_id", p.speaker_id},
         {"emotion", std::string(to_string(p.emotion))},
         {"truth", {{"hue_deg", p.truth.hue_deg}, {"saturation", p.truth.saturation}, {"value", p.truth.value}}}};
  if (p.has_regression) {
    j["prediction"] = {{"hue_deg", optional_json(p.hue_deg)}, {"saturation", p.saturation}, {"value", p.value}};
  } else {
    j["prediction"] = nullptr;
  }
  j["predicted_emotion"] = p.predicted_emotion ? json(std::string(to_string(*p.predicted_emotion))) : json(nullptr);
  return j;
}

// Joined per-utterance inputs.
struct Corpus {
  FeatureSet features{FeatureKind::utterance_level, 1};
  std::unordered_map<std::string, const AggregatedLabel*> labels;
  std::unordered_map<std::string, const UtteranceMeta*> metas;
};

Corpus join(const FeatureSet& features, std::span<const AggregatedLabel> labels, std::span<const UtteranceMeta> metas) {
  Corpus c;
  c.features = features.kind() == FeatureKind::frame_level ? features.pooled() : features;
  for (const auto& l : labels) c.labels.emplace(l.utterance_id, &l);
  std::vector<std::string> missing;
  for (const auto& m : metas) {
    c.metas.emplace(m.utterance_id, &m);
    const bool has_features = c.features.contains(m.utterance_id);
    const bool has_label = c.labels.count(m.utterance_id) != 0;
    if (!has_features || !has_label) {
      missing.push_back(m.utterance_id + (has_features ? "" : " (features)") + (has_label ? "" : " (labels)"));
    }
  }
  if (!missing.empty()) {
    std::string message = "missing feature/label join for " + std::to_string(missing.size()) + " utterance(s):";
    for (const auto& id : missing) message += " " + id;
    throw ValidationError(message);
  }
  return c;
}

struct FoldData {
  Matrix train_x, val_x, test_x;
  neural::Dataset train, val;
  std::vector<double> train_hue, train_sat, train_val;
  std::vector<double> val_hue, val_sat, val_val;
};

void fill_targets(const Corpus& c, std::span<const std::string> ids, neural::Dataset& data, std::vector<double>& hue,
                  std::vector<double>& sat, std::vector<double>& val) {
  data.targets = Matrix(ids.size(), neural::kRegressionOutputs);
  data.labels.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const AggregatedLabel& l = *c.labels.at(ids[i]);
    const auto t = neural::regression_target(l.label);
    std::copy(t.begin(), t.end(), data.targets.row(i).begin());
    data.labels.push_back(static_cast<int>(index_of(c.metas.at(ids[i])->emotion)));
    hue.push_back(l.label.hue_deg);
    sat.push_back(l.label.saturation);
    val.push_back(l.label.value);
  }
}

FoldData prepare_fold(const Corpus& c, const FoldSpec& fold, bool standardize) {
  FoldData d;
  d.train_x = c.features.gather(fold.train_ids);
  d.val_x = c.features.gather(fold.val_ids);
  d.test_x = c.features.gather(fold.test_ids);
  if (standardize) {
    const auto scaler = svr::FeatureScaler::fit(d.train_x);
    d.train_x = scaler.apply(d.train_x);
    d.val_x = scaler.apply(d.val_x);
    d.test_x = scaler.apply(d.test_x);
  }
  d.train.features = d.train_x;
  d.val.features = d.val_x;
  fill_targets(c, fold.train_ids, d.train, d.train_hue, d.train_sat, d.train_val);
  fill_targets(c, fold.val_ids, d.val, d.val_hue, d.val_sat, d.val_val);
  return d;
}

std::vector<UtterancePrediction> blank_predictions(const Corpus& c, const FoldSpec& fold) {
  std::vector<UtterancePrediction> out;
  for (const auto& id : fold.test_ids) {
    const UtteranceMeta& m = *c.metas.at(id);
    out.push_back({id, m.speaker_id, m.emotion, c.labels.at(id)->label, false, std::nullopt, 0.0, 0.0, std::nullopt});
  }
  return out;
}

FoldResult score_fold(const FoldSpec& fold, std::span<const UtterancePrediction> predictions, nlohmann::json selection) {
  FoldResult r;
  r.held_out_speaker = fold.held_out_speaker;
  r.n_test = predictions.size();
  r.selection = std::move(selection);
  if (!predictions.empty() && predictions.front().has_regression) r.scores = score_regression(predictions);
  if (!predictions.empty() && predictions.front().predicted_emotion) {
    std::vector<Emotion> truth, pred;
    for (const auto& p : predictions) {
      truth.push_back(p.emotion);
      pred.push_back(*p.predicted_emotion);
    }
    r.accuracy = metrics::accuracy(truth, pred);
    r.confusion = metrics::confusion(truth, pred);
  }
  return r;
}

svr::SvrGrid resolve_grid(const ExperimentConfig& config, std::size_t dimension) {
  const svr::SvrGrid defaults = svr::default_grid(dimension);
  svr::SvrGrid g = config.grid;
  if (g.c.empty()) g.c = defaults.c;
  if (g.epsilon.empty()) g.epsilon = defaults.epsilon;
  if (g.gamma.empty()) {
    if (config.gamma_scale.empty()) {
      g.gamma = defaults.gamma;
    } else {
      for (double s : config.gamma_scale) g.gamma.push_back(s / static_cast<double>(dimension));
    }
  }
  return g;
}

json grid_choice(const svr::SvrConfig& best, double score) {
  return {{"c", best.c}, {"epsilon", best.epsilon}, {"gamma", best.gamma}, {"validation_score", score}};
}

void apply_dnn(std::vector<UtterancePrediction>& preds, const std::vector<neural::ColorPrediction>& out,
               const neural::TargetSet& targets, bool regression, bool classification) {
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (regression) {
      preds[i].has_regression = true;
      if (targets.hue) preds[i].hue_deg = out[i].hue_deg;
      if (targets.saturation) preds[i].saturation = out[i].saturation;
      if (targets.value) preds[i].value = out[i].value;
    }
    if (classification) preds[i].predicted_emotion = out[i].emotion;
  }
}

template <typename Get>
std::optional<double> mean_defined(const std::vector<FoldResult>& folds, Get get) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& f : folds) {
    if (const std::optional<double> v = get(f)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

RunReport start_report(std::string name, const ExperimentConfig& config, const std::vector<FoldSpec>& folds) {
  RunReport report;
  report.experiment = std::move(name);
  report.config = to_json(config);
  for (const auto& f : folds) report.fold_speakers.push_back(f.held_out_speaker);
  return report;
}

}  // namespace

std::vector<FoldSpec> make_loso_folds(std::span<const UtteranceMeta> metas) {
  std::set<std::string> speakers;
  std::map<std::string, std::size_t> phrase_free_count;
  bool any_regular = false, any_free = false;
  for (const auto& m : metas) {
    speakers.insert(m.speaker_id);
    if (m.session == Session::phrase_free) {
      ++phrase_free_count[m.speaker_id];
      any_free = true;
    } else {
      any_regular = true;
    }
  }
  if (speakers.size() < 2) throw ValidationError("make_loso_folds: need at least 2 speakers");
  if (!any_regular || !any_free) throw ValidationError("make_loso_folds: both regular and phrase_free sessions are required");
  for (const auto& s : speakers) {
    if (phrase_free_count[s] == 0) {
      throw ValidationError("make_loso_folds: speaker '" + s + "' has no phrase_free utterances to test on");
    }
  }
  std::vector<FoldSpec> folds;
  for (const auto& held_out : speakers) {
    FoldSpec f;
    f.held_out_speaker = held_out;
    for (const auto& m : metas) {
      if (m.speaker_id == held_out) {
        if (m.session == Session::phrase_free) f.test_ids.push_back(m.utterance_id);
      } else if (m.session == Session::regular) {
        f.train_ids.push_back(m.utterance_id);
      } else {
        f.val_ids.push_back(m.utterance_id);
      }
    }
    if (f.train_ids.empty()) {
      throw ValidationError("make_loso_folds: fold '" + held_out + "' has no regular-session training utterances");
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

RegressionScores score_regression(std::span<const UtterancePrediction> predictions) {
  RegressionScores s;
  if (predictions.empty()) return s;
  std::vector<double> sat_t, sat_p, val_t, val_p;
  double ae = 0.0;
  for (const auto& p : predictions) {
    if (p.hue_deg) {
      ae += circular::angular_error(p.truth.hue_deg, *p.hue_deg);
    } else {
      ae += 180.0;
      ++s.hue_undefined;
    }
    sat_t.push_back(p.truth.saturation);
    sat_p.push_back(p.saturation);
    val_t.push_back(p.truth.value);
    val_p.push_back(p.value);
  }
  s.hue_ae = ae / static_cast<double>(predictions.size());
  if (predictions.size() >= 2) {
    s.sat_ccc = metrics::ccc({sat_t, sat_p});
    s.val_ccc = metrics::ccc({val_t, val_p});
    try {
      s.sat_pcc = metrics::pcc({sat_t, sat_p});
    } catch (const DomainError&) {
    }
    try {
      s.val_pcc = metrics::pcc({val_t, val_p});
    } catch (const DomainError&) {
    }
  }
  return s;
}

void finalize_setting(SettingResult& setting) {
  if (setting.predictions.empty()) return;
  if (setting.predictions.front().has_regression) {
    setting.pooled = score_regression(setting.predictions);
    RegressionScores mean;
    const auto& f = setting.folds;
    mean.hue_ae = mean_defined(f, [](const FoldResult& r) { return r.scores ? r.scores->hue_ae : std::nullopt; });
    mean.sat_pcc = mean_defined(f, [](const FoldResult& r) { return r.scores ? r.scores->sat_pcc : std::nullopt; });
    mean.sat_ccc = mean_defined(f, [](const FoldResult& r) { return r.scores ? r.scores->sat_ccc : std::nullopt; });
    mean.val_pcc = mean_defined(f, [](const FoldResult& r) { return r.scores ? r.scores->val_pcc : std::nullopt; });
    mean.val_ccc = mean_defined(f, [](const FoldResult& r) { return r.scores ? r.scores->val_ccc : std::nullopt; });
    for (const auto& r : f) mean.hue_undefined += r.scores ? r.scores->hue_undefined : 0;
    setting.fold_mean = mean;
  }
  if (setting.predictions.front().predicted_emotion) {
    std::vector<Emotion> truth, pred;
    for (const auto& p : setting.predictions) {
      truth.push_back(p.emotion);
      pred.push_back(*p.predicted_emotion);
    }
    setting.pooled_accuracy = metrics::accuracy(truth, pred);
    setting.pooled_confusion = metrics::confusion(truth, pred);
    setting.fold_mean_accuracy = mean_defined(setting.folds, [](const FoldResult& r) { return r.accuracy; });
  }
}

RunReport run_experiment1(const FeatureSet& features, std::span<const AggregatedLabel> labels,
                          std::span<const UtteranceMeta> metas, const ExperimentConfig& config) {
  const Corpus corpus = join(features, labels, metas);
  const auto folds = make_loso_folds(metas);
  const svr::SvrGrid grid = resolve_grid(config, corpus.features.dimension());
  RunReport report = start_report("experiment1", config, folds);

  SettingResult svr_row;
  svr_row.name = "SVR (" + config.feature_name + ")";
  SettingResult individual;
  individual.name = "DNN individual training";
  SettingResult joint;
  joint.name = "DNN joint training";

  for (std::size_t k = 0; k < folds.size(); ++k) {
    const FoldSpec& fold = folds[k];
    const FoldData d = prepare_fold(corpus, fold, config.standardize);

    // SVR: one grid search per attribute, hue through the sin/cos pair.
    {
      auto preds = blank_predictions(corpus, fold);
      const auto hue = svr::grid_search_hue(d.train_x, d.train_hue, d.val_x, d.val_hue, grid, config.svr_base);
      const auto sat = svr::grid_search(d.train_x, d.train_sat, d.val_x, d.val_sat, grid, config.svr_base);
      const auto val = svr::grid_search(d.train_x, d.train_val, d.val_x, d.val_val, grid, config.svr_base);
      const auto hue_pred = svr::predict_hue(hue.model, d.test_x);
      const auto sat_pred = svr::predict_svr(sat.model, d.test_x);
      const auto val_pred = svr::predict_svr(val.model, d.test_x);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        preds[i].has_regression = true;
        preds[i].hue_deg = hue_pred[i];
        preds[i].saturation = std::clamp(sat_pred[i], 0.0, 1.0);
        preds[i].value = std::clamp(val_pred[i], 0.0, 1.0);
      }
      json selection{{"hue", grid_choice(hue.best, hue.best_score)},
                     {"saturation", grid_choice(sat.best, sat.best_score)},
                     {"value", grid_choice(val.best, val.best_score)}};
      svr_row.folds.push_back(score_fold(fold, preds, std::move(selection)));
      svr_row.predictions.insert(svr_row.predictions.end(), preds.begin(), preds.end());
    }

    neural::TrainConfig dnn = config.dnn;
    dnn.alpha = 0.0;
    dnn.seed = config.dnn.seed + k;

    // DNN, one network per attribute.
    {
      auto preds = blank_predictions(corpus, fold);
      json selection = json::object();
      const std::pair<const char*, neural::TargetSet> runs[] = {{"hue", neural::TargetSet::only_hue()},
                                                                 {"saturation", neural::TargetSet::only_saturation()},
                                                                 {"value", neural::TargetSet::only_value()}};
      for (const auto& [name, targets] : runs) {
        neural::TrainConfig c = dnn;
        c.target_set = targets;
        const auto result = neural::train(d.train, &d.val, c);
        apply_dnn(preds, neural::predict_colors(result.params, d.test_x), targets, true, false);
        selection[name] = {{"best_epoch", result.best_epoch}};
      }
      individual.folds.push_back(score_fold(fold, preds, std::move(selection)));
      individual.predictions.insert(individual.predictions.end(), preds.begin(), preds.end());
    }

    // DNN, all attributes jointly.
    {
      auto preds = blank_predictions(corpus, fold);
      neural::TrainConfig c = dnn;
      c.target_set = neural::TargetSet::all();
      const auto result = neural::train(d.train, &d.val, c);
      apply_dnn(preds, neural::predict_colors(result.params, d.test_x), c.target_set, true, false);
      joint.folds.push_back(score_fold(fold, preds, {{"best_epoch", result.best_epoch}}));
      joint.predictions.insert(joint.predictions.end(), preds.begin(), preds.end());
    }
  }
  for (SettingResult* s : {&svr_row, &individual, &joint}) {
    finalize_setting(*s);
    report.settings.push_back(std::move(*s));
  }
  return report;
}

RunReport run_experiment2(const FeatureSet& features, std::span<const AggregatedLabel> labels,
                          std::span<const UtteranceMeta> metas, std::span<const double> alphas,
                          const ExperimentConfig& config) {
  if (alphas.empty()) throw ValidationError("run_experiment2: no alpha values");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("run_experiment2: alpha must lie in [0, 1]");
  }
  const Corpus corpus = join(features, labels, metas);
  const auto folds = make_loso_folds(metas);
  RunReport report = start_report("experiment2", config, folds);
  report.config["alphas"] = std::vector<double>(alphas.begin(), alphas.end());

  std::vector<FoldData> fold_data;
  for (const auto& fold : folds) fold_data.push_back(prepare_fold(corpus, fold, config.standardize));

  for (double alpha : alphas) {
    SettingResult setting;
    setting.name = "alpha=" + text::format_table(alpha);
    setting.alpha = alpha;
    for (std::size_t k = 0; k < folds.size(); ++k) {
      neural::TrainConfig c = config.dnn;
      c.alpha = alpha;
      c.target_set = neural::TargetSet::all();
      c.seed = config.dnn.seed + k;
      const auto result = neural::train(fold_data[k].train, &fold_data[k].val, c);
      auto preds = blank_predictions(corpus, folds[k]);
      apply_dnn(preds, neural::predict_colors(result.params, fold_data[k].test_x), c.target_set, alpha < 1.0,
                alpha > 0.0);
      setting.folds.push_back(score_fold(folds[k], preds, {{"best_epoch", result.best_epoch}}));
      setting.predictions.insert(setting.predictions.end(), preds.begin(), preds.end());
    }
    finalize_setting(setting);
    report.settings.push_back(std::move(setting));
  }
  return report;
}

json to_json(const ExperimentConfig& c) {
  return {{"feature_name", c.feature_name},
          {"standardize", c.standardize},
          {"svr",
           {{"grid", {{"c", c.grid.c}, {"epsilon", c.grid.epsilon}, {"gamma", c.grid.gamma}}},
            {"gamma_scale", c.gamma_scale},
            {"tolerance", c.svr_base.tolerance},
            {"max_passes", c.svr_base.max_passes}}},
          {"dnn", neural::to_json(c.dnn)}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.feature_name = j.value("feature_name", c.feature_name);
    c.standardize = j.value("standardize", c.standardize);
    if (j.contains("svr")) {
      const auto& s = j["svr"];
      if (s.contains("grid")) {
        const auto& g = s["grid"];
        c.grid.c = g.value("c", std::vector<double>{});
        c.grid.epsilon = g.value("epsilon", std::vector<double>{});
        c.grid.gamma = g.value("gamma", std::vector<double>{});
      }
      c.gamma_scale = s.value("gamma_scale", std::vector<double>{});
      c.svr_base.tolerance = s.value("tolerance", c.svr_base.tolerance);
      c.svr_base.max_passes = s.value("max_passes", c.svr_base.max_passes);
    }
    if (j.contains("dnn")) c.dnn = neural::train_config_from_json(j["dnn"], c.dnn);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config JSON: ") + e.what());
  }
}

json to_json(const RunReport& report) {
  json settings = json::array();
  for (const auto& s : report.settings) {
    json folds = json::array();
    for (const auto& f : s.folds) {
      folds.push_back({{"held_out_speaker", f.held_out_speaker},
                       {"n_test", f.n_test},
                       {"scores", scores_json(f.scores)},
                       {"accuracy", optional_json(f.accuracy)},
                       {"confusion", confusion_json(f.confusion)},
                       {"selection", f.selection}});
    }
    json predictions = json::array();
    for (const auto& p : s.predictions) predictions.push_back(prediction_json(p));
    settings.push_back({{"name", s.name},
                        {"alpha", optional_json(s.alpha)},
                        {"pooled", scores_json(s.pooled)},
                        {"fold_mean", scores_json(s.fold_mean)},
                        {"pooled_accuracy", optional_json(s.pooled_accuracy)},
                        {"fold_mean_accuracy", optional_json(s.fold_mean_accuracy)},
                        {"pooled_confusion", confusion_json(s.pooled_confusion)},
                        {"folds", folds},
                        {"predictions", predictions}});
  }
  return {{"experiment", report.experiment},
          {"protocol", std::string(kProtocol)},
          {"aggregation", std::string(kAggregationNote)},
          {"config", report.config},
          {"fold_speakers", report.fold_speakers},
          {"settings", settings}};
}

}  // namespace colorser::experiment
