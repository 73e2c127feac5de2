// colorser command-line entry point.

#include <atomic>
#include <csignal>
#include <map>
#include <set>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "colorser/annotation_service.hpp"
#include "colorser/error.hpp"
#include "colorser/experiment.hpp"
#include "colorser/features.hpp"
#include "colorser/labels.hpp"
#include "colorser/neural.hpp"
#include "colorser/reports.hpp"
#include "colorser/svr.hpp"
#include "colorser/synthetic.hpp"
#include "colorser/text_io.hpp"

namespace {

using namespace colorser;
using nlohmann::json;

struct Common {
  std::string manifest;
  std::string features;
  std::string labels;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string feature_kind = "utterance";
};

json load_json(const std::string& path) {
  const std::string body = text::read_file(path);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

FeatureKind kind_of(const std::string& name) {
  if (name == "utterance") return FeatureKind::utterance_level;
  if (name == "frame") return FeatureKind::frame_level;
  throw ValidationError("--feature-kind must be 'utterance' or 'frame'");
}

FeatureSet load_pooled(const Common& c) {
  FeatureSet f = load_features(c.features, kind_of(c.feature_kind));
  return f.kind() == FeatureKind::frame_level ? f.pooled() : f;
}

std::vector<UtteranceMeta> load_manifest(const std::string& path) { return parse_manifest(text::read_file(path)); }
std::vector<AggregatedLabel> load_labels(const std::string& path) {
  return parse_aggregated_labels(text::read_file(path));
}

experiment::ExperimentConfig load_experiment_config(const Common& c) {
  experiment::ExperimentConfig config;
  if (!c.config.empty()) config = experiment::experiment_config_from_json(load_json(c.config));
  if (c.seed) config.dnn.seed = *c.seed;
  return config;
}

void write_or_print(const std::string& out, const std::string& body) {
  if (out.empty() || out == "-") {
    std::cout << body;
  } else {
    text::write_file(out, body);
  }
}

// Ids present in both the features and the labels, in feature order.
std::vector<std::string> labeled_ids(const FeatureSet& features, const std::vector<AggregatedLabel>& labels) {
  std::set<std::string> have;
  for (const auto& l : labels) have.insert(l.utterance_id);
  std::vector<std::string> ids;
  for (const auto& id : features.ids()) {
    if (have.count(id)) ids.push_back(id);
  }
  if (ids.empty()) throw ValidationError("no utterance has both features and a label");
  return ids;
}

void add_common(CLI::App* cmd, Common& c, bool manifest, bool features, bool labels) {
  if (manifest) cmd->add_option("--manifest", c.manifest, "Utterance manifest CSV")->required();
  if (features) {
    cmd->add_option("--features", c.features, "Feature CSV")->required();
    cmd->add_option("--feature-kind", c.feature_kind, "utterance or frame");
  }
  if (labels) cmd->add_option("--labels", c.labels, "Aggregated labels CSV")->required();
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "PRNG seed");
}

int run_aggregate(const std::string& annotations, const Common& c, std::size_t quorum) {
  const auto records = parse_annotations(text::read_file(annotations));
  if (!c.manifest.empty()) {
    std::set<std::string> known;
    for (const auto& m : load_manifest(c.manifest)) known.insert(m.utterance_id);
    for (const auto& r : records) {
      if (!known.count(r.utterance_id)) throw ValidationError("annotation for unknown utterance '" + r.utterance_id + "'");
    }
  }
  std::vector<std::string> warnings;
  const auto labels = aggregate_all(records, {quorum}, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  write_or_print(c.out, serialize_aggregated_labels(labels));
  return 0;
}

int run_stats(const Common& c) {
  const auto metas = load_manifest(c.manifest);
  const auto labels = load_labels(c.labels);
  std::cout << reports::dump(reports::stats_to_json(labels, metas));
  if (!c.out.empty()) reports::write_label_stats(labels, metas, c.out);
  return 0;
}

int run_train_svr(const Common& c, const std::string& attribute, std::optional<double> cost,
                  std::optional<double> epsilon, std::optional<double> gamma) {
  const FeatureSet features = load_pooled(c);
  const auto labels = load_labels(c.labels);
  const auto ids = labeled_ids(features, labels);
  std::map<std::string, ColorLabel> by_id;
  for (const auto& l : labels) by_id[l.utterance_id] = l.label;

  svr::SvrConfig config;
  config.gamma = 1.0 / static_cast<double>(features.dimension());
  if (!c.config.empty()) {
    const json j = load_json(c.config);
    const json s = j.value("svr", j);
    config.c = s.value("c", config.c);
    config.epsilon = s.value("epsilon", config.epsilon);
    config.gamma = s.value("gamma", config.gamma);
    config.tolerance = s.value("tolerance", config.tolerance);
    config.max_passes = s.value("max_passes", config.max_passes);
  }
  if (cost) config.c = *cost;
  if (epsilon) config.epsilon = *epsilon;
  if (gamma) config.gamma = *gamma;
  svr::validate(config);

  const Matrix raw = features.gather(ids);
  const svr::FeatureScaler scaler = svr::FeatureScaler::fit(raw);
  const Matrix x = scaler.apply(raw);
  std::vector<double> y;
  for (const auto& id : ids) {
    const ColorLabel& l = by_id.at(id);
    y.push_back(attribute == "hue" ? l.hue_deg : attribute == "saturation" ? l.saturation : l.value);
  }
  json model;
  bool converged = true;
  if (attribute == "hue") {
    svr::HueSvrPair pair = svr::train_hue_pair(x, y, config);
    pair.sin_model.scaler = scaler;
    pair.cos_model.scaler = scaler;
    converged = pair.sin_model.solver.converged && pair.cos_model.solver.converged;
    model = svr::to_json(pair);
  } else {
    svr::SvrModel m = svr::train_svr(x, y, config);
    m.scaler = scaler;
    converged = m.solver.converged;
    model = svr::to_json(m);
  }
  if (!converged) throw ConvergenceError("SVR solver did not reach tolerance within the iteration budget");
  write_or_print(c.out, reports::dump(model));
  return 0;
}

int run_train_dnn(const Common& c) {
  const FeatureSet features = load_pooled(c);
  const auto labels = load_labels(c.labels);
  const auto metas = load_manifest(c.manifest);
  neural::TrainConfig config;
  if (!c.config.empty()) {
    const json j = load_json(c.config);
    config = neural::train_config_from_json(j.value("dnn", j));
  }
  if (c.seed) config.seed = *c.seed;

  std::map<std::string, const UtteranceMeta*> meta_by_id;
  for (const auto& m : metas) meta_by_id[m.utterance_id] = &m;
  std::map<std::string, ColorLabel> label_by_id;
  for (const auto& l : labels) label_by_id[l.utterance_id] = l.label;
  std::vector<std::string> ids;
  for (const auto& id : labeled_ids(features, labels)) {
    if (meta_by_id.count(id)) ids.push_back(id);
  }
  if (ids.size() < 2) throw ValidationError("train-dnn needs at least 2 utterances present in manifest, features and labels");

  const Matrix raw = features.gather(ids);
  const svr::FeatureScaler scaler = svr::FeatureScaler::fit(raw);
  neural::Dataset data;
  data.features = scaler.apply(raw);
  data.targets = Matrix(ids.size(), neural::kRegressionOutputs);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto t = neural::regression_target(label_by_id.at(ids[i]));
    std::copy(t.begin(), t.end(), data.targets.row(i).begin());
    data.labels.push_back(static_cast<int>(index_of(meta_by_id.at(ids[i])->emotion)));
  }
  const auto result = neural::train(data, nullptr, config);
  json out{{"format", "colorser-dnn"},
           {"version", 1},
           {"config", neural::to_json(config)},
           {"scaler", {{"mean", scaler.mean}, {"scale", scaler.scale}}},
           {"params", neural::to_json(result.params)}};
  write_or_print(c.out, reports::dump(out));
  return 0;
}

int run_predict(const Common& c, const std::string& model_path) {
  const json model = load_json(model_path);
  const FeatureSet features = load_pooled(c);
  const Matrix x = features.gather(features.ids());
  const std::string format = model.value("format", "");
  std::string out = "utterance_id,hue_deg,saturation,value,emotion\n";
  const auto& ids = features.ids();
  if (format == "colorser-dnn") {
    svr::FeatureScaler scaler{model.at("scaler").at("mean").get<std::vector<double>>(),
                              model.at("scaler").at("scale").get<std::vector<double>>()};
    const auto params = neural::mlp_params_from_json(model.at("params"));
    const auto preds = neural::predict_colors(params, scaler.empty() ? x : scaler.apply(x));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& p = preds[i];
      out += ids[i] + "," + (p.hue_deg ? text::format_full(*p.hue_deg) : "-") + "," + text::format_full(p.saturation) +
             "," + text::format_full(p.value) + "," + std::string(to_string(p.emotion)) + "\n";
    }
  } else if (format == "colorser-svr-hue-pair") {
    const auto pair = svr::hue_pair_from_json(model);
    const auto hues = svr::predict_hue(pair, x);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out += ids[i] + "," + (hues[i] ? text::format_full(*hues[i]) : "-") + ",-,-,-\n";
    }
  } else if (format == "colorser-svr") {
    const auto m = svr::svr_model_from_json(model);
    const auto values = svr::predict_svr(m, x);
    out = "utterance_id,prediction\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + "," + text::format_full(values[i]) + "\n";
  } else {
    throw ValidationError(model_path + ": unrecognized model format '" + format + "'");
  }
  write_or_print(c.out, out);
  return 0;
}

int run_experiment(const Common& c, bool second, const std::vector<double>& alphas) {
  const FeatureSet features = load_features(c.features, kind_of(c.feature_kind));
  const auto labels = load_labels(c.labels);
  const auto metas = load_manifest(c.manifest);
  const auto config = load_experiment_config(c);
  const auto report = second ? experiment::run_experiment2(features, labels, metas, alphas, config)
                             : experiment::run_experiment1(features, labels, metas, config);
  const auto written = reports::emit_reports(report, labels, metas, c.out);
  std::cout << reports::metrics_csv(report);
  std::cerr << "wrote " << written.size() << " files to " << c.out << "\n";
  return 0;
}

int run_synth(const Common& c, synthetic::Options options) {
  if (c.seed) options.seed = *c.seed;
  const auto bench = synthetic::make_benchmark(options);
  const std::filesystem::path dir = c.out;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());
  text::write_file(dir / "manifest.csv", serialize_manifest(bench.metas));
  text::write_file(dir / "features.csv", serialize_features(bench.features));
  text::write_file(dir / "annotations.jsonl", serialize_annotations(bench.annotations));
  text::write_file(dir / "labels.csv", serialize_aggregated_labels(bench.labels));
  // Settings that train to convergence on a corpus this small.
  experiment::ExperimentConfig config;
  config.feature_name = "synthetic";
  config.dnn.learning_rate = 3e-3;
  config.dnn.epochs = 80;
  config.dnn.seed = options.seed;
  text::write_file(dir / "config.json", reports::dump(experiment::to_json(config)));
  return 0;
}

std::atomic<annotation::Server*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int run_serve(const Common& c, const std::string& store_path, annotation::ServerOptions options, std::size_t quorum) {
  annotation::StoreOptions store_options;
  store_options.quorum = quorum;
  if (c.seed) store_options.seed = *c.seed;
  annotation::AnnotationStore store(load_manifest(c.manifest), store_path, store_options);
  annotation::Server server(store, options);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on http://" << options.host << ":" << port << "\n";
  server.run();
  g_server = nullptr;
  return 0;
}

int run_export(const std::string& store_path, const std::string& out) {
  const std::string body = text::read_file(store_path);
  const std::size_t end = body.rfind('\n');
  const auto records = parse_annotations(end == std::string::npos ? std::string_view{} : std::string_view(body).substr(0, end + 1));
  write_or_print(out, serialize_annotations(records));
  return 0;
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : text::split_csv_line(text)) out.push_back(text::parse_double(field, "--alphas"));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-to-color regression, classification and annotation tooling"};
  app.require_subcommand(1);
  Common c;

  std::string annotations;
  std::size_t quorum = 10;
  auto* aggregate = app.add_subcommand("aggregate", "Annotations JSONL -> aggregated labels CSV");
  aggregate->add_option("annotations", annotations, "Annotations JSONL")->required();
  aggregate->add_option("--manifest", c.manifest, "Reject annotations for utterances not in this manifest");
  aggregate->add_option("--quorum", quorum, "Expected annotations per utterance (warn below)");
  aggregate->add_option("--out", c.out, "Output CSV (default stdout)");
  aggregate->add_option("--seed", c.seed, "Unused; accepted for symmetry");

  auto* stats = app.add_subcommand("stats", "Agreement and per-emotion label statistics");
  add_common(stats, c, true, false, true);
  stats->add_option("--out", c.out, "Also write histogram and S/V tables to this directory");

  std::string attribute = "hue";
  std::optional<double> cost, epsilon, gamma;
  auto* train_svr = app.add_subcommand("train-svr", "Train one SVR (or the hue sin/cos pair) on all labeled rows");
  add_common(train_svr, c, false, true, true);
  train_svr->add_option("--attribute", attribute, "hue, saturation or value")
      ->check(CLI::IsMember({"hue", "saturation", "value"}));
  train_svr->add_option("--c", cost, "Box constraint");
  train_svr->add_option("--epsilon", epsilon, "Tube width");
  train_svr->add_option("--gamma", gamma, "RBF width (default 1/D)");
  train_svr->add_option("--out", c.out, "Model JSON (default stdout)");

  auto* train_dnn = app.add_subcommand("train-dnn", "Train the multitask network on all labeled rows");
  add_common(train_dnn, c, true, true, true);
  train_dnn->add_option("--out", c.out, "Model JSON (default stdout)");

  std::string model_path;
  auto* predict = app.add_subcommand("predict", "Apply a saved model to a feature file");
  predict->add_option("--model", model_path, "Model JSON")->required();
  predict->add_option("--features", c.features, "Feature CSV")->required();
  predict->add_option("--feature-kind", c.feature_kind, "utterance or frame");
  predict->add_option("--out", c.out, "Predictions CSV (default stdout)");

  auto* exp1 = app.add_subcommand("exp1", "Leave-one-speaker-out SVR vs DNN color regression");
  add_common(exp1, c, true, true, true);
  exp1->add_option("--out", c.out, "Report directory")->required();

  std::string alphas = "0.6,0.7,0.8,0.9,1.0";
  auto* exp2 = app.add_subcommand("exp2", "Leave-one-speaker-out multitask alpha sweep");
  add_common(exp2, c, true, true, true);
  exp2->add_option("--out", c.out, "Report directory")->required();
  exp2->add_option("--alphas", alphas, "Comma-separated alpha values");

  synthetic::Options synth_options;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic benchmark");
  synth->add_option("--out", c.out, "Output directory")->required();
  synth->add_option("--seed", c.seed, "PRNG seed");
  synth->add_option("--speakers", synth_options.speakers, "Number of speakers");
  synth->add_option("--per-cell", synth_options.utterances_per_cell, "Utterances per speaker x session x emotion");
  synth->add_option("--dimension", synth_options.dimension, "Feature dimension");
  synth->add_option("--noise", synth_options.noise, "Feature noise level");
  synth->add_option("--annotators", synth_options.annotators, "Simulated annotators per utterance");
  synth->add_option("--speaker-shift", synth_options.speaker_shift, "Per-speaker feature offset scale");

  std::string store_path = "annotations.jsonl";
  annotation::ServerOptions server_options;
  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve->add_option("--manifest", c.manifest, "Utterance manifest CSV")->required()->envname("COLORSER_MANIFEST");
  serve->add_option("--store", store_path, "Append-only annotation store")->envname("COLORSER_STORE");
  serve->add_option("--audio-root", server_options.audio_root, "Directory audio paths resolve against")
      ->envname("COLORSER_AUDIO_ROOT");
  serve->add_option("--ui-dir", server_options.ui_dir, "Static UI bundle served at /")->envname("COLORSER_UI_DIR");
  serve->add_option("--host", server_options.host, "Bind address")->envname("COLORSER_HOST");
  serve->add_option("--port", server_options.port, "Port (0 picks a free one)")->envname("COLORSER_PORT");
  serve->add_option("--quorum", quorum, "Annotations per utterance")->envname("COLORSER_QUORUM");
  serve->add_option("--seed", c.seed, "Task assignment seed")->envname("COLORSER_SEED");

  auto* export_cmd = app.add_subcommand("export", "Dump the annotation store as JSON Lines");
  export_cmd->add_option("--store", store_path, "Annotation store")->required();
  export_cmd->add_option("--out", c.out, "Output file (default stdout)");

  auto* fixture = app.add_subcommand("hsv-fixture", "Write the tile HSV -> hex conformance fixture");
  fixture->add_option("--out", c.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*aggregate) return run_aggregate(annotations, c, quorum);
    if (*stats) return run_stats(c);
    if (*train_svr) return run_train_svr(c, attribute, cost, epsilon, gamma);
    if (*train_dnn) return run_train_dnn(c);
    if (*predict) return run_predict(c, model_path);
    if (*exp1) return run_experiment(c, false, {});
    if (*exp2) return run_experiment(c, true, parse_alphas(alphas));
    if (*synth) return run_synth(c, synth_options);
    if (*serve) return run_serve(c, store_path, server_options, quorum);
    if (*export_cmd) return run_export(store_path, c.out);
    if (*fixture) {
      write_or_print(c.out, annotation::tile_fixture_csv());
      return 0;
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
