#include "colorser/reports.hpp"

#include <system_error>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/text_io.hpp"

namespace colorser::reports {
namespace {

using nlohmann::json;
using experiment::RegressionScores;
using experiment::RunReport;
using experiment::UtterancePrediction;

constexpr std::string_view kEmpty = "-";

std::string cell(const std::optional<double>& v) { return v ? text::format_table(*v) : std::string(kEmpty); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const DistributionSummary& s) {
  return {{"n", s.n},           {"min", s.min}, {"q1", s.q1},    {"median", s.median},
          {"q3", s.q3},         {"max", s.max}, {"mean", s.mean}};
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory: " + dir.string());
}

std::string hex_of(const ColorLabel& c) { return rgb_hex(hsv_to_rgb(c)); }

std::optional<std::string> predicted_hex(const UtterancePrediction& p) {
  if (!p.has_regression || !p.hue_deg) return std::nullopt;
  return hex_of({*p.hue_deg, p.saturation, p.value});
}

void append_row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

void add_scores_row(std::string& out, const experiment::SettingResult& s, const char* mode,
                    const std::optional<RegressionScores>& r, const std::optional<double>& accuracy) {
  const std::optional<double> none;
  append_row(out, {s.name, cell(s.alpha), mode, cell(r ? r->hue_ae : none), cell(r ? r->sat_pcc : none),
                   cell(r ? r->sat_ccc : none), cell(r ? r->val_pcc : none), cell(r ? r->val_ccc : none),
                   cell(accuracy)});
}

json scores_table_json(const RunReport& report) {
  json rows = json::array();
  for (const auto& s : report.settings) {
    for (const char* mode : {"pooled", "fold_mean"}) {
      const bool pooled = mode == std::string_view("pooled");
      const auto& r = pooled ? s.pooled : s.fold_mean;
      const auto& acc = pooled ? s.pooled_accuracy : s.fold_mean_accuracy;
      rows.push_back({{"setting", s.name},
                      {"alpha", optional_json(s.alpha)},
                      {"mode", mode},
                      {"hue_ae", optional_json(r ? r->hue_ae : std::nullopt)},
                      {"sat_pcc", optional_json(r ? r->sat_pcc : std::nullopt)},
                      {"sat_ccc", optional_json(r ? r->sat_ccc : std::nullopt)},
                      {"val_pcc", optional_json(r ? r->val_pcc : std::nullopt)},
                      {"val_ccc", optional_json(r ? r->val_ccc : std::nullopt)},
                      {"accuracy", optional_json(acc)}});
    }
  }
  return {{"experiment", report.experiment}, {"rows", rows}};
}

json scatter_json(const RunReport& report) {
  json settings = json::array();
  for (const auto& s : report.settings) {
    if (s.predictions.empty() || !s.predictions.front().has_regression) continue;
    json points = json::array();
    for (const auto& p : s.predictions) {
      const auto hex = predicted_hex(p);
      points.push_back({{"utterance_id", p.utterance_id},
                        {"speaker_id", p.speaker_id},
                        {"emotion", std::string(to_string(p.emotion))},
                        {"truth", {{"hue_deg", p.truth.hue_deg}, {"saturation", p.truth.saturation}, {"value", p.truth.value}}},
                        {"prediction", {{"hue_deg", optional_json(p.hue_deg)}, {"saturation", p.saturation}, {"value", p.value}}},
                        {"truth_hex", hex_of(p.truth)},
                        {"pred_hex", hex ? json(*hex) : json(nullptr)}});
    }
    settings.push_back({{"setting", s.name}, {"alpha", optional_json(s.alpha)}, {"points", points}});
  }
  return {{"experiment", report.experiment}, {"settings", settings}};
}

void write(std::vector<std::filesystem::path>& written, const std::filesystem::path& path, std::string_view body) {
  text::write_file(path, body);
  written.push_back(path);
}

}  // namespace

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json stats_to_json(std::span<const AggregatedLabel> aggregates, std::span<const UtteranceMeta> metas) {
  const CorpusAgreement agreement = corpus_agreement(aggregates);
  json emotions = json::object();
  for (const auto& [emotion, st] : per_emotion_stats(aggregates, metas)) {
    emotions[std::string(to_string(emotion))] = {
        {"n", st.n},
        {"mean_hue_deg", optional_json(st.mean_hue_deg)},
        {"hue_histogram", std::vector<std::size_t>(st.hue_histogram.begin(), st.hue_histogram.end())},
        {"saturation", summary_json(st.saturation)},
        {"value", summary_json(st.value)}};
  }
  return {{"n_utterances", aggregates.size()},
          {"agreement",
           {{"mean_hue_circ_std_deg", agreement.mean_hue_circ_std_deg},
            {"mean_sat_std", agreement.mean_sat_std},
            {"mean_val_std", agreement.mean_val_std}}},
          {"hue_bin_width_deg", kHueBinWidthDeg},
          {"emotions", emotions}};
}

std::vector<std::filesystem::path> write_label_stats(std::span<const AggregatedLabel> aggregates,
                                                     std::span<const UtteranceMeta> metas,
                                                     const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const auto stats = per_emotion_stats(aggregates, metas);
  std::vector<std::filesystem::path> written;

  std::string hist = "emotion,bin,bin_start_deg,bin_end_deg,count,mean_hue_deg\n";
  json hist_json = json::object();
  for (const auto& [emotion, st] : stats) {
    const std::string name(to_string(emotion));
    for (std::size_t b = 0; b < kHueBins; ++b) {
      const double lo = static_cast<double>(b) * kHueBinWidthDeg;
      append_row(hist, {name, std::to_string(b), text::format_table(lo), text::format_table(lo + kHueBinWidthDeg),
                        std::to_string(st.hue_histogram[b]), cell(st.mean_hue_deg)});
    }
    hist_json[name] = {{"n", st.n},
                       {"mean_hue_deg", optional_json(st.mean_hue_deg)},
                       {"counts", std::vector<std::size_t>(st.hue_histogram.begin(), st.hue_histogram.end())}};
  }
  write(written, out_dir / "hue_histogram.csv", hist);
  write(written, out_dir / "hue_histogram.json", dump({{"bin_width_deg", kHueBinWidthDeg}, {"emotions", hist_json}}));

  std::string sv = "emotion,attribute,n,min,q1,median,q3,max,mean\n";
  json sv_json = json::object();
  for (const auto& [emotion, st] : stats) {
    const std::string name(to_string(emotion));
    for (const auto& [attr, s] : {std::pair<const char*, const DistributionSummary&>{"saturation", st.saturation},
                                  std::pair<const char*, const DistributionSummary&>{"value", st.value}}) {
      if (s.n == 0) {
        append_row(sv, {name, attr, "0", "-", "-", "-", "-", "-", "-"});
      } else {
        append_row(sv, {name, attr, std::to_string(s.n), text::format_table(s.min), text::format_table(s.q1),
                        text::format_table(s.median), text::format_table(s.q3), text::format_table(s.max),
                        text::format_table(s.mean)});
      }
    }
    sv_json[name] = {{"saturation", summary_json(st.saturation)}, {"value", summary_json(st.value)}};
  }
  write(written, out_dir / "sv_distribution.csv", sv);
  write(written, out_dir / "sv_distribution.json", dump(sv_json));
  return written;
}

std::string metrics_csv(const RunReport& report) {
  std::string out = "setting,alpha,mode,hue_ae,sat_pcc,sat_ccc,val_pcc,val_ccc,accuracy\n";
  for (const auto& s : report.settings) {
    add_scores_row(out, s, "pooled", s.pooled, s.pooled_accuracy);
    add_scores_row(out, s, "fold_mean", s.fold_mean, s.fold_mean_accuracy);
  }
  return out;
}

std::string confusion_csv(const RunReport& report) {
  std::string out = "setting,truth";
  for (Emotion e : kAllEmotions) out += "," + std::string(to_string(e));
  out += '\n';
  for (const auto& s : report.settings) {
    if (!s.pooled_confusion) continue;
    for (std::size_t t = 0; t < kEmotionCount; ++t) {
      out += s.name + "," + std::string(to_string(emotion_from_index(t)));
      for (std::size_t p = 0; p < kEmotionCount; ++p) out += "," + std::to_string((*s.pooled_confusion)[t][p]);
      out += '\n';
    }
  }
  return out;
}

std::string scatter_csv(const RunReport& report, std::string_view attribute) {
  if (attribute != "hue" && attribute != "saturation" && attribute != "value") {
    throw ValidationError("scatter_csv: unknown attribute '" + std::string(attribute) + "'");
  }
  std::string out = "setting,utterance_id,speaker_id,emotion,truth,prediction,truth_hex,pred_hex\n";
  for (const auto& s : report.settings) {
    for (const auto& p : s.predictions) {
      if (!p.has_regression) continue;
      std::string truth, pred;
      if (attribute == "hue") {
        truth = text::format_table(p.truth.hue_deg);
        pred = cell(p.hue_deg);
      } else if (attribute == "saturation") {
        truth = text::format_table(p.truth.saturation);
        pred = text::format_table(p.saturation);
      } else {
        truth = text::format_table(p.truth.value);
        pred = text::format_table(p.value);
      }
      const auto hex = predicted_hex(p);
      append_row(out, {s.name, p.utterance_id, p.speaker_id, std::string(to_string(p.emotion)), truth, pred,
                       hex_of(p.truth), hex ? *hex : std::string(kEmpty)});
    }
  }
  return out;
}

std::vector<std::filesystem::path> emit_reports(const RunReport& report, std::span<const AggregatedLabel> aggregates,
                                                std::span<const UtteranceMeta> metas,
                                                const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  std::vector<std::filesystem::path> written;
  write(written, out_dir / "report.json", dump(experiment::to_json(report)));
  write(written, out_dir / "metrics.csv", metrics_csv(report));
  write(written, out_dir / "metrics.json", dump(scores_table_json(report)));
  bool any_confusion = false, any_regression = false;
  for (const auto& s : report.settings) {
    any_confusion = any_confusion || s.pooled_confusion.has_value();
    any_regression = any_regression || (!s.predictions.empty() && s.predictions.front().has_regression);
  }
  if (any_confusion) write(written, out_dir / "confusion.csv", confusion_csv(report));
  if (any_regression) {
    for (const char* attr : {"hue", "saturation", "value"}) {
      write(written, out_dir / (std::string("scatter_") + attr + ".csv"), scatter_csv(report, attr));
    }
    write(written, out_dir / "scatter.json", dump(scatter_json(report)));
  }
  const auto stats = write_label_stats(aggregates, metas, out_dir);
  written.insert(written.end(), stats.begin(), stats.end());
  return written;
}

}  // namespace colorser::reports
