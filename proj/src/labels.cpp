#include "colorser/labels.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <utility>

#include <json.hpp>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"

namespace colorser {
namespace {

constexpr std::array<std::string_view, kEmotionCount> kEmotionNames{"Ang", "Dis", "Fea", "Hap", "Sad", "Sur"};

std::string row_context(std::string_view file, std::size_t line_number) {
  return std::string(file) + " line " + std::to_string(line_number);
}

double population_std(std::span<const double> values, double mean) {
  double sum = 0.0;
  for (double v : values) sum += (v - mean) * (v - mean);
  return std::sqrt(sum / static_cast<double>(values.size()));
}

double mean_of(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Linear interpolation between order statistics (R type 7).
double quantile_sorted(std::span<const double> sorted, double q) {
  const double position = q * static_cast<double>(sorted.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = std::min(lower + 1, sorted.size() - 1);
  const double frac = position - static_cast<double>(lower);
  return sorted[lower] + frac * (sorted[upper] - sorted[lower]);
}

void expect_header(const std::vector<std::string>& lines, std::string_view header, std::string_view file) {
  if (lines.empty()) throw ValidationError(std::string(file) + ": missing header");
  if (lines.front() != header) {
    throw ValidationError(std::string(file) + " line 1: expected header '" + std::string(header) + "'");
  }
}

}  // namespace

std::string_view to_string(Emotion emotion) { return kEmotionNames.at(index_of(emotion)); }

Emotion parse_emotion(std::string_view text) {
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (kEmotionNames[i] == text) return static_cast<Emotion>(i);
  }
  throw ValidationError("unknown emotion '" + std::string(text) + "' (expected Ang, Dis, Fea, Hap, Sad or Sur)");
}

Emotion emotion_from_index(std::size_t index) {
  if (index >= kEmotionCount) throw ValidationError("emotion index out of range: " + std::to_string(index));
  return static_cast<Emotion>(index);
}

std::string_view to_string(Session session) {
  return session == Session::regular ? "regular" : "phrase_free";
}

Session parse_session(std::string_view text) {
  if (text == "regular") return Session::regular;
  if (text == "phrase_free") return Session::phrase_free;
  throw ValidationError("unknown session '" + std::string(text) + "' (expected regular or phrase_free)");
}

void validate(const ColorLabel& color) {
  if (!std::isfinite(color.hue_deg) || color.hue_deg < 0.0 || color.hue_deg >= 360.0) {
    throw ValidationError("hue_deg out of range [0, 360): " + text::format_full(color.hue_deg));
  }
  if (!std::isfinite(color.saturation) || color.saturation < 0.0 || color.saturation > 1.0) {
    throw ValidationError("saturation out of range [0, 1]: " + text::format_full(color.saturation));
  }
  if (!std::isfinite(color.value) || color.value < 0.0 || color.value > 1.0) {
    throw ValidationError("value out of range [0, 1]: " + text::format_full(color.value));
  }
}

AggregateResult aggregate_utterance(std::span<const AnnotationRecord> records, const AggregateOptions& options) {
  if (records.empty()) throw ValidationError("aggregate_utterance: no records");
  const std::string& id = records.front().utterance_id;
  std::vector<double> hues, sats, vals;
  hues.reserve(records.size());
  sats.reserve(records.size());
  vals.reserve(records.size());
  for (const auto& record : records) {
    if (record.utterance_id != id) {
      throw ValidationError("aggregate_utterance: mixed utterance ids '" + id + "' and '" + record.utterance_id + "'");
    }
    hues.push_back(record.color.hue_deg);
    sats.push_back(record.color.saturation);
    vals.push_back(record.color.value);
  }
  // Summation order follows the input; sort so the result is permutation-invariant bit for bit.
  std::sort(hues.begin(), hues.end());
  std::sort(sats.begin(), sats.end());
  std::sort(vals.begin(), vals.end());

  const circular::AngleSetSummary hue = circular::summarize(hues);
  const double sat_mean = std::clamp(mean_of(sats), 0.0, 1.0);
  const double val_mean = std::clamp(mean_of(vals), 0.0, 1.0);

  AggregateResult result;
  result.aggregate = AggregatedLabel{
      .utterance_id = id,
      .label = {hue.mean_deg, sat_mean, val_mean},
      .n_annotations = records.size(),
      .hue_circ_std_deg = hue.circ_std_deg,
      .sat_std = population_std(sats, sat_mean),
      .val_std = population_std(vals, val_mean),
  };
  if (records.size() < options.quorum) {
    result.warnings.push_back("utterance '" + id + "' has " + std::to_string(records.size()) +
                              " annotations, below quorum " + std::to_string(options.quorum));
  }
  return result;
}

std::vector<AggregatedLabel> aggregate_all(std::span<const AnnotationRecord> records, const AggregateOptions& options,
                                           std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<AnnotationRecord>> groups;
  for (const auto& record : records) groups[record.utterance_id].push_back(record);
  std::vector<AggregatedLabel> out;
  out.reserve(groups.size());
  for (const auto& [id, group] : groups) {
    AggregateResult result = aggregate_utterance(group, options);
    if (warnings) warnings->insert(warnings->end(), result.warnings.begin(), result.warnings.end());
    out.push_back(std::move(result.aggregate));
  }
  return out;
}

CorpusAgreement corpus_agreement(std::span<const AggregatedLabel> aggregates) {
  if (aggregates.empty()) throw DomainError("corpus_agreement: no aggregates");
  CorpusAgreement sum;
  for (const auto& a : aggregates) {
    sum.mean_hue_circ_std_deg += a.hue_circ_std_deg;
    sum.mean_sat_std += a.sat_std;
    sum.mean_val_std += a.val_std;
  }
  const auto n = static_cast<double>(aggregates.size());
  return {sum.mean_hue_circ_std_deg / n, sum.mean_sat_std / n, sum.mean_val_std / n};
}

DistributionSummary summarize_distribution(std::span<const double> values) {
  DistributionSummary s;
  if (values.empty()) return s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.n = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.mean = mean_of(sorted);
  return s;
}

std::size_t hue_bin(double hue_deg) {
  const double h = circular::normalize_deg(hue_deg);
  return std::min(kHueBins - 1, static_cast<std::size_t>(std::floor(h / kHueBinWidthDeg)));
}

std::map<Emotion, EmotionStats> per_emotion_stats(std::span<const AggregatedLabel> aggregates,
                                                  std::span<const UtteranceMeta> metas) {
  std::unordered_map<std::string, Emotion> emotion_of;
  for (const auto& m : metas) emotion_of.emplace(m.utterance_id, m.emotion);

  struct Columns {
    std::vector<double> hues, sats, vals;
  };
  std::map<Emotion, Columns> columns;
  std::map<Emotion, EmotionStats> stats;
  for (Emotion e : kAllEmotions) stats[e];
  for (const auto& a : aggregates) {
    const auto it = emotion_of.find(a.utterance_id);
    if (it == emotion_of.end()) {
      throw ValidationError("per_emotion_stats: utterance '" + a.utterance_id + "' is not in the manifest");
    }
    Columns& c = columns[it->second];
    c.hues.push_back(a.label.hue_deg);
    c.sats.push_back(a.label.saturation);
    c.vals.push_back(a.label.value);
    EmotionStats& s = stats[it->second];
    s.n += 1;
    s.hue_histogram[hue_bin(a.label.hue_deg)] += 1;
  }
  for (auto& [emotion, c] : columns) {
    EmotionStats& s = stats[emotion];
    try {
      s.mean_hue_deg = circular::circular_mean(c.hues);
    } catch (const UndefinedMeanError&) {
      s.mean_hue_deg.reset();
    }
    s.saturation = summarize_distribution(c.sats);
    s.value = summarize_distribution(c.vals);
  }
  return stats;
}

Rgb hsv_to_rgb(const ColorLabel& color) {
  validate(color);
  const double chroma = color.value * color.saturation;
  const double sector = color.hue_deg / 60.0;
  const double x = chroma * (1.0 - std::abs(std::fmod(sector, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  switch (static_cast<int>(sector)) {
    case 0: r = chroma; g = x; break;
    case 1: r = x; g = chroma; break;
    case 2: g = chroma; b = x; break;
    case 3: g = x; b = chroma; break;
    case 4: r = x; b = chroma; break;
    default: r = chroma; b = x; break;
  }
  const double m = color.value - chroma;
  const auto channel = [m](double c) { return static_cast<int>(std::lround((c + m) * 255.0)); };
  return {channel(r), channel(g), channel(b)};
}

std::string rgb_hex(const Rgb& rgb) {
  char buffer[8];
  std::snprintf(buffer, sizeof buffer, "#%02X%02X%02X", rgb.r, rgb.g, rgb.b);
  return buffer;
}

// File formats ---------------------------------------------------------------

std::vector<UtteranceMeta> parse_manifest(std::string_view text) {
  const auto lines = text::split_lines(text);
  expect_header(lines, "utterance_id,speaker_id,session,emotion,audio_path", "manifest");
  std::vector<UtteranceMeta> metas;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = row_context("manifest", i + 1);
    const auto fields = text::split_csv_line(lines[i]);
    if (fields.size() != 5) throw ValidationError(where + ": expected 5 fields, got " + std::to_string(fields.size()));
    try {
      UtteranceMeta meta{fields[0], fields[1], parse_session(fields[2]), parse_emotion(fields[3]), fields[4]};
      if (meta.utterance_id.empty() || meta.speaker_id.empty()) throw ValidationError("empty utterance or speaker id");
      if (!seen.insert(meta.utterance_id).second) throw ValidationError("duplicate utterance id '" + meta.utterance_id + "'");
      metas.push_back(std::move(meta));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return metas;
}

std::string serialize_manifest(std::span<const UtteranceMeta> metas) {
  std::string out = "utterance_id,speaker_id,session,emotion,audio_path\n";
  for (const auto& m : metas) {
    out += m.utterance_id + ',' + m.speaker_id + ',' + std::string(to_string(m.session)) + ',' +
           std::string(to_string(m.emotion)) + ',' + m.audio_path + '\n';
  }
  return out;
}

AnnotationRecord parse_annotation_line(std::string_view line) {
  nlohmann::json object;
  try {
    object = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!object.is_object()) throw ValidationError("annotation is not a JSON object");
  const auto string_field = [&](const char* key) {
    const auto it = object.find(key);
    if (it == object.end() || !it->is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
    return it->get<std::string>();
  };
  const auto number_field = [&](const char* key) {
    const auto it = object.find(key);
    if (it == object.end() || !it->is_number()) throw ValidationError(std::string("missing numeric field '") + key + "'");
    return it->get<double>();
  };
  AnnotationRecord record{
      .utterance_id = string_field("utterance_id"),
      .annotator_id = string_field("annotator_id"),
      .color = {number_field("hue_deg"), number_field("saturation"), number_field("value")},
      .submitted_at = text::parse_timestamp(string_field("submitted_at")),
  };
  if (record.utterance_id.empty()) throw ValidationError("empty utterance_id");
  if (record.annotator_id.empty()) throw ValidationError("empty annotator_id");
  validate(record.color);
  return record;
}

std::vector<AnnotationRecord> parse_annotations(std::string_view text) {
  const auto lines = text::split_lines(text);
  std::vector<AnnotationRecord> records;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = row_context("annotations", i + 1);
    AnnotationRecord record;
    try {
      record = parse_annotation_line(lines[i]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!seen.emplace(record.utterance_id, record.annotator_id).second) {
      throw ValidationError(where + ": duplicate annotation for utterance '" + record.utterance_id +
                            "' by annotator '" + record.annotator_id + "'");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::string serialize_annotation(const AnnotationRecord& record) {
  // ordered_json keeps the documented key order on the wire.
  nlohmann::ordered_json object;
  object["utterance_id"] = record.utterance_id;
  object["annotator_id"] = record.annotator_id;
  object["hue_deg"] = record.color.hue_deg;
  object["saturation"] = record.color.saturation;
  object["value"] = record.color.value;
  object["submitted_at"] = text::format_timestamp(record.submitted_at);
  return object.dump();
}

std::string serialize_annotations(std::span<const AnnotationRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_annotation(r);
    out += '\n';
  }
  return out;
}

std::vector<AggregatedLabel> parse_aggregated_labels(std::string_view text) {
  const auto lines = text::split_lines(text);
  expect_header(lines, "utterance_id,hue_deg,saturation,value,n,hue_circ_std_deg,sat_std,val_std", "labels");
  std::vector<AggregatedLabel> labels;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = row_context("labels", i + 1);
    const auto f = text::split_csv_line(lines[i]);
    if (f.size() != 8) throw ValidationError(where + ": expected 8 fields, got " + std::to_string(f.size()));
    try {
      AggregatedLabel label;
      label.utterance_id = f[0];
      if (label.utterance_id.empty()) throw ValidationError("empty utterance id");
      label.label = {text::parse_double(f[1], "hue_deg"), text::parse_double(f[2], "saturation"),
                     text::parse_double(f[3], "value")};
      validate(label.label);
      const double n = text::parse_double(f[4], "n");
      if (n < 1.0 || n != std::floor(n)) throw ValidationError("n must be a positive integer");
      label.n_annotations = static_cast<std::size_t>(n);
      label.hue_circ_std_deg = text::parse_double(f[5], "hue_circ_std_deg");
      label.sat_std = text::parse_double(f[6], "sat_std");
      label.val_std = text::parse_double(f[7], "val_std");
      if (label.hue_circ_std_deg < 0.0 || label.sat_std < 0.0 || label.val_std < 0.0) {
        throw ValidationError("dispersion fields must be non-negative");
      }
      if (!seen.insert(label.utterance_id).second) throw ValidationError("duplicate utterance id '" + label.utterance_id + "'");
      labels.push_back(std::move(label));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return labels;
}

std::string serialize_aggregated_labels(std::span<const AggregatedLabel> labels) {
  std::string out = "utterance_id,hue_deg,saturation,value,n,hue_circ_std_deg,sat_std,val_std\n";
  for (const auto& l : labels) {
    out += l.utterance_id + ',' + text::format_full(l.label.hue_deg) + ',' + text::format_full(l.label.saturation) +
           ',' + text::format_full(l.label.value) + ',' + std::to_string(l.n_annotations) + ',' +
           text::format_full(l.hue_circ_std_deg) + ',' + text::format_full(l.sat_std) + ',' +
           text::format_full(l.val_std) + '\n';
  }
  return out;
}

}  // namespace colorser
