#pragma once

// Label data model: corpus manifests, per-annotator color records, their
// aggregation into final utterance labels, and agreement statistics.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colorser/text_io.hpp"

namespace colorser {

enum class Emotion : std::uint8_t { Ang = 0, Dis, Fea, Hap, Sad, Sur };
inline constexpr std::size_t kEmotionCount = 6;
inline constexpr std::array<Emotion, kEmotionCount> kAllEmotions{Emotion::Ang, Emotion::Dis, Emotion::Fea,
                                                                 Emotion::Hap, Emotion::Sad, Emotion::Sur};

std::string_view to_string(Emotion emotion);
/// Throws ValidationError for anything outside the six categories.
Emotion parse_emotion(std::string_view text);
inline std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }
Emotion emotion_from_index(std::size_t index);

enum class Session : std::uint8_t { regular, phrase_free };
std::string_view to_string(Session session);
Session parse_session(std::string_view text);

/// One HSV point. Saturation and value are fractions in [0, 1].
struct ColorLabel {
  double hue_deg = 0.0;
  double saturation = 0.0;
  double value = 0.0;

  bool operator==(const ColorLabel&) const = default;
};

/// Throws ValidationError unless hue in [0, 360) and S, V in [0, 1].
void validate(const ColorLabel& color);

struct AnnotationRecord {
  std::string utterance_id;
  std::string annotator_id;
  ColorLabel color;
  text::Timestamp submitted_at{};

  bool operator==(const AnnotationRecord&) const = default;
};

struct UtteranceMeta {
  std::string utterance_id;
  std::string speaker_id;
  Session session = Session::regular;
  Emotion emotion = Emotion::Ang;
  std::string audio_path;

  bool operator==(const UtteranceMeta&) const = default;
};

struct AggregatedLabel {
  std::string utterance_id;
  ColorLabel label;
  std::size_t n_annotations = 0;
  double hue_circ_std_deg = 0.0;
  double sat_std = 0.0;
  double val_std = 0.0;

  bool operator==(const AggregatedLabel&) const = default;
};

struct AggregateOptions {
  /// Aggregation below this many records succeeds but emits a warning.
  std::size_t quorum = 10;
};

struct AggregateResult {
  AggregatedLabel aggregate;
  std::vector<std::string> warnings;
};

/// Circular mean hue, arithmetic mean S/V, population dispersions.
AggregateResult aggregate_utterance(std::span<const AnnotationRecord> records, const AggregateOptions& options = {});

/// Groups records by utterance (sorted by id) and aggregates each group.
/// Warnings from every group are appended to `warnings` when given.
std::vector<AggregatedLabel> aggregate_all(std::span<const AnnotationRecord> records,
                                           const AggregateOptions& options = {},
                                           std::vector<std::string>* warnings = nullptr);

struct CorpusAgreement {
  double mean_hue_circ_std_deg = 0.0;
  double mean_sat_std = 0.0;
  double mean_val_std = 0.0;
};

CorpusAgreement corpus_agreement(std::span<const AggregatedLabel> aggregates);

inline constexpr std::size_t kHueBins = 20;
inline constexpr double kHueBinWidthDeg = 18.0;

/// Five-number summary plus mean; quartiles by linear interpolation.
struct DistributionSummary {
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

DistributionSummary summarize_distribution(std::span<const double> values);

struct EmotionStats {
  std::size_t n = 0;
  /// Empty when the emotion has no utterances or its hues cancel out.
  std::optional<double> mean_hue_deg;
  /// Bin k covers [18k, 18k + 18).
  std::array<std::size_t, kHueBins> hue_histogram{};
  DistributionSummary saturation;
  DistributionSummary value;
};

std::map<Emotion, EmotionStats> per_emotion_stats(std::span<const AggregatedLabel> aggregates,
                                                  std::span<const UtteranceMeta> metas);

std::size_t hue_bin(double hue_deg);

struct Rgb {
  int r = 0;
  int g = 0;
  int b = 0;
  bool operator==(const Rgb&) const = default;
};

Rgb hsv_to_rgb(const ColorLabel& color);
/// "#RRGGBB", uppercase.
std::string rgb_hex(const Rgb& rgb);

// File formats ---------------------------------------------------------------

/// CSV with header utterance_id,speaker_id,session,emotion,audio_path.
std::vector<UtteranceMeta> parse_manifest(std::string_view text);
std::string serialize_manifest(std::span<const UtteranceMeta> metas);

/// JSON Lines; keys utterance_id, annotator_id, hue_deg, saturation, value,
/// submitted_at. Duplicate (utterance, annotator) pairs are rejected.
std::vector<AnnotationRecord> parse_annotations(std::string_view text);
AnnotationRecord parse_annotation_line(std::string_view line);
std::string serialize_annotation(const AnnotationRecord& record);
std::string serialize_annotations(std::span<const AnnotationRecord> records);

/// CSV utterance_id,hue_deg,saturation,value,n,hue_circ_std_deg,sat_std,val_std.
std::vector<AggregatedLabel> parse_aggregated_labels(std::string_view text);
std::string serialize_aggregated_labels(std::span<const AggregatedLabel> labels);

}  // namespace colorser
