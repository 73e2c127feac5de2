#include "colorser/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/neural.hpp"

namespace colorser::synthetic {
namespace {

constexpr std::size_t kLatentDims = 4 + kEmotionCount;  // sin H, cos H, S, V, one-hot emotion
constexpr double kUtteranceHueSpreadDeg = 12.0;
constexpr double kUtteranceSvSpread = 0.07;
constexpr double kAnnotatorHueSpreadDeg = 20.0;
constexpr double kAnnotatorSvSpread = 0.12;
// S and V enter the latent vector centered and scaled so their feature-space
// footprint is comparable to the unit-circle hue components.
constexpr double kSvLatentGain = 3.0;

double snap(double x, double step, double lo, double hi) {
  return std::clamp(std::round(x / step) * step, lo, hi);
}

std::string make_id(std::size_t speaker, Session session, Emotion emotion, std::size_t k) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "spk%02zu_%s_%s_%03zu", speaker + 1,
                session == Session::regular ? "reg" : "free", std::string(to_string(emotion)).c_str(), k);
  return buffer;
}

}  // namespace

ColorLabel prototype(Emotion emotion) {
  // Hues are the per-emotion mean hues reported for the annotated corpus;
  // S/V follow its qualitative arousal/valence ordering.
  switch (emotion) {
    case Emotion::Ang: return {343.0, 0.85, 0.75};
    case Emotion::Dis: return {296.0, 0.50, 0.50};
    case Emotion::Fea: return {275.0, 0.55, 0.45};
    case Emotion::Hap: return {46.0, 0.80, 0.95};
    case Emotion::Sad: return {242.0, 0.40, 0.40};
    case Emotion::Sur: return {48.0, 0.75, 0.90};
  }
  return {};
}

std::size_t distractor_dimensions(std::size_t dimension) { return dimension / 4; }

Benchmark make_benchmark(const Options& o) {
  if (o.speakers < 2) throw ValidationError("synthetic benchmark: need at least 2 speakers");
  if (o.utterances_per_cell < 1) throw ValidationError("synthetic benchmark: need at least 1 utterance per cell");
  if (o.dimension < 8) throw ValidationError("synthetic benchmark: dimension must be at least 8");
  if (o.annotators < 1) throw ValidationError("synthetic benchmark: need at least 1 annotator");
  if (!(o.noise >= 0.0) || !(o.speaker_shift >= 0.0)) throw ValidationError("synthetic benchmark: negative noise");

  neural::Rng rng(o.seed);
  const std::size_t informative = o.dimension - distractor_dimensions(o.dimension);

  // Fixed linear map from latent targets to informative features.
  Matrix mixing(informative, kLatentDims);
  const double mixing_scale = 1.0 / std::sqrt(static_cast<double>(kLatentDims));
  for (double& v : mixing.values()) v = rng.normal() * mixing_scale;
  Matrix offsets(o.speakers, informative);
  for (double& v : offsets.values()) v = rng.normal() * o.speaker_shift;

  Benchmark out;
  out.features = FeatureSet(FeatureKind::utterance_level, o.dimension);
  const text::Timestamp base = text::parse_timestamp("2025-01-01T00:00:00Z");
  std::size_t annotation_index = 0;

  for (std::size_t s = 0; s < o.speakers; ++s) {
    char speaker[16];
    std::snprintf(speaker, sizeof speaker, "spk%02zu", s + 1);
    for (Session session : {Session::regular, Session::phrase_free}) {
      for (Emotion emotion : kAllEmotions) {
        const ColorLabel proto = prototype(emotion);
        for (std::size_t k = 0; k < o.utterances_per_cell; ++k) {
          const std::string id = make_id(s, session, emotion, k);
          const double hue = proto.hue_deg + rng.normal() * kUtteranceHueSpreadDeg;
          const double sat = std::clamp(proto.saturation + rng.normal() * kUtteranceSvSpread, 0.0, 1.0);
          const double val = std::clamp(proto.value + rng.normal() * kUtteranceSvSpread, 0.2, 1.0);

          std::vector<AnnotationRecord> records;
          for (std::size_t a = 0; a < o.annotators; ++a) {
            char annotator[16];
            std::snprintf(annotator, sizeof annotator, "ann%02zu", a + 1);
            const double h = circular::normalize_deg(snap(hue + rng.normal() * kAnnotatorHueSpreadDeg, 18.0, -1e9, 1e9));
            const double v = snap(val + rng.normal() * kAnnotatorSvSpread, 0.2, 0.2, 1.0);
            const double sv = snap(sat + rng.normal() * kAnnotatorSvSpread, 0.25, 0.0, 1.0);
            records.push_back({id, annotator, {h, sv, v}, base + std::chrono::seconds(annotation_index++)});
          }
          AggregatedLabel label = aggregate_utterance(records, {o.annotators}).aggregate;

          std::array<double, kLatentDims> latent{};
          const auto target = neural::regression_target(label.label);
          std::copy(target.begin(), target.end(), latent.begin());
          latent[2] = kSvLatentGain * (latent[2] - 0.5);
          latent[3] = kSvLatentGain * (latent[3] - 0.5);
          latent[4 + index_of(emotion)] = 1.0;

          Matrix row(1, o.dimension);
          for (std::size_t d = 0; d < informative; ++d) {
            double x = offsets(s, d);
            for (std::size_t l = 0; l < kLatentDims; ++l) x += mixing(d, l) * latent[l];
            row(0, d) = x + rng.normal() * o.noise;
          }
          for (std::size_t d = informative; d < o.dimension; ++d) row(0, d) = rng.normal() * 10.0 * o.noise;

          out.features.add(id, std::move(row));
          out.labels.push_back(std::move(label));
          out.metas.push_back({id, speaker, session, emotion, "audio/" + id + ".wav"});
          out.annotations.insert(out.annotations.end(), records.begin(), records.end());
        }
      }
    }
  }
  return out;
}

}  // namespace colorser::synthetic
