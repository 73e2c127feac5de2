#pragma once

// Seeded stand-in corpus: six emotions in two sessions per speaker, simulated
// crowd annotations on the tile grid, and features that are noisy linear
// images of the aggregated color targets and the emotion.

#include <cstdint>
#include <vector>

#include "colorser/features.hpp"
#include "colorser/labels.hpp"

namespace colorser::synthetic {

struct Options {
  std::uint64_t seed = 0;
  std::size_t speakers = 4;
  std::size_t utterances_per_cell = 10;
  std::size_t dimension = 24;
  /// Observation noise on informative dimensions; distractor dimensions carry
  /// pure noise at 10x this level.
  double noise = 0.1;
  double speaker_shift = 0.1;
  std::size_t annotators = 10;
};

struct Benchmark {
  FeatureSet features{FeatureKind::utterance_level, 1};
  std::vector<AggregatedLabel> labels;
  std::vector<UtteranceMeta> metas;
  std::vector<AnnotationRecord> annotations;
};

/// Per-emotion color around which utterance colors are drawn.
ColorLabel prototype(Emotion emotion);

/// Number of trailing dimensions that carry no signal.
std::size_t distractor_dimensions(std::size_t dimension);

Benchmark make_benchmark(const Options& options);

}  // namespace colorser::synthetic
