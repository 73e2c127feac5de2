#include <doctest.h>

#include "colorser/error.hpp"
#include "colorser/features.hpp"
#include "colorser/synthetic.hpp"

using namespace colorser;

TEST_CASE("utterance-level feature file") {
  const auto f = parse_features("utterance_id,f0,f1,f2,f3\na,1,2,3,4\nb,0,0,0,0\nc,-1,0.5,2e3,7\n",
                                FeatureKind::utterance_level);
  CHECK(f.dimension() == 4);
  CHECK(f.size() == 3);
  CHECK(f.vector("c")[2] == 2000.0);
  const auto m = f.gather(std::vector<std::string>{"c", "a"});
  CHECK(m(1, 3) == 4.0);
  CHECK(parse_features(serialize_features(f), FeatureKind::utterance_level).gather(f.ids()) == f.gather(f.ids()));
  CHECK_THROWS_AS(f.gather(std::vector<std::string>{"zzz"}), ValidationError);
}

TEST_CASE("feature file errors carry the line") {
  const auto fails_with = [](const std::string& text, FeatureKind kind, const std::string& needle) {
    try {
      parse_features(text, kind);
    } catch (const ValidationError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("utterance_id,f0,f1\na,1,2\na,3,4\n", FeatureKind::utterance_level, "line 3"));
  CHECK(fails_with("utterance_id,f0,f1\na,1,2\nb,3\n", FeatureKind::utterance_level, "line 3"));
  CHECK(fails_with("utterance_id,f0,f1\na,1,nan\n", FeatureKind::utterance_level, "line 2"));
  CHECK(fails_with("utterance_id,f1,f0\na,1,2\n", FeatureKind::utterance_level, "line 1"));
}

TEST_CASE("frame-level pooling") {
  const auto f = parse_features(
      "utterance_id,frame_index,f0,f1\n"
      "a,0,1,2\n"
      "a,1,3,4\n"
      "b,0,5,5\n",
      FeatureKind::frame_level);
  CHECK(f.frames("a").rows() == 2);
  const auto pooled = f.pooled();
  CHECK(pooled.kind() == FeatureKind::utterance_level);
  CHECK(pooled.vector("a")[0] == 2.0);
  CHECK(pooled.vector("a")[1] == 3.0);
  CHECK(pooled.vector("b")[1] == 5.0);
  CHECK_THROWS_AS(parse_features("utterance_id,frame_index,f0\na,0,1\na,2,1\n", FeatureKind::frame_level),
                  ValidationError);
  CHECK_THROWS_AS(parse_features("utterance_id,frame_index,f0\na,0,1\nb,0,1\na,1,1\n", FeatureKind::frame_level),
                  ValidationError);
}

TEST_CASE("synthetic benchmark") {
  synthetic::Options o;
  o.seed = 4;
  o.utterances_per_cell = 3;
  const auto a = synthetic::make_benchmark(o), b = synthetic::make_benchmark(o);
  CHECK(a.labels == b.labels);
  CHECK(a.metas == b.metas);
  CHECK(a.annotations == b.annotations);
  CHECK(a.features.gather(a.features.ids()) == b.features.gather(b.features.ids()));
  CHECK(a.metas.size() == 4 * 2 * 6 * 3);
  CHECK(a.annotations.size() == a.metas.size() * 10);

  o.seed = 5;
  CHECK_FALSE(synthetic::make_benchmark(o).labels == a.labels);

  // Without noise the informative part is a function of (speaker, targets) and distractors vanish.
  o.noise = 0;
  o.speaker_shift = 0;
  const auto clean = synthetic::make_benchmark(o);
  const std::size_t informative = o.dimension - synthetic::distractor_dimensions(o.dimension);
  for (const auto& id : clean.features.ids()) {
    const auto v = clean.features.vector(id);
    for (std::size_t d = informative; d < v.size(); ++d) CHECK(v[d] == 0.0);
  }

  o.speakers = 1;
  CHECK_THROWS_AS(synthetic::make_benchmark(o), ValidationError);
}
