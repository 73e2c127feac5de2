#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/labels.hpp"
#include "colorser/text_io.hpp"

using namespace colorser;

namespace {

AnnotationRecord rec(std::string utt, std::string ann, double h, double s, double v) {
  return {std::move(utt), std::move(ann), {h, s, v}, text::parse_timestamp("2025-03-01T12:00:00Z")};
}

AggregatedLabel agg(std::string id, double h, double hs = 0, double ss = 0, double vs = 0) {
  return {std::move(id), {h, 0.5, 0.5}, 10, hs, ss, vs};
}

}  // namespace

TEST_CASE("aggregate two records across the wrap") {
  const std::vector<AnnotationRecord> r{rec("u1", "a", 350, 0.5, 1.0), rec("u1", "b", 10, 0.7, 0.8)};
  const AggregatedLabel a = aggregate_utterance(r).aggregate;
  CHECK(circular::angular_error(a.label.hue_deg, 0.0) < 1e-9);
  CHECK(a.label.saturation == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(a.label.value == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(a.sat_std == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(a.val_std == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(a.n_annotations == 2);
  // R = cos(10 deg).
  CHECK(a.hue_circ_std_deg == doctest::Approx(std::sqrt(-2 * std::log(std::cos(10 * circular::kRadPerDeg))) *
                                                 circular::kDegPerRad));
}

TEST_CASE("aggregate singleton and consensus") {
  const auto one = aggregate_utterance(std::vector{rec("u", "a", 46, 1.0, 1.0)});
  CHECK(one.aggregate.label == ColorLabel{46, 1.0, 1.0});
  CHECK(one.aggregate.hue_circ_std_deg == 0.0);
  CHECK(one.aggregate.sat_std == 0.0);
  CHECK(one.aggregate.n_annotations == 1);
  CHECK(one.warnings.size() == 1);

  std::vector<AnnotationRecord> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(rec("u", "a" + std::to_string(i), 234, 0.25, 0.6));
  const auto same = aggregate_utterance(ten);
  CHECK(same.warnings.empty());
  CHECK(same.aggregate.label.hue_deg == doctest::Approx(234.0).epsilon(1e-12));
  CHECK(same.aggregate.label.saturation == doctest::Approx(0.25));
  CHECK(same.aggregate.hue_circ_std_deg == doctest::Approx(0.0));
  CHECK(same.aggregate.n_annotations == 10);
}

TEST_CASE("aggregate rejects mixed ids and propagates undefined means") {
  CHECK_THROWS_AS(aggregate_utterance(std::vector{rec("u", "a", 0, 0, 0), rec("v", "b", 0, 0, 0)}), ValidationError);
  CHECK_THROWS_AS(aggregate_utterance(std::vector{rec("u", "a", 0, 0, 1), rec("u", "b", 180, 0, 1)}),
                  UndefinedMeanError);
  CHECK_THROWS_AS(aggregate_utterance(std::vector<AnnotationRecord>{}), ValidationError);
}

TEST_CASE("aggregation is permutation invariant and rotation equivariant") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> hue(0, 40), unit(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<AnnotationRecord> r;
    for (int i = 0; i < 10; ++i) r.push_back(rec("u", "a" + std::to_string(i), hue(gen), unit(gen), unit(gen)));
    const auto base = aggregate_utterance(r).aggregate;
    auto shuffled = r;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(aggregate_utterance(shuffled).aggregate == base);

    const double delta = 360 * unit(gen);
    auto rotated = r;
    for (auto& x : rotated) x.color.hue_deg = circular::normalize_deg(x.color.hue_deg + delta);
    const auto rot = aggregate_utterance(rotated).aggregate;
    CHECK(circular::angular_error(rot.label.hue_deg, base.label.hue_deg + delta) < 1e-9);
    CHECK(std::abs(rot.hue_circ_std_deg - base.hue_circ_std_deg) < 1e-9);
  }
}

TEST_CASE("aggregate_all groups by utterance") {
  std::vector<AnnotationRecord> r{rec("b", "x", 10, 0.2, 0.4), rec("a", "x", 20, 0.2, 0.4), rec("b", "y", 30, 0.4, 0.6)};
  std::vector<std::string> warnings;
  const auto out = aggregate_all(r, {2}, &warnings);
  REQUIRE(out.size() == 2);
  CHECK(out[0].utterance_id == "a");
  CHECK(out[1].utterance_id == "b");
  CHECK(out[1].label.hue_deg == doctest::Approx(20.0));
  CHECK(out[1].label.saturation == doctest::Approx(0.3));
  CHECK(warnings.size() == 1);
}

TEST_CASE("corpus agreement averages dispersions") {
  const std::vector<AggregatedLabel> a{agg("x", 0, 40, 0.1, 0.2), agg("y", 0, 60, 0.3, 0.0)};
  const auto c = corpus_agreement(a);
  CHECK(c.mean_hue_circ_std_deg == doctest::Approx(50.0));
  CHECK(c.mean_sat_std == doctest::Approx(0.2));
  CHECK(c.mean_val_std == doctest::Approx(0.1));
  const std::vector<AggregatedLabel> zero{agg("x", 0), agg("y", 10)};
  CHECK(corpus_agreement(zero).mean_hue_circ_std_deg == 0.0);
  CHECK_THROWS_AS(corpus_agreement(std::vector<AggregatedLabel>{}), DomainError);
}

TEST_CASE("per-emotion stats") {
  std::vector<UtteranceMeta> metas;
  std::vector<AggregatedLabel> aggs;
  for (int i = 0; i < 6; ++i) {
    const std::string h = "h" + std::to_string(i), s = "s" + std::to_string(i);
    metas.push_back({h, "spk", Session::regular, Emotion::Hap, h + ".wav"});
    metas.push_back({s, "spk", Session::regular, Emotion::Sad, s + ".wav"});
    aggs.push_back(agg(h, 46));
    aggs.push_back(agg(s, 226 + i));  // antipodal cluster
  }
  const auto stats = per_emotion_stats(aggs, metas);
  const auto& hap = stats.at(Emotion::Hap);
  CHECK(hap.n == 6);
  CHECK(*hap.mean_hue_deg == doctest::Approx(46.0));
  CHECK(hap.hue_histogram[2] == 6);  // [36, 54)
  const auto& sad = stats.at(Emotion::Sad);
  CHECK(sad.hue_histogram[12] == 6);  // [216, 234)
  std::size_t total = 0;
  for (auto c : sad.hue_histogram) total += c;
  CHECK(total == sad.n);
  CHECK(!stats.at(Emotion::Ang).mean_hue_deg);

  aggs.push_back(agg("ghost", 0));
  CHECK_THROWS_AS(per_emotion_stats(aggs, metas), ValidationError);
}

TEST_CASE("hue bins are left-closed at 18 degree edges") {
  CHECK(hue_bin(0) == 0);
  CHECK(hue_bin(17.999) == 0);
  CHECK(hue_bin(18) == 1);
  CHECK(hue_bin(342) == 19);
  CHECK(hue_bin(359.99) == 19);
  CHECK(hue_bin(360) == 0);
}

TEST_CASE("distribution summary quartiles") {
  const std::vector<double> v{4, 1, 3, 2, 5};
  const auto s = summarize_distribution(v);
  CHECK(s.min == 1);
  CHECK(s.q1 == 2);
  CHECK(s.median == 3);
  CHECK(s.q3 == 4);
  CHECK(s.max == 5);
  CHECK(s.mean == 3);
}

TEST_CASE("hsv to rgb") {
  CHECK(hsv_to_rgb({0, 1, 1}) == Rgb{255, 0, 0});
  CHECK(hsv_to_rgb({120, 1, 1}) == Rgb{0, 255, 0});
  CHECK(hsv_to_rgb({240, 1, 1}) == Rgb{0, 0, 255});
  CHECK(hsv_to_rgb({60, 1, 1}) == Rgb{255, 255, 0});
  CHECK(hsv_to_rgb({18, 0.75, 0.8}) == Rgb{204, 97, 51});
  for (double h = 0; h < 360; h += 18) {
    CHECK(hsv_to_rgb({h, 0.6, 0}) == Rgb{0, 0, 0});
    const Rgb g = hsv_to_rgb({h, 0, 0.6});
    CHECK(g.r == g.g);
    CHECK(g.g == g.b);
  }
  CHECK(rgb_hex({255, 0, 10}) == "#FF000A");
}

TEST_CASE("manifest parsing") {
  const std::string text =
      "utterance_id,speaker_id,session,emotion,audio_path\n"
      "u1,spk1,regular,Ang,a/u1.wav\n"
      "u2,spk1,phrase_free,Sur,a/u2.wav\n";
  const auto m = parse_manifest(text);
  REQUIRE(m.size() == 2);
  CHECK(m[1].session == Session::phrase_free);
  CHECK(m[1].emotion == Emotion::Sur);
  CHECK(parse_manifest(serialize_manifest(m)) == m);

  try {
    parse_manifest("utterance_id,speaker_id,session,emotion,audio_path\nu1,s,regular,Joy,x.wav\n");
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_manifest("id,speaker\n"), ValidationError);
}

TEST_CASE("annotation JSON lines") {
  const std::vector<AnnotationRecord> r{rec("u1", "a", 18, 0.75, 0.8), rec("u1", "b", 342, 0, 0)};
  const std::string text = serialize_annotations(r);
  CHECK(text.substr(0, text.find('\n')) ==
        R"({"utterance_id":"u1","annotator_id":"a","hue_deg":18.0,"saturation":0.75,"value":0.8,"submitted_at":"2025-03-01T12:00:00Z"})");
  CHECK(parse_annotations(text) == r);
  CHECK_THROWS_AS(parse_annotations(text + serialize_annotation(r[0]) + "\n"), ValidationError);
  CHECK_THROWS_AS(parse_annotation_line(R"({"utterance_id":"u","annotator_id":"a","hue_deg":400,"saturation":0,"value":0,"submitted_at":"2025-01-01T00:00:00Z"})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_annotation_line("{not json"), ValidationError);
}

TEST_CASE("aggregated labels CSV round trip keeps full precision") {
  const std::vector<AggregatedLabel> a{{"u1", {1.0 / 3.0, 0.1 + 0.2, 0.7}, 10, 12.5, 0.01, 0.02}};
  const auto back = parse_aggregated_labels(serialize_aggregated_labels(a));
  CHECK(back == a);
}

TEST_CASE("timestamps") {
  const auto t = text::parse_timestamp("2025-03-01T12:00:00.250Z");
  CHECK(text::format_timestamp(t) == "2025-03-01T12:00:00.250Z");
  CHECK(text::parse_timestamp("2025-03-01T12:00:00+00:00") == text::parse_timestamp("2025-03-01T12:00:00Z"));
  CHECK_THROWS_AS(text::parse_timestamp("2025-03-01 12:00"), ValidationError);
}
