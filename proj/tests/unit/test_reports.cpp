#include <doctest.h>

#include <filesystem>

#include "colorser/error.hpp"
#include "colorser/reports.hpp"
#include "colorser/text_io.hpp"

using namespace colorser;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("colorser_reports_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

experiment::RunReport one_utterance_report() {
  experiment::RunReport r;
  r.experiment = "experiment1";
  r.config = nlohmann::json::object();
  r.fold_speakers = {"spk"};
  experiment::SettingResult s;
  s.name = "SVR (test)";
  experiment::UtterancePrediction p;
  p.utterance_id = "u1";
  p.speaker_id = "spk";
  p.emotion = Emotion::Ang;
  p.truth = {0, 1, 1};
  p.has_regression = true;
  p.hue_deg = 120;
  p.saturation = 1;
  p.value = 1;
  s.predictions.push_back(p);
  experiment::finalize_setting(s);
  r.settings.push_back(s);
  return r;
}

}  // namespace

TEST_CASE("scatter rows carry hex colors") {
  const auto r = one_utterance_report();
  const auto csv = reports::scatter_csv(r, "hue");
  const auto lines = text::split_lines(csv);
  REQUIRE(lines.size() >= 2);
  CHECK(lines[1] == "SVR (test),u1,spk,Ang,0,120,#FF0000,#00FF00");
  CHECK_THROWS_AS(reports::scatter_csv(r, "chroma"), ValidationError);
}

TEST_CASE("emit_reports writes every table") {
  TempDir dir;
  const auto r = one_utterance_report();
  const std::vector<AggregatedLabel> labels{{"u1", {0, 1, 1}, 10, 0, 0, 0}, {"u2", {20, 0.5, 0.5}, 10, 0, 0, 0}};
  const std::vector<UtteranceMeta> metas{{"u1", "spk", Session::phrase_free, Emotion::Ang, "u1.wav"},
                                         {"u2", "spk", Session::regular, Emotion::Ang, "u2.wav"}};
  const auto written = reports::emit_reports(r, labels, metas, dir.path);
  for (const char* name : {"report.json", "metrics.csv", "metrics.json", "scatter_hue.csv", "scatter_saturation.csv",
                           "scatter_value.csv", "scatter.json", "hue_histogram.csv", "hue_histogram.json",
                           "sv_distribution.csv", "sv_distribution.json"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(dir.path / name));
  }
  for (const char* attr : {"scatter_hue.csv", "scatter_value.csv"}) {
    CHECK(text::split_lines(text::read_file(dir.path / attr)).size() == 2);  // header, row
  }
  const auto hist = nlohmann::json::parse(text::read_file(dir.path / "hue_histogram.json"));
  std::size_t total = 0;
  for (auto c : hist["emotions"]["Ang"]["counts"]) total += c.get<std::size_t>();
  CHECK(total == 2);
  CHECK(hist["emotions"]["Ang"]["counts"][0] == 1);
  CHECK(hist["emotions"]["Ang"]["counts"][1] == 1);
}

TEST_CASE("unwritable output is an I/O error") {
  TempDir dir;
  std::filesystem::create_directories(dir.path);
  text::write_file(dir.path / "file", "x");
  const std::vector<AggregatedLabel> labels;
  const std::vector<UtteranceMeta> metas;
  CHECK_THROWS_AS(reports::emit_reports(one_utterance_report(), labels, metas, dir.path / "file" / "sub"), IoError);
}

TEST_CASE("stats JSON") {
  const std::vector<AggregatedLabel> labels{{"u1", {46, 0.8, 0.9}, 10, 40, 0.2, 0.1},
                                            {"u2", {46, 0.6, 0.7}, 10, 60, 0.1, 0.3}};
  const std::vector<UtteranceMeta> metas{{"u1", "s", Session::regular, Emotion::Hap, "a.wav"},
                                         {"u2", "s", Session::regular, Emotion::Hap, "b.wav"}};
  const auto j = reports::stats_to_json(labels, metas);
  CHECK(j["agreement"]["mean_hue_circ_std_deg"].get<double>() == doctest::Approx(50.0));
  CHECK(j["emotions"]["Hap"]["mean_hue_deg"].get<double>() == doctest::Approx(46.0));
  CHECK(j["emotions"]["Ang"]["mean_hue_deg"].is_null());
}
