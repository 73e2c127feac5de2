#pragma once

// Annotation store and the tile-based color options presented to annotators.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "colorser/labels.hpp"

namespace colorser::annotation {

inline constexpr std::size_t kHueOptionCount = 20;
inline constexpr double kHueStepDeg = 18.0;
inline constexpr std::array<double, 5> kSaturationLevels{0.0, 0.25, 0.5, 0.75, 1.0};
inline constexpr std::array<double, 5> kValueLevels{0.2, 0.4, 0.6, 0.8, 1.0};
/// 5 x 5 grid plus the black tile.
inline constexpr std::size_t kSvOptionCount = 26;
/// Submitted values are matched to tiles within this distance.
inline constexpr double kOptionTolerance = 1e-9;

struct SvOption {
  double saturation = 0.0;
  double value = 0.0;
};

std::array<double, kHueOptionCount> hue_options();
/// Grid order: saturation outer, value inner; the black tile (0, 0) last.
std::array<SvOption, kSvOptionCount> sv_options();

/// The on-grid color for a submission, with the black tile's saturation
/// normalized to 0. Empty when hue or (saturation, value) is off-grid.
std::optional<ColorLabel> snap_to_options(const ColorLabel& color);

/// CSV kind,hue_deg,saturation,value,hex covering every hue tile (S = V = 1),
/// every S/V tile at hue 0, and every hue x S/V combination.
std::string tile_fixture_csv();

struct TaskAssignment {
  std::string utterance_id;
  std::string audio_url;
};

nlohmann::json to_json(const TaskAssignment& task);

enum class SubmitStatus { accepted, duplicate, invalid_option, unknown_utterance, malformed };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::accepted;
  std::string message;
  /// The record as stored (only meaningful when accepted).
  AnnotationRecord record;
};

struct Progress {
  std::size_t total_utterances = 0;
  std::size_t fully_annotated = 0;
  std::size_t total_annotations = 0;
  std::map<std::string, std::size_t> per_annotator;
};

nlohmann::json to_json(const Progress& progress);

struct StoreOptions {
  std::size_t quorum = 10;
  std::uint64_t seed = 0;
};

/// Append-only JSON Lines store. The file is replayed at construction; a
/// trailing partial line left by an interrupted write is cut off. Mutations go
/// through one exclusive lock, reads share it.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<UtteranceMeta> metas, std::filesystem::path store_path, StoreOptions options = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  /// Uniform among the minimum-count utterances below quorum the annotator has
  /// not labeled. Deterministic for a given seed, annotator and store contents.
  std::optional<TaskAssignment> next_task(const std::string& annotator_id) const;

  /// Durably appended before returning accepted.
  SubmitResult submit(AnnotationRecord record);

  std::string export_jsonl() const;
  std::vector<AnnotationRecord> records() const;
  Progress progress() const;

  const UtteranceMeta* find_utterance(const std::string& utterance_id) const;
  std::size_t quorum() const { return options_.quorum; }

 private:
  void load();
  void append_line(const std::string& line);

  std::vector<UtteranceMeta> metas_;
  std::unordered_map<std::string, std::size_t> meta_index_;
  std::filesystem::path path_;
  StoreOptions options_;
  int fd_ = -1;

  mutable std::shared_mutex mutex_;
  std::vector<AnnotationRecord> records_;
  std::set<std::pair<std::string, std::string>> seen_;
  std::unordered_map<std::string, std::size_t> counts_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path audio_root;
  /// Static UI bundle mounted at "/"; skipped when empty or missing.
  std::filesystem::path ui_dir;
};

/// HTTP front end: /api/tasks/next, /api/audio/{id}, /api/annotations,
/// /api/export, /api/progress and the static UI at "/".
class Server {
 public:
  Server(AnnotationStore& store, ServerOptions options);
  ~Server();

  /// Returns the bound port; port 0 picks a free one. Throws IoError on failure.
  int bind();
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace colorser::annotation
