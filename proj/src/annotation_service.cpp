#include "colorser/annotation_service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <mutex>

#include "colorser/error.hpp"
#include "colorser/neural.hpp"
#include "colorser/text_io.hpp"

namespace colorser::annotation {
namespace {

std::optional<double> match(double x, std::span<const double> levels) {
  for (double level : levels) {
    if (std::abs(x - level) <= kOptionTolerance) return level;
  }
  return std::nullopt;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::array<double, kHueOptionCount> hue_options() {
  std::array<double, kHueOptionCount> out{};
  for (std::size_t i = 0; i < kHueOptionCount; ++i) out[i] = static_cast<double>(i) * kHueStepDeg;
  return out;
}

std::array<SvOption, kSvOptionCount> sv_options() {
  std::array<SvOption, kSvOptionCount> out{};
  std::size_t k = 0;
  for (double s : kSaturationLevels) {
    for (double v : kValueLevels) out[k++] = {s, v};
  }
  out[k] = {0.0, 0.0};
  return out;
}

std::optional<ColorLabel> snap_to_options(const ColorLabel& color) {
  const auto hues = hue_options();
  const auto hue = match(color.hue_deg, hues);
  if (!hue) return std::nullopt;
  if (!std::isfinite(color.saturation) || !std::isfinite(color.value)) return std::nullopt;
  if (std::abs(color.value) <= kOptionTolerance) {
    if (color.saturation < -kOptionTolerance || color.saturation > 1.0 + kOptionTolerance) return std::nullopt;
    return ColorLabel{*hue, 0.0, 0.0};
  }
  const auto s = match(color.saturation, kSaturationLevels);
  const auto v = match(color.value, kValueLevels);
  if (!s || !v) return std::nullopt;
  return ColorLabel{*hue, *s, *v};
}

std::string tile_fixture_csv() {
  std::string out = "kind,hue_deg,saturation,value,hex\n";
  const auto row = [&](const char* kind, const ColorLabel& c) {
    out += std::string(kind) + "," + text::format_table(c.hue_deg) + "," + text::format_table(c.saturation) + "," +
           text::format_table(c.value) + "," + rgb_hex(hsv_to_rgb(c)) + "\n";
  };
  for (double h : hue_options()) row("hue", {h, 1.0, 1.0});
  for (const auto& sv : sv_options()) row("sv", {0.0, sv.saturation, sv.value});
  for (double h : hue_options()) {
    for (const auto& sv : sv_options()) row("grid", {h, sv.saturation, sv.value});
  }
  return out;
}

nlohmann::json to_json(const TaskAssignment& task) {
  nlohmann::json sv_grid = nlohmann::json::array();
  for (double s : kSaturationLevels) {
    for (double v : kValueLevels) sv_grid.push_back({{"saturation", s}, {"value", v}});
  }
  const auto hues = hue_options();
  return {{"utterance_id", task.utterance_id},
          {"audio_url", task.audio_url},
          {"hue_options", std::vector<double>(hues.begin(), hues.end())},
          {"sv_grid", sv_grid},
          {"extra_option", {{"saturation", nullptr}, {"value", 0.0}}}};
}

nlohmann::json to_json(const Progress& p) {
  return {{"total_utterances", p.total_utterances},
          {"fully_annotated", p.fully_annotated},
          {"total_annotations", p.total_annotations},
          {"per_annotator", p.per_annotator}};
}

AnnotationStore::AnnotationStore(std::vector<UtteranceMeta> metas, std::filesystem::path store_path,
                                 StoreOptions options)
    : metas_(std::move(metas)), path_(std::move(store_path)), options_(options) {
  if (options_.quorum == 0) throw ValidationError("quorum must be positive");
  for (std::size_t i = 0; i < metas_.size(); ++i) {
    if (!meta_index_.emplace(metas_[i].utterance_id, i).second) {
      throw ValidationError("duplicate utterance id in manifest: " + metas_[i].utterance_id);
    }
  }
  load();
}

AnnotationStore::~AnnotationStore() {
  if (fd_ >= 0) ::close(fd_);
}

void AnnotationStore::load() {
  std::string contents;
  if (std::filesystem::exists(path_)) contents = text::read_file(path_);
  // Anything after the last newline is an interrupted append.
  const std::size_t keep = contents.empty() ? 0 : contents.rfind('\n') == std::string::npos ? 0 : contents.rfind('\n') + 1;
  const std::string_view complete(contents.data(), keep);

  records_ = parse_annotations(complete);
  for (const auto& r : records_) {
    seen_.emplace(r.utterance_id, r.annotator_id);
    ++counts_[r.utterance_id];
  }

  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open annotation store " + path_.string() + ": " + errno_text());
  if (keep != contents.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0 || ::fsync(fd_) != 0) {
      throw IoError("cannot trim partial record in " + path_.string() + ": " + errno_text());
    }
  }
}

void AnnotationStore::append_line(const std::string& line) {
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw IoError("fstat failed: " + errno_text());
  const off_t before = st.st_size;
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = errno_text();
      [[maybe_unused]] const int rc = ::ftruncate(fd_, before);
      throw IoError("append to annotation store failed: " + why);
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    const std::string why = errno_text();
    [[maybe_unused]] const int rc = ::ftruncate(fd_, before);
    throw IoError("fsync of annotation store failed: " + why);
  }
}

std::optional<TaskAssignment> AnnotationStore::next_task(const std::string& annotator_id) const {
  if (annotator_id.empty()) throw ValidationError("annotator_id must be non-empty");
  std::shared_lock lock(mutex_);
  std::vector<const UtteranceMeta*> candidates;
  std::size_t best = options_.quorum;
  for (const auto& m : metas_) {
    const auto it = counts_.find(m.utterance_id);
    const std::size_t count = it == counts_.end() ? 0 : it->second;
    if (count >= options_.quorum || seen_.count({m.utterance_id, annotator_id})) continue;
    if (count < best) {
      best = count;
      candidates.clear();
    }
    if (count == best) candidates.push_back(&m);
  }
  if (candidates.empty()) return std::nullopt;
  neural::Rng rng(options_.seed ^ fnv1a(annotator_id) ^ (records_.size() * 0x9E3779B97F4A7C15ULL));
  const UtteranceMeta* pick = candidates[rng.below(candidates.size())];
  return TaskAssignment{pick->utterance_id, "/api/audio/" + pick->utterance_id};
}

SubmitResult AnnotationStore::submit(AnnotationRecord record) {
  if (record.utterance_id.empty() || record.annotator_id.empty()) {
    return {SubmitStatus::malformed, "utterance_id and annotator_id must be non-empty", {}};
  }
  if (!meta_index_.count(record.utterance_id)) {
    return {SubmitStatus::unknown_utterance, "unknown utterance '" + record.utterance_id + "'", {}};
  }
  const auto color = snap_to_options(record.color);
  if (!color) return {SubmitStatus::invalid_option, "invalid option", {}};
  record.color = *color;

  std::unique_lock lock(mutex_);
  if (seen_.count({record.utterance_id, record.annotator_id})) {
    return {SubmitStatus::duplicate, "already annotated", {}};
  }
  append_line(serialize_annotation(record) + "\n");
  seen_.emplace(record.utterance_id, record.annotator_id);
  ++counts_[record.utterance_id];
  records_.push_back(record);
  return {SubmitStatus::accepted, "", record};
}

std::string AnnotationStore::export_jsonl() const {
  std::shared_lock lock(mutex_);
  return serialize_annotations(records_);
}

std::vector<AnnotationRecord> AnnotationStore::records() const {
  std::shared_lock lock(mutex_);
  return records_;
}

Progress AnnotationStore::progress() const {
  std::shared_lock lock(mutex_);
  Progress p;
  p.total_utterances = metas_.size();
  p.total_annotations = records_.size();
  for (const auto& m : metas_) {
    const auto it = counts_.find(m.utterance_id);
    if (it != counts_.end() && it->second >= options_.quorum) ++p.fully_annotated;
  }
  for (const auto& r : records_) ++p.per_annotator[r.annotator_id];
  return p;
}

const UtteranceMeta* AnnotationStore::find_utterance(const std::string& utterance_id) const {
  const auto it = meta_index_.find(utterance_id);
  return it == meta_index_.end() ? nullptr : &metas_[it->second];
}

}  // namespace colorser::annotation
