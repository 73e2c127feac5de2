#include "colorser/features.hpp"

#include <cmath>

#include "colorser/error.hpp"
#include "colorser/svr.hpp"
#include "colorser/text_io.hpp"

namespace colorser {
namespace {

std::size_t check_header(const std::vector<std::string>& header, FeatureKind kind) {
  const std::size_t fixed = kind == FeatureKind::frame_level ? 2 : 1;
  if (header.empty() || header[0] != "utterance_id") throw ValidationError("features line 1: first column must be utterance_id");
  if (kind == FeatureKind::frame_level && (header.size() < 2 || header[1] != "frame_index")) {
    throw ValidationError("features line 1: second column must be frame_index for frame-level files");
  }
  if (header.size() <= fixed) throw ValidationError("features line 1: no feature columns");
  for (std::size_t i = fixed; i < header.size(); ++i) {
    if (header[i] != "f" + std::to_string(i - fixed)) {
      throw ValidationError("features line 1: expected column f" + std::to_string(i - fixed) + ", got '" + header[i] + "'");
    }
  }
  return header.size() - fixed;
}

}  // namespace

FeatureSet::FeatureSet(FeatureKind kind, std::size_t dimension) : kind_(kind), dimension_(dimension) {
  if (dimension == 0) throw ValidationError("FeatureSet: zero dimension");
}

void FeatureSet::add(const std::string& id, Matrix frames) {
  if (id.empty()) throw ValidationError("FeatureSet: empty utterance id");
  if (contains(id)) throw ValidationError("FeatureSet: duplicate utterance id '" + id + "'");
  if (frames.cols() != dimension_) {
    throw ValidationError("FeatureSet: '" + id + "' has width " + std::to_string(frames.cols()) + ", expected " +
                          std::to_string(dimension_));
  }
  if (frames.rows() == 0) throw ValidationError("FeatureSet: '" + id + "' has no frames");
  if (kind_ == FeatureKind::utterance_level && frames.rows() != 1) {
    throw ValidationError("FeatureSet: utterance-level entry '" + id + "' must be a single row");
  }
  for (double v : frames.values()) {
    if (!std::isfinite(v)) throw ValidationError("FeatureSet: non-finite value for '" + id + "'");
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  rows_.push_back(std::move(frames));
}

const Matrix& FeatureSet::frames(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("FeatureSet: no features for '" + id + "'");
  return rows_[it->second];
}

std::span<const double> FeatureSet::vector(const std::string& id) const {
  if (kind_ != FeatureKind::utterance_level) throw ValidationError("FeatureSet: pool frame-level features first");
  return frames(id).row(0);
}

FeatureSet FeatureSet::pooled() const {
  FeatureSet out(FeatureKind::utterance_level, dimension_);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    out.add(ids_[i], Matrix(1, dimension_, svr::temporal_average_pooling(rows_[i])));
  }
  return out;
}

Matrix FeatureSet::gather(std::span<const std::string> ids) const {
  Matrix out(ids.size(), dimension_);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = vector(ids[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

FeatureSet parse_features(std::string_view text, FeatureKind kind) {
  const auto lines = text::split_lines(text);
  if (lines.empty()) throw ValidationError("features: missing header");
  const std::size_t dim = check_header(text::split_csv_line(lines[0]), kind);
  const std::size_t fixed = kind == FeatureKind::frame_level ? 2 : 1;
  FeatureSet set(kind, dim);

  std::string current_id;
  std::vector<double> current_values;
  std::size_t current_frames = 0;
  const auto flush = [&]() {
    if (current_frames == 0) return;
    set.add(current_id, Matrix(current_frames, dim, std::move(current_values)));
    current_values.clear();
    current_frames = 0;
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = "features line " + std::to_string(i + 1);
    const auto fields = text::split_csv_line(lines[i]);
    if (fields.size() != dim + fixed) {
      throw ValidationError(where + ": expected " + std::to_string(dim + fixed) + " fields, got " +
                            std::to_string(fields.size()) + " (ragged row)");
    }
    try {
      const std::string& id = fields[0];
      if (kind == FeatureKind::utterance_level || id != current_id) {
        flush();
        if (set.contains(id)) throw ValidationError("duplicate or non-contiguous utterance id '" + id + "'");
        current_id = id;
      }
      if (kind == FeatureKind::frame_level) {
        const double index = text::parse_double(fields[1], "frame_index");
        if (index != static_cast<double>(current_frames)) {
          throw ValidationError("frame_index " + fields[1] + " out of order, expected " + std::to_string(current_frames));
        }
      }
      for (std::size_t c = fixed; c < fields.size(); ++c) current_values.push_back(text::parse_double(fields[c], "feature"));
      ++current_frames;
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  flush();
  return set;
}

FeatureSet load_features(const std::filesystem::path& path, FeatureKind kind) {
  return parse_features(text::read_file(path), kind);
}

std::string serialize_features(const FeatureSet& features) {
  std::string out = "utterance_id";
  if (features.kind() == FeatureKind::frame_level) out += ",frame_index";
  for (std::size_t d = 0; d < features.dimension(); ++d) out += ",f" + std::to_string(d);
  out += '\n';
  for (const auto& id : features.ids()) {
    const Matrix& m = features.frames(id);
    for (std::size_t t = 0; t < m.rows(); ++t) {
      out += id;
      if (features.kind() == FeatureKind::frame_level) out += ',' + std::to_string(t);
      for (double v : m.row(t)) out += ',' + text::format_full(v);
      out += '\n';
    }
  }
  return out;
}

}  // namespace colorser
