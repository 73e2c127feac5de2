#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colorser/matrix.hpp"

namespace colorser {

enum class FeatureKind { utterance_level, frame_level };

/// Utterance id -> feature rows. Utterance-level sets hold one row per id;
/// frame-level sets hold a T x D frame matrix per id. Insertion order is kept.
class FeatureSet {
 public:
  FeatureSet(FeatureKind kind, std::size_t dimension);

  FeatureKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  /// Throws ValidationError on duplicate ids, width mismatch, empty frame
  /// sets or non-finite values.
  void add(const std::string& id, Matrix frames);

  const Matrix& frames(const std::string& id) const;
  /// The single row of an utterance-level entry.
  std::span<const double> vector(const std::string& id) const;

  /// Utterance-level copy; frame-level entries are average-pooled over time.
  FeatureSet pooled() const;

  /// Stacks utterance-level rows for the given ids.
  Matrix gather(std::span<const std::string> ids) const;

 private:
  FeatureKind kind_;
  std::size_t dimension_;
  std::vector<std::string> ids_;
  std::vector<Matrix> rows_;
  std::map<std::string, std::size_t> index_;
};

/// Utterance level: header utterance_id,f0,...,f{D-1}.
/// Frame level: header utterance_id,frame_index,f0,...,f{D-1}; frames of one
/// utterance contiguous with frame_index 0, 1, 2, ...
FeatureSet parse_features(std::string_view text, FeatureKind kind);
FeatureSet load_features(const std::filesystem::path& path, FeatureKind kind);
std::string serialize_features(const FeatureSet& features);

}  // namespace colorser
