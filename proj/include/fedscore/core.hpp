#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedscore/error.hpp"

namespace fedscore {

/// Column index of a label inside the experiment-wide LabelSpace.
struct LabelId {
  std::uint16_t value = 0;

  constexpr auto operator<=>(const LabelId&) const = default;
};

using LabelSet = std::vector<LabelId>;

/// Ordered, fixed set of label names shared by every participant.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& name(LabelId id) const;
  LabelId index(const std::string& label) const;
  bool contains(const std::string& label) const { return lookup_.count(label) != 0; }
  const std::vector<std::string>& names() const noexcept { return labels_; }

  /// All labels in space order.
  LabelSet all() const;
  /// Resolves names and returns them sorted in space order.
  LabelSet resolve(const std::vector<std::string>& names) const;

  bool operator==(const LabelSpace& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, LabelId> lookup_;
};

/// Row-major feature matrix with one label per row.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> features;
  std::vector<LabelId> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t r) const {
    return {features.data() + r * n_features, n_features};
  }
  std::span<double> row(std::size_t r) { return {features.data() + r * n_features, n_features}; }

  void append(std::span<const double> x, LabelId y);
  /// Checks shape consistency and that every label is inside `space`.
  void validate(const LabelSpace& space) const;
};

/// Per-example, per-label scores of a model over a dataset.
///
/// Columns are a non-empty subset of the LabelSpace kept in ascending label
/// order; values are finite and stored row-major.
class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t rows, LabelSet cols, std::vector<double> values);
  static ScoreMatrix zeros(std::size_t rows, LabelSet cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t n_cols() const noexcept { return cols_.size(); }
  const LabelSet& cols() const noexcept { return cols_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_.size(), cols_.size()};
  }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_.size() + c]; }

  /// Position of `label` among the columns, or npos.
  std::size_t column_of(LabelId label) const noexcept;
  bool has_column(LabelId label) const noexcept { return column_of(label) != npos; }

  /// Copies column `label` into a contiguous vector.
  std::vector<double> column(LabelId label) const;

  bool operator==(const ScoreMatrix& other) const = default;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t rows_;
  LabelSet cols_;
  std::vector<double> values_;
};

/// Coordinator consensus scores over the full label space and public set.
struct GlobalScoreState {
  int iteration = 0;
  ScoreMatrix scores;

  /// f_G^0: all zeros.
  static GlobalScoreState initial(std::size_t public_rows, const LabelSpace& space);
};

/// Projects `s` onto `subset` (sorted into label order). Throws UnknownLabel
/// when a requested label is not a column of `s`.
ScoreMatrix restrict_columns(const ScoreMatrix& s, LabelSet subset);

/// Candidate with the highest score; ties go to the lowest label index.
LabelId argmax_label(std::span<const double> row, std::span<const LabelId> candidates);

}  // namespace fedscore
