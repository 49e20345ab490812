#include "fedscore/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedscore {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyCandidates: return "EmptyCandidates";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::PoolExhausted: return "PoolExhausted";
    case ErrorKind::InvalidArch: return "InvalidArch";
    case ErrorKind::LabelOutsideCols: return "LabelOutsideCols";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyShard: return "EmptyShard";
    case ErrorKind::UnclaimedLabel: return "UnclaimedLabel";
    case ErrorKind::NoParticipants: return "NoParticipants";
    case ErrorKind::NoEligibleExamples: return "NoEligibleExamples";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

LabelSpace::LabelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error(ErrorKind::InvalidArgument, "label space is empty");
  if (labels_.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorKind::InvalidArgument, "too many labels");
  }
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    if (labels_[k].empty()) throw Error(ErrorKind::InvalidArgument, "empty label name");
    auto [it, inserted] = lookup_.emplace(labels_[k], LabelId{static_cast<std::uint16_t>(k)});
    if (!inserted) throw Error(ErrorKind::InvalidArgument, "duplicate label '" + labels_[k] + "'");
  }
}

const std::string& LabelSpace::name(LabelId id) const {
  if (id.value >= labels_.size()) {
    throw Error(ErrorKind::UnknownLabel, "label index " + std::to_string(id.value));
  }
  return labels_[id.value];
}

LabelId LabelSpace::index(const std::string& label) const {
  auto it = lookup_.find(label);
  if (it == lookup_.end()) throw Error(ErrorKind::UnknownLabel, "'" + label + "'");
  return it->second;
}

LabelSet LabelSpace::all() const {
  LabelSet out(labels_.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = LabelId{static_cast<std::uint16_t>(k)};
  return out;
}

LabelSet LabelSpace::resolve(const std::vector<std::string>& names) const {
  LabelSet out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(index(n));
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw Error(ErrorKind::InvalidArgument, "duplicate label in subset");
  }
  return out;
}

void Dataset::append(std::span<const double> x, LabelId y) {
  if (x.size() != n_features) {
    throw Error(ErrorKind::ShapeMismatch, "row has " + std::to_string(x.size()) +
                                              " features, expected " + std::to_string(n_features));
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(y);
}

void Dataset::validate(const LabelSpace& space) const {
  if (features.size() != labels.size() * n_features) {
    throw Error(ErrorKind::ShapeMismatch, "feature buffer does not match row count");
  }
  for (auto y : labels) {
    if (y.value >= space.size()) {
      throw Error(ErrorKind::UnknownLabel, "label index " + std::to_string(y.value));
    }
  }
}

ScoreMatrix::ScoreMatrix(std::size_t rows, LabelSet cols, std::vector<double> values)
    : rows_(rows), cols_(std::move(cols)), values_(std::move(values)) {
  if (cols_.empty()) throw Error(ErrorKind::ShapeMismatch, "score matrix needs at least one column");
  if (!std::is_sorted(cols_.begin(), cols_.end()) ||
      std::adjacent_find(cols_.begin(), cols_.end()) != cols_.end()) {
    throw Error(ErrorKind::ShapeMismatch, "score columns must be unique and in label order");
  }
  if (values_.size() != rows_ * cols_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "value buffer does not match rows x cols");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite score");
  }
}

ScoreMatrix ScoreMatrix::zeros(std::size_t rows, LabelSet cols) {
  const std::size_t n = rows * cols.size();
  return ScoreMatrix(rows, std::move(cols), std::vector<double>(n, 0.0));
}

std::size_t ScoreMatrix::column_of(LabelId label) const noexcept {
  auto it = std::lower_bound(cols_.begin(), cols_.end(), label);
  if (it == cols_.end() || *it != label) return npos;
  return static_cast<std::size_t>(it - cols_.begin());
}

std::vector<double> ScoreMatrix::column(LabelId label) const {
  const std::size_t c = column_of(label);
  if (c == npos) throw Error(ErrorKind::UnknownLabel, "label index " + std::to_string(label.value));
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = values_[r * cols_.size() + c];
  return out;
}

GlobalScoreState GlobalScoreState::initial(std::size_t public_rows, const LabelSpace& space) {
  return GlobalScoreState{0, ScoreMatrix::zeros(public_rows, space.all())};
}

ScoreMatrix restrict_columns(const ScoreMatrix& s, LabelSet subset) {
  std::sort(subset.begin(), subset.end());
  std::vector<std::size_t> src(subset.size());
  for (std::size_t k = 0; k < subset.size(); ++k) {
    src[k] = s.column_of(subset[k]);
    if (src[k] == ScoreMatrix::npos) {
      throw Error(ErrorKind::UnknownLabel,
                  "label index " + std::to_string(subset[k].value) + " is not a column");
    }
  }
  std::vector<double> values;
  values.reserve(s.rows() * subset.size());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    for (auto c : src) values.push_back(row[c]);
  }
  return ScoreMatrix(s.rows(), std::move(subset), std::move(values));
}

LabelId argmax_label(std::span<const double> row, std::span<const LabelId> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::EmptyCandidates, "no candidate labels");
  if (row.size() != candidates.size()) {
    throw Error(ErrorKind::ShapeMismatch, "score row and candidate list differ in length");
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best] || (row[k] == row[best] && candidates[k] < candidates[best])) best = k;
  }
  return candidates[best];
}

}  // namespace fedscore
