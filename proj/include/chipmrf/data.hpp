#ifndef CHIPMRF_DATA_HPP
#define CHIPMRF_DATA_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chain.hpp"
#include "distributions.hpp"
#include "error.hpp"

namespace chipmrf {

struct Bin {
  std::string chrom;
  std::uint64_t start;
  std::uint64_t end;
  std::size_t segment;

  bool operator==(const Bin &) const = default;
};

/// Counts indexed by bin x column. Columns are stored contiguously.
class CountMatrix {
public:
  CountMatrix() = default;
  CountMatrix(std::vector<Bin> bins, std::vector<std::string> labels)
      : bins_(std::move(bins)), labels_(std::move(labels)),
        columns_(labels_.size(), std::vector<count_t>(bins_.size(), 0)) {}

  std::size_t n_bins() const { return bins_.size(); }
  std::size_t n_columns() const { return labels_.size(); }

  const std::vector<Bin> &bins() const { return bins_; }
  const std::vector<std::string> &labels() const { return labels_; }

  std::span<const count_t> column(std::size_t j) const { return columns_.at(j); }
  std::span<count_t> column(std::size_t j) { return columns_.at(j); }

  void add_column(std::string label, std::vector<count_t> values) {
    if (values.size() != bins_.size())
      throw dimension_error("column '" + label + "' has " +
                            std::to_string(values.size()) + " values, expected " +
                            std::to_string(bins_.size()));
    if (std::find(labels_.begin(), labels_.end(), label) != labels_.end())
      throw dimension_error("duplicate column label '" + label + "'");
    labels_.push_back(std::move(label));
    columns_.push_back(std::move(values));
  }

  std::size_t column_index(const std::string &label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end())
      throw dimension_error("no data column named '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  /// Maximal runs of bins sharing a segment id.
  std::vector<Segment> segments() const {
    std::vector<Segment> out;
    for (std::size_t m = 0; m < bins_.size(); ++m) {
      if (m == 0 || bins_[m].segment != bins_[m - 1].segment)
        out.push_back({m, m + 1});
      else
        out.back().end = m + 1;
    }
    return out;
  }

  bool operator==(const CountMatrix &) const = default;

private:
  std::vector<Bin> bins_;
  std::vector<std::string> labels_;
  std::vector<std::vector<count_t>> columns_;
};

/// Contiguous bins [start, start + width) along one chromosome, one segment.
inline std::vector<Bin> tile_bins(const std::string &chrom, std::uint64_t length,
                                  std::uint64_t width, std::size_t segment = 0,
                                  std::uint64_t offset = 0) {
  if (width == 0)
    throw invalid_parameter("bin width must be at least 1");
  std::vector<Bin> bins;
  bins.reserve(length / width + 1);
  for (std::uint64_t s = offset; s < offset + length; s += width)
    bins.push_back({chrom, s, std::min(s + width, offset + length), segment});
  return bins;
}

struct Condition {
  std::string label;
  std::string antibody;
  std::vector<std::string> replicates; // data column labels
};

struct ExperimentDesign {
  std::vector<Condition> conditions;
  std::uint64_t bin_width = 200;

  /// A design with one condition per data column.
  static ExperimentDesign one_per_column(const CountMatrix &m) {
    ExperimentDesign d;
    for (const auto &l : m.labels())
      d.conditions.push_back({l, "", {l}});
    return d;
  }

  /// A single condition holding every data column as a replicate.
  static ExperimentDesign pooled(const CountMatrix &m, std::string label = "c1") {
    ExperimentDesign d;
    d.conditions.push_back({std::move(label), "", m.labels()});
    return d;
  }

  std::size_t condition_index(const std::string &label) const {
    for (std::size_t c = 0; c < conditions.size(); ++c)
      if (conditions[c].label == label)
        return c;
    throw dimension_error("no condition named '" + label + "'");
  }
};

/// Checks the design against a matrix and returns, per condition, the
/// column indices of its replicates in design order.
inline std::vector<std::vector<std::size_t>>
resolve_design(const ExperimentDesign &design, const CountMatrix &data) {
  if (design.bin_width < 1)
    throw invalid_parameter("bin width must be at least 1");
  if (design.conditions.empty())
    throw dimension_error("design has no conditions");
  std::vector<int> used(data.n_columns(), 0);
  std::vector<std::vector<std::size_t>> out;
  for (const auto &c : design.conditions) {
    if (c.replicates.empty())
      throw dimension_error("condition '" + c.label + "' has no replicates");
    std::vector<std::size_t> cols;
    for (const auto &r : c.replicates) {
      const auto j = data.column_index(r);
      if (used[j]++)
        throw dimension_error("data column '" + r + "' mapped more than once");
      cols.push_back(j);
    }
    out.push_back(std::move(cols));
  }
  for (std::size_t j = 0; j < used.size(); ++j)
    if (!used[j])
      throw dimension_error("data column '" + data.labels()[j] +
                            "' is not mapped by the design");
  return out;
}

} // namespace chipmrf

#endif
