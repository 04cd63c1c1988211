// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace argcd {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VariableMeta {
  std::string name;
  std::string description;

  friend bool operator==(const VariableMeta&, const VariableMeta&) = default;
};

/// Discrete observational data: N rows of category codes over n variables.
/// Stored column-major; immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  /// `rows` is N x n. Throws DatasetError on any invariant violation.
  Dataset(std::vector<VariableMeta> variables, std::vector<int> cardinalities,
          const std::vector<std::vector<int>>& rows);
  Dataset(std::vector<VariableMeta> variables, std::vector<int> cardinalities,
          std::vector<std::vector<int>> columns, std::size_t num_rows);

  std::size_t num_rows() const noexcept { return num_rows_; }
  int num_vars() const noexcept { return static_cast<int>(variables_.size()); }
  int cardinality(int v) const { return cardinalities_.at(v); }
  const std::vector<int>& cardinalities() const noexcept { return cardinalities_; }
  int code(std::size_t row, int v) const { return columns_.at(v).at(row); }
  std::span<const int> column(int v) const { return columns_.at(v); }
  const std::vector<VariableMeta>& variables() const noexcept { return variables_; }
  std::vector<std::string> names() const;
  /// Index of the variable with this exact name, or -1.
  int index_of(std::string_view name) const;

  /// Column `order[i]` of this dataset becomes column i of the result.
  Dataset reordered(std::span<const int> order) const;

 private:
  void validate() const;

  std::vector<VariableMeta> variables_;
  std::vector<int> cardinalities_;
  std::vector<std::vector<int>> columns_;
  std::size_t num_rows_ = 0;
};

/// CSV with a header row of variable names and integer codes. The optional
/// sidecar JSON may carry {"descriptions": {name: text}, "cardinalities": {name: int}};
/// cardinalities not listed there default to max(code) + 1, floored at 2.
Dataset read_dataset_csv(const std::filesystem::path& csv,
                         const std::optional<std::filesystem::path>& sidecar = std::nullopt);

void write_dataset_csv(const Dataset& d, const std::filesystem::path& csv);

}  // namespace argcd
