// SPDX-License-Identifier: Apache-2.0

#include "argcd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace argcd {

Dataset::Dataset(std::vector<VariableMeta> variables, std::vector<int> cardinalities,
                 const std::vector<std::vector<int>>& rows)
    : variables_(std::move(variables)), cardinalities_(std::move(cardinalities)), num_rows_(rows.size()) {
  columns_.assign(variables_.size(), std::vector<int>(num_rows_));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != variables_.size()) {
      throw DatasetError("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                         " values, expected " + std::to_string(variables_.size()));
    }
    for (std::size_t v = 0; v < variables_.size(); ++v) columns_[v][r] = rows[r][v];
  }
  validate();
}

Dataset::Dataset(std::vector<VariableMeta> variables, std::vector<int> cardinalities,
                 std::vector<std::vector<int>> columns, std::size_t num_rows)
    : variables_(std::move(variables)),
      cardinalities_(std::move(cardinalities)),
      columns_(std::move(columns)),
      num_rows_(num_rows) {
  validate();
}

void Dataset::validate() const {
  if (num_rows_ < 1) throw DatasetError("dataset needs at least one row");
  if (variables_.empty()) throw DatasetError("dataset needs at least one variable");
  if (cardinalities_.size() != variables_.size() || columns_.size() != variables_.size()) {
    throw DatasetError("variables, cardinalities and columns disagree in length");
  }
  std::set<std::string> seen;
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    const auto& name = variables_[v].name;
    if (name.empty()) throw DatasetError("empty variable name at column " + std::to_string(v));
    if (!seen.insert(name).second) throw DatasetError("duplicate variable name '" + name + "'");
    if (cardinalities_[v] < 2) throw DatasetError("variable '" + name + "' needs cardinality >= 2");
    if (columns_[v].size() != num_rows_) throw DatasetError("column '" + name + "' has wrong length");
    for (int c : columns_[v]) {
      if (c < 0 || c >= cardinalities_[v]) {
        throw DatasetError("code " + std::to_string(c) + " out of range for variable '" + name + "'");
      }
    }
  }
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  out.reserve(variables_.size());
  for (const auto& v : variables_) out.push_back(v.name);
  return out;
}

int Dataset::index_of(std::string_view name) const {
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    if (variables_[v].name == name) return static_cast<int>(v);
  }
  return -1;
}

Dataset Dataset::reordered(std::span<const int> order) const {
  if (order.size() != variables_.size()) throw DatasetError("reorder permutation has wrong length");
  std::vector<VariableMeta> vars;
  std::vector<int> cards;
  std::vector<std::vector<int>> cols;
  for (int v : order) {
    vars.push_back(variables_.at(v));
    cards.push_back(cardinalities_.at(v));
    cols.push_back(columns_.at(v));
  }
  return Dataset(std::move(vars), std::move(cards), std::move(cols), num_rows_);
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  out.push_back(trim(cell));
  return out;
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& csv, const std::optional<std::filesystem::path>& sidecar) {
  std::ifstream in(csv);
  if (!in) throw DatasetError("cannot open dataset " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("dataset " + csv.string() + " is empty");
  auto header = split_csv(line);
  const std::size_t n = header.size();
  std::vector<std::vector<int>> columns(n);
  std::size_t lineno = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != n) {
      throw DatasetError(csv.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(n) +
                         " fields, got " + std::to_string(cells.size()));
    }
    for (std::size_t v = 0; v < n; ++v) {
      int value = 0;
      const auto& cell = cells[v];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || value < 0) {
        throw DatasetError(csv.string() + ":" + std::to_string(lineno) + ": '" + cell +
                           "' is not a non-negative integer code");
      }
      columns[v].push_back(value);
    }
    ++rows;
  }

  std::vector<VariableMeta> vars;
  for (auto& name : header) vars.push_back({name, ""});
  std::vector<int> cards(n, 2);
  for (std::size_t v = 0; v < n; ++v) {
    for (int c : columns[v]) cards[v] = std::max(cards[v], c + 1);
  }
  if (sidecar) {
    std::ifstream sin(*sidecar);
    if (!sin) throw DatasetError("cannot open sidecar " + sidecar->string());
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(sin);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("invalid sidecar JSON: " + std::string(e.what()));
    }
    for (std::size_t v = 0; v < n; ++v) {
      const auto& name = vars[v].name;
      if (meta.contains("descriptions") && meta["descriptions"].contains(name)) {
        vars[v].description = meta["descriptions"][name].get<std::string>();
      }
      if (meta.contains("cardinalities") && meta["cardinalities"].contains(name)) {
        cards[v] = meta["cardinalities"][name].get<int>();
      }
    }
  }
  return Dataset(std::move(vars), std::move(cards), std::move(columns), rows);
}

void write_dataset_csv(const Dataset& d, const std::filesystem::path& csv) {
  std::ofstream out(csv);
  if (!out) throw DatasetError("cannot write " + csv.string());
  auto names = d.names();
  for (std::size_t v = 0; v < names.size(); ++v) out << (v ? "," : "") << names[v];
  out << '\n';
  std::string row;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    row.clear();
    for (int v = 0; v < d.num_vars(); ++v) {
      if (v) row.push_back(',');
      row += std::to_string(d.code(r, v));
    }
    row.push_back('\n');
    out << row;
  }
}

}  // namespace argcd
