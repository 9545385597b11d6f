#include "churn/tabular.hpp"

#include "churn/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace churn::tabular {

std::string_view to_string(ColumnKind kind) {
    return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

ColumnKind column_kind_from_string(std::string_view text) {
    if (text == "numeric") return ColumnKind::Numeric;
    if (text == "categorical") return ColumnKind::Categorical;
    throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

Frame::Frame(std::vector<std::string> column_names,
             std::vector<ColumnKind> kinds,
             std::vector<std::vector<CellValue>> rows)
    : names_(std::move(column_names)), kinds_(std::move(kinds)), rows_(std::move(rows)) {
    if (kinds_.size() != names_.size()) {
        throw SchemaError("frame: " + std::to_string(names_.size()) + " column names but " +
                          std::to_string(kinds_.size()) + " kinds");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : names_) {
        if (!seen.insert(name).second) throw SchemaError("frame: duplicate column name '" + name + "'");
    }
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        const auto& row = rows_[r];
        if (row.size() != names_.size()) {
            throw SchemaError("frame: row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                              " cells, expected " + std::to_string(names_.size()));
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            const auto& cell = row[c];
            if (is_missing(cell)) continue;
            const bool ok = kinds_[c] == ColumnKind::Numeric ? std::holds_alternative<double>(cell)
                                                             : std::holds_alternative<std::string>(cell);
            if (!ok) {
                throw SchemaError("frame: row " + std::to_string(r) + " column '" + names_[c] +
                                  "' holds a value of the wrong kind");
            }
            if (const double* d = std::get_if<double>(&cell); d && !std::isfinite(*d)) {
                throw SchemaError("frame: non-finite number in column '" + names_[c] + "'");
            }
        }
    }
}

bool Frame::has_column(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t Frame::column_index(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw SchemaError("missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

Frame Frame::select_rows(const std::vector<std::size_t>& indices) const {
    std::vector<std::vector<CellValue>> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(rows_.at(i));
    return Frame(names_, kinds_, std::move(out));
}

double null_fraction(const Frame& frame, std::string_view column) {
    const auto c = frame.column_index(column);
    if (frame.n_rows() == 0) throw SchemaError("null_fraction: frame has no rows");
    std::size_t missing = 0;
    for (const auto& row : frame.rows()) missing += is_missing(row[c]) ? 1 : 0;
    return static_cast<double>(missing) / static_cast<double>(frame.n_rows());
}

ColumnStat column_stats(const Frame& frame, std::string_view column) {
    const auto c = frame.column_index(column);
    if (frame.kinds()[c] == ColumnKind::Numeric) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& row : frame.rows()) {
            if (const double* d = std::get_if<double>(&row[c])) {
                sum += *d;
                ++count;
            }
        }
        if (count == 0) throw SchemaError("column '" + std::string(column) + "' has no non-missing values");
        return sum / static_cast<double>(count);
    }

    // std::map iterates in lexicographic order, so keeping the first maximum
    // implements the tie rule.
    std::map<std::string, std::size_t> counts;
    for (const auto& row : frame.rows()) {
        if (const auto* s = std::get_if<std::string>(&row[c])) ++counts[*s];
    }
    if (counts.empty()) throw SchemaError("column '" + std::string(column) + "' has no non-missing values");
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

}  // namespace churn::tabular
