#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace churn::tabular {

struct Missing {
    bool operator==(const Missing&) const = default;
};

/// A single cell. Numbers are always finite; non-finite parses become Missing.
using CellValue = std::variant<Missing, double, std::string>;

inline bool is_missing(const CellValue& v) { return std::holds_alternative<Missing>(v); }

enum class ColumnKind { Numeric, Categorical };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view text);

/// Immutable row-major table with typed columns.
///
/// Construction validates that names are unique, every row has one cell per
/// column, and each cell agrees with its column kind (Numeric columns hold
/// numbers or Missing, Categorical columns hold text or Missing).
class Frame {
public:
    Frame() = default;
    Frame(std::vector<std::string> column_names,
          std::vector<ColumnKind> kinds,
          std::vector<std::vector<CellValue>> rows);

    std::size_t n_rows() const noexcept { return rows_.size(); }
    std::size_t n_cols() const noexcept { return names_.size(); }

    const std::vector<std::string>& column_names() const noexcept { return names_; }
    const std::vector<ColumnKind>& kinds() const noexcept { return kinds_; }
    const std::vector<std::vector<CellValue>>& rows() const noexcept { return rows_; }

    bool has_column(std::string_view name) const;
    /// Throws SchemaError naming the column when absent.
    std::size_t column_index(std::string_view name) const;
    ColumnKind kind(std::string_view name) const { return kinds_[column_index(name)]; }

    const CellValue& at(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }

    /// New frame holding the given rows, in the given order.
    Frame select_rows(const std::vector<std::size_t>& indices) const;

    bool operator==(const Frame&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<ColumnKind> kinds_;
    std::vector<std::vector<CellValue>> rows_;
};

/// Overrides naming columns absent from the file are ignored.
struct CsvOptions {
    std::set<std::string> null_tokens{"", "NULL", "null"};
    std::map<std::string, ColumnKind> kind_overrides;
};

/// Parses a number the way the loader does: the whole trimmed text must be
/// consumed. Returns false for anything else.
bool parse_number(std::string_view text, double& out);

Frame read_csv(std::istream& in, const CsvOptions& options = {});
Frame load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes with minimal RFC-4180 quoting. Missing cells are written as `NULL`;
/// numbers use the shortest representation that round-trips.
void write_csv(std::ostream& out, const Frame& frame);
void save_csv(const std::filesystem::path& path, const Frame& frame);

/// Fraction of missing cells in a column.
double null_fraction(const Frame& frame, std::string_view column);

/// Mean (Numeric) or mode (Categorical) of the non-missing cells.
/// Mode ties go to the lexicographically smallest value.
using ColumnStat = std::variant<double, std::string>;
ColumnStat column_stats(const Frame& frame, std::string_view column);

}  // namespace churn::tabular
