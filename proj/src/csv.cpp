#include "churn/error.hpp"
#include "churn/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace churn::tabular {
namespace {

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

// Splits one logical record. Quoted fields may contain commas, doubled
// quotes and newlines, so the reader may pull further physical lines.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    ++line_no;

    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    while (true) {
        if (i == line.size()) {
            if (in_quotes) {
                field.push_back('\n');
                if (!std::getline(in, line)) throw ParseError("csv: unterminated quoted field at line " + std::to_string(line_no));
                ++line_no;
                i = 0;
                continue;
            }
            break;
        }
        const char ch = line[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r' || i + 1 != line.size()) {
            field.push_back(ch);
        }
        ++i;
    }
    fields.push_back(std::move(field));
    return true;
}

bool needs_quoting(std::string_view s) {
    return s.find_first_of(",\"\n\r") != std::string_view::npos || s != trim(s);
}

void write_field(std::ostream& out, std::string_view s) {
    if (!needs_quoting(s)) {
        out << s;
        return;
    }
    out << '"';
    for (char ch : s) {
        if (ch == '"') out << '"';
        out << ch;
    }
    out << '"';
}

}  // namespace

bool parse_number(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

Frame read_csv(std::istream& in, const CsvOptions& options) {
    std::vector<std::string> header;
    std::size_t line_no = 0;
    if (!read_record(in, header, line_no)) throw ParseError("csv: empty input, header row required");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
    for (auto& h : header) h = std::string(trim(h));
    {
        std::set<std::string> seen;
        for (const auto& h : header) {
            if (!seen.insert(h).second) throw ParseError("csv: duplicate header name '" + h + "'");
        }
    }

    const std::size_t n_cols = header.size();
    std::vector<std::vector<std::string>> raw;
    std::vector<std::string> fields;
    while (read_record(in, fields, line_no)) {
        if (fields.size() == 1 && trim(fields[0]).empty() && n_cols != 1) continue;  // blank line
        if (fields.size() != n_cols) {
            throw ParseError("csv: ragged row " + std::to_string(raw.size()) + " (line " + std::to_string(line_no) +
                             "): " + std::to_string(fields.size()) + " cells, expected " + std::to_string(n_cols));
        }
        raw.push_back(fields);
    }

    // Classify cells: missing, parsed number, or text.
    std::vector<ColumnKind> kinds(n_cols, ColumnKind::Numeric);
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (auto it = options.kind_overrides.find(header[c]); it != options.kind_overrides.end()) {
            kinds[c] = it->second;
            continue;
        }
        for (const auto& row : raw) {
            const auto cell = trim(row[c]);
            double value;
            if (options.null_tokens.contains(std::string(cell))) continue;
            if (!parse_number(cell, value)) {
                kinds[c] = ColumnKind::Categorical;
                break;
            }
        }
    }

    std::vector<std::vector<CellValue>> rows;
    rows.reserve(raw.size());
    for (std::size_t r = 0; r < raw.size(); ++r) {
        std::vector<CellValue> row;
        row.reserve(n_cols);
        for (std::size_t c = 0; c < n_cols; ++c) {
            const auto cell = trim(raw[r][c]);
            if (options.null_tokens.contains(std::string(cell))) {
                row.emplace_back(Missing{});
            } else if (kinds[c] == ColumnKind::Categorical) {
                row.emplace_back(std::string(cell));
            } else {
                double value;
                if (!parse_number(cell, value)) {
                    throw ParseError("csv: row " + std::to_string(r) + " column '" + header[c] +
                                     "' is not numeric: '" + std::string(cell) + "'");
                }
                if (std::isfinite(value)) {
                    row.emplace_back(value);
                } else {
                    row.emplace_back(Missing{});
                }
            }
        }
        rows.push_back(std::move(row));
    }
    return Frame(std::move(header), std::move(kinds), std::move(rows));
}

Frame load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("csv: cannot open '" + path.string() + "'");
    return read_csv(in, options);
}

void write_csv(std::ostream& out, const Frame& frame) {
    const auto& names = frame.column_names();
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c) out << ',';
        write_field(out, names[c]);
    }
    out << '\n';
    char buf[64];
    for (const auto& row : frame.rows()) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            if (const double* d = std::get_if<double>(&row[c])) {
                const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), *d);
                out.write(buf, ptr - buf);
            } else if (const auto* s = std::get_if<std::string>(&row[c])) {
                write_field(out, *s);
            } else {
                out << "NULL";
            }
        }
        out << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const Frame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_csv(out, frame);
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace churn::tabular
