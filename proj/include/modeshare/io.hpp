#pragma once

// Small text I/O helpers shared by the loaders and report writers.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace modeshare::io {

/// One parsed CSV record with its 1-based source line number.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// A CSV table with the header mapped to column positions.
class CsvTable {
public:
    CsvTable(std::vector<std::string> header, std::vector<CsvRow> rows);

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<CsvRow>& rows() const { return rows_; }

    /// Position of a required column; throws SchemaError naming it when absent.
    std::size_t require(std::string_view column) const;
    std::optional<std::size_t> find(std::string_view column) const;

private:
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<CsvRow> rows_;
};

/// Split one CSV line, honouring double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Parse CSV text. Blank lines and lines starting with '#' are skipped;
/// the first remaining line is the header.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

/// Quote a field if it contains a separator, quote or newline.
std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);

/// Strict numeric parsing: the whole (trimmed) field must be consumed.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string_view trim(std::string_view s);

/// Decimal text times 10^exp10, rounded once. parse_scaled("61.3", -2) is
/// the double nearest 0.613, which 61.3 / 100 need not be.
std::optional<double> parse_scaled(std::string_view s, int exp10);

/// Plain decimal text of x * 10^exp10 built from the shortest digits of x,
/// so parse_scaled(format_scaled(x, k), -k) == x.
std::string format_scaled(double x, int exp10);

/// Shortest decimal text that reads back to exactly `x`.
std::string format_double(double x);

/// Write `contents` to `path` through a temporary sibling file and rename.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace modeshare::io
