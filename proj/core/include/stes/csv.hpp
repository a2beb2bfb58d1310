#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stes {

/// A CSV file in memory: one header row plus data rows of equal width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or nullopt when absent.
    std::optional<int> column(const std::string& name) const;

    /// Index of a header column; throws DataError naming the file context when absent.
    int require_column(const std::string& name, const std::string& context) const;
};

/// Reads a UTF-8 CSV file with a mandatory header row. Fields may be quoted
/// with double quotes; embedded newlines are not supported.
CsvTable read_csv(const std::filesystem::path& file);

/// Parses a CSV field as a real value. Empty fields and "NA" are missing and
/// map to NaN. Anything else must parse fully as a number.
double parse_value(const std::string& field, const std::string& context);

/// Writes `content` to `file` atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path& file, const std::string& content);

/// Joins fields into one CSV line, quoting only where needed.
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace stes
