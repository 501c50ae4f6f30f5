#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ssr {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parsed CSV table. An empty cell means "missing".
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<std::string>> rows;

    /// Index of a column, or nullopt.
    std::optional<std::size_t> find(std::string_view name) const;
    /// Index of a column; throws CsvError naming it when absent.
    std::size_t index(std::string_view name) const;
};

/// Parses RFC-4180 style CSV text (comma separated, double-quote escaping).
/// Every row must have as many cells as the header.
RawTable parse_csv(std::string_view text);

/// Reads a CSV file and checks that every name in `required` is a column.
RawTable load_table(const std::filesystem::path& path, std::span<const std::string> required = {});

void write_csv_row(std::ostream& os, std::span<const std::string> cells);
void write_table(const std::filesystem::path& path, const RawTable& table);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Parses a full cell as a double; nullopt for an empty cell. Throws CsvError on junk.
std::optional<double> parse_double(std::string_view cell);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace ssr
