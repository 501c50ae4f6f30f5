#include "ssr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ssr {

std::optional<std::size_t> RawTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return i;
    return std::nullopt;
}

std::size_t RawTable::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw CsvError("missing required column '" + std::string(name) + "'");
}

namespace {

// Splits one logical record starting at `pos`; advances `pos` past its line end.
std::vector<std::string> next_record(std::string_view text, std::size_t& pos, std::size_t& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    bool was_quoted = false;
    while (pos < text.size()) {
        char c = text[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < text.size() && text[pos] == '"') {
                    cell.push_back('"');
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.push_back(c);
            }
            continue;
        }
        if (c == '"' && cell.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
            was_quoted = false;
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    if (quoted) throw CsvError("unterminated quoted cell at line " + std::to_string(line));
    cells.push_back(std::move(cell));
    return cells;
}

}  // namespace

RawTable parse_csv(std::string_view text) {
    RawTable t;
    std::size_t pos = 0;
    std::size_t line = 1;
    if (text.empty()) throw CsvError("missing header row");
    t.column_names = next_record(text, pos, line);
    for (auto& name : t.column_names) name = trim(name);
    while (pos < text.size()) {
        ++line;
        std::size_t record_line = line;
        auto row = next_record(text, pos, line);
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        if (row.size() != t.column_names.size())
            throw CsvError("ragged row at line " + std::to_string(record_line) + ": expected " +
                           std::to_string(t.column_names.size()) + " cells, got " + std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

RawTable load_table(const std::filesystem::path& path, std::span<const std::string> required) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RawTable t;
    try {
        t = parse_csv(ss.str());
    } catch (const CsvError& e) {
        throw CsvError(path.string() + ": " + e.what());
    }
    for (const auto& name : required)
        if (!t.find(name)) throw CsvError(path.string() + ": missing required column '" + name + "'");
    return t;
}

void write_csv_row(std::ostream& os, std::span<const std::string> cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        const auto& c = cells[i];
        if (c.find_first_of(",\"\n\r") != std::string::npos) {
            os << '"';
            for (char ch : c) {
                if (ch == '"') os << '"';
                os << ch;
            }
            os << '"';
        } else {
            os << c;
        }
    }
    os << '\n';
}

void write_table(const std::filesystem::path& path, const RawTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CsvError("cannot write " + path.string());
    write_csv_row(out, table.column_names);
    for (const auto& row : table.rows) write_csv_row(out, row);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    if (cell == "nan") return std::nan("");
    if (cell == "inf") return INFINITY;
    if (cell == "-inf") return -INFINITY;
    double v = 0.0;
    const char* first = cell.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw CsvError("not a number: '" + std::string(cell) + "'");
    return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto p = s.find(sep, start);
        out.emplace_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace ssr
