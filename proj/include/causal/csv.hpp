#pragma once

#include <optional>
#include <string>
#include <vector>

namespace causal {

// Comma-separated table with a header row. Fields may be double-quoted;
// an empty (zero-length, unquoted) field means "missing".
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or -1.
    int column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::string_view text);

// Shortest round-trip representation of a double; "nan"/"inf"/"-inf" for
// non-finite values. Used everywhere a double is serialized so identical
// inputs produce byte-identical artifacts.
std::string format_double(double v);

std::string csv_escape(const std::string& field);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(std::vector<std::string> fields);
    std::string str() const;
    void write_file(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace causal
