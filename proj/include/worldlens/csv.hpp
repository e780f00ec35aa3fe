#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "worldlens/worldio.hpp"

namespace worldlens {

/// Minimal CSV emission with locale-independent, shortest-round-trip number
/// formatting. The CSV files are the stable machine interface; identical
/// inputs must produce identical bytes.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(&out) {}

    void header(const std::vector<std::string>& names) { row_strings(names); }

    CsvWriter& cell(const std::string& v) {
        cells_.push_back(v);
        return *this;
    }
    CsvWriter& cell(const char* v) { return cell(std::string(v)); }
    CsvWriter& cell(double v) { return cell(detail::format_double(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(long long v) { return cell(std::to_string(v)); }
    CsvWriter& cell(std::uint64_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(bool v) { return cell(std::string(v ? "1" : "0")); }

    void end_row() {
        row_strings(cells_);
        cells_.clear();
    }

    void comment(const std::string& text) { (*out_) << "# " << text << "\n"; }

private:
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) (*out_) << ",";
            write_quoted(cells[i]);
        }
        (*out_) << "\n";
    }

    void write_quoted(const std::string& cell) {
        if (cell.find_first_of(",\"\n") == std::string::npos) {
            (*out_) << cell;
            return;
        }
        (*out_) << '"';
        for (char c : cell) {
            if (c == '"') (*out_) << '"';
            (*out_) << c;
        }
        (*out_) << '"';
    }

    std::ostream* out_;
    std::vector<std::string> cells_;
};

} // namespace worldlens
