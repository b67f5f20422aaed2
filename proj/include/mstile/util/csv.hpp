#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mstile/util/error.hpp"
#include "mstile/util/text.hpp"

namespace mstile {

// Minimal CSV layer for the pipeline's artifact files. Fields never contain
// commas, quotes or newlines (ids and relative paths only); writers validate
// that. Lines starting with '#' are provenance comments and are skipped by
// the reader.

struct CsvTable {
    std::vector<std::string> comments; // '#' lines, without the '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline void csv_check_field(std::string_view f) {
    for (char c : f)
        if (c == ',' || c == '"' || c == '\n' || c == '\r')
            fail(Error::Kind::invalid_argument, "csv field contains separator/quote: '" + std::string(f) + "'");
}

inline std::string csv_join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        csv_check_field(fields[i]);
        if (i) line += ',';
        line += fields[i];
    }
    return line;
}

CsvTable csv_parse(std::string_view text, std::size_t expect_columns);

CsvTable csv_read_file(const std::filesystem::path& path, std::size_t expect_columns);

std::string csv_render(const CsvTable& t);

} // namespace mstile
