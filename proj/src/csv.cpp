#include "mstile/util/csv.hpp"

#include "mstile/util/fsio.hpp"

namespace mstile {

CsvTable csv_parse(std::string_view text, std::size_t expect_columns) {
    CsvTable t;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view raw = text.substr(pos, eol - pos);
        pos = eol + 1;
        std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            t.comments.emplace_back(line.substr(1));
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != expect_columns)
            fail(Error::Kind::corrupt_data,
                 "csv row has " + std::to_string(fields.size()) + " fields, expected " +
                     std::to_string(expect_columns) + ": '" + std::string(line) + "'");
        std::vector<std::string> row;
        row.reserve(fields.size());
        for (auto f : fields) row.emplace_back(trim(f));
        if (!have_header) {
            t.header = std::move(row);
            have_header = true;
        } else {
            t.rows.emplace_back(std::move(row));
        }
    }
    if (!have_header) fail(Error::Kind::corrupt_data, "csv has no header row");
    return t;
}

CsvTable csv_read_file(const std::filesystem::path& path, std::size_t expect_columns) {
    return csv_parse(read_file(path), expect_columns);
}

std::string csv_render(const CsvTable& t) {
    std::string out;
    for (const auto& c : t.comments) {
        out += '#';
        out += c;
        out += '\n';
    }
    out += csv_join(t.header);
    out += '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            fail(Error::Kind::invalid_argument, "csv row width mismatch");
        out += csv_join(row);
        out += '\n';
    }
    return out;
}

} // namespace mstile
