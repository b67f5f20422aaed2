#include "mstile/tiler.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "mstile/util/csv.hpp"
#include "mstile/util/fsio.hpp"
#include "mstile/util/text.hpp"

namespace fs = std::filesystem;

namespace mstile {

TileRecord extract_centered(const Raster& source, int center_x, int center_y, int size,
                            std::uint8_t pad_value) {
    if (size < 1) fail(Error::Kind::invalid_argument, "tile size must be >= 1");
    if (center_x < 0 || center_y < 0 || center_x >= source.width || center_y >= source.height)
        fail(Error::Kind::invalid_argument,
             "tile center (" + std::to_string(center_x) + "," + std::to_string(center_y) +
                 ") outside source " + std::to_string(source.width) + "x" +
                 std::to_string(source.height));

    const int origin_x = center_x - size / 2;
    const int origin_y = center_y - size / 2;

    TileRecord t;
    t.center_x = center_x;
    t.center_y = center_y;
    t.tile_size = size;
    t.pixels = Raster(size, size, pad_value);

    const int src_x0 = std::max(0, origin_x);
    const int src_y0 = std::max(0, origin_y);
    const int src_x1 = std::min(source.width, origin_x + size);
    const int src_y1 = std::min(source.height, origin_y + size);

    std::int64_t inside = 0;
    if (src_x0 < src_x1 && src_y0 < src_y1) {
        const std::size_t span = static_cast<std::size_t>(src_x1 - src_x0) * 3;
        for (int y = src_y0; y < src_y1; ++y) {
            const std::uint8_t* src = source.data.data() + source.index(src_x0, y, 0);
            std::uint8_t* dst =
                t.pixels.data.data() + t.pixels.index(src_x0 - origin_x, y - origin_y, 0);
            std::memcpy(dst, src, span);
        }
        inside = static_cast<std::int64_t>(src_x1 - src_x0) * (src_y1 - src_y0);
    }
    const std::int64_t total = static_cast<std::int64_t>(size) * size;
    t.pad_fraction = static_cast<double>(total - inside) / static_cast<double>(total);
    return t;
}

std::vector<TileRecord> build_multiscale_set(const Raster& source, int center_x, int center_y,
                                             const std::vector<int>& sizes,
                                             std::uint8_t pad_value) {
    if (!std::is_sorted(sizes.begin(), sizes.end()))
        fail(Error::Kind::invalid_argument, "tile sizes must be ascending");
    std::vector<TileRecord> out;
    out.reserve(sizes.size());
    for (int s : sizes) out.push_back(extract_centered(source, center_x, center_y, s, pad_value));
    return out;
}

IntermediateTile make_intermediate(const TileRecord& tile, int intermediate_size) {
    if (intermediate_size > tile.tile_size)
        fail(Error::Kind::invalid_argument,
             "intermediate size " + std::to_string(intermediate_size) + " exceeds tile size " +
                 std::to_string(tile.tile_size));
    IntermediateTile it;
    it.source_tile_id = tile.tile_id;
    it.intermediate_size = intermediate_size;
    it.pixels = downsample(tile.pixels, intermediate_size, intermediate_size);
    return it;
}

static const std::vector<std::string> kManifestHeader = {
    "tile_id", "patient_id", "label", "center_x", "center_y", "tile_size", "pad_fraction", "path"};

void write_manifest(const TileManifest& m, const fs::path& path) {
    CsvTable t;
    if (!m.provenance.empty()) t.comments.push_back(m.provenance);
    t.header = kManifestHeader;
    std::vector<ManifestRow> rows = m.rows;
    std::sort(rows.begin(), rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) { return a.tile_id < b.tile_id; });
    for (const auto& r : rows) {
        t.rows.push_back({r.tile_id, r.patient_id, r.label, std::to_string(r.center_x),
                          std::to_string(r.center_y), std::to_string(r.tile_size),
                          format_double(r.pad_fraction), r.path});
    }
    atomic_write_file(path, csv_render(t));
}

TileManifest read_manifest(const fs::path& path) {
    CsvTable t = csv_read_file(path, kManifestHeader.size());
    if (t.header != kManifestHeader)
        fail(Error::Kind::corrupt_data, "unexpected manifest header in " + path.string());
    TileManifest m;
    if (!t.comments.empty()) m.provenance = t.comments.front();
    m.rows.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        ManifestRow r;
        r.tile_id = row[0];
        r.patient_id = row[1];
        r.label = row[2];
        r.center_x = static_cast<int>(parse_int(row[3], "center_x"));
        r.center_y = static_cast<int>(parse_int(row[4], "center_y"));
        r.tile_size = static_cast<int>(parse_int(row[5], "tile_size"));
        r.pad_fraction = parse_double(row[6], "pad_fraction");
        r.path = row[7];
        m.rows.push_back(std::move(r));
    }
    return m;
}

void validate_manifest(const TileManifest& m, const fs::path& manifest_path) {
    std::set<std::string> ids;
    const fs::path dir = manifest_path.parent_path();
    for (const auto& r : m.rows) {
        if (!ids.insert(r.tile_id).second)
            fail(Error::Kind::corrupt_data, "duplicate tile_id " + r.tile_id);
        if (!fs::exists(dir / r.path))
            fail(Error::Kind::file_missing,
                 "manifest references missing file " + (dir / r.path).string());
    }
}

} // namespace mstile
