#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mstile/raster.hpp"

namespace mstile {

// Square tile cut from a source raster so that its geometric center lands on
// the annotated point. Regions hanging over the source border are filled
// with pad_value and accounted for in pad_fraction.
struct TileRecord {
    std::string tile_id;
    std::string patient_id;
    std::string label;     // "CMB" or "DN"
    int center_x = 0;
    int center_y = 0;
    int tile_size = 0;     // h_t == w_t
    double pad_fraction = 0.0;
    Raster pixels;
};

// Downsampled form of a tile; when intermediate_size equals the tile size the
// pixels are bit-identical to the tile.
struct IntermediateTile {
    std::string source_tile_id;
    int intermediate_size = 0;
    Raster pixels;
};

struct ManifestRow {
    std::string tile_id;
    std::string patient_id;
    std::string label;
    int center_x = 0;
    int center_y = 0;
    int tile_size = 0;
    double pad_fraction = 0.0;
    std::string path; // relative to the manifest's directory
};

struct TileManifest {
    std::string provenance; // "# ..." comment content, e.g. config hash + seed
    std::vector<ManifestRow> rows;
};

// size x size tile with origin center - floor(size/2) per axis. center must
// lie inside the source.
TileRecord extract_centered(const Raster& source, int center_x, int center_y, int size,
                            std::uint8_t pad_value = 255);

// One tile per size (sizes ascending); all share the same center, so each
// smaller tile is the exact central window of each larger one.
std::vector<TileRecord> build_multiscale_set(const Raster& source, int center_x, int center_y,
                                             const std::vector<int>& sizes,
                                             std::uint8_t pad_value = 255);

IntermediateTile make_intermediate(const TileRecord& tile, int intermediate_size);

// Manifest CSV: header tile_id,patient_id,label,center_x,center_y,tile_size,
// pad_fraction,path; rows sorted by tile_id; byte-stable.
void write_manifest(const TileManifest& m, const std::filesystem::path& path);
TileManifest read_manifest(const std::filesystem::path& path);

// Validation per the manifest invariants: unique tile ids, referenced files
// exist relative to the manifest directory.
void validate_manifest(const TileManifest& m, const std::filesystem::path& manifest_path);

} // namespace mstile
