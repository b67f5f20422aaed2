#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mstile/util/error.hpp"

namespace mstile {

// 8-bit interleaved RGB image, row-major. The unit of every pixel operation
// in the pipeline. Treated as immutable once filled; safe to share across
// workers.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // width * height * 3

    Raster() = default;
    Raster(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {}
    Raster(int w, int h, std::uint8_t fill)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    static constexpr int channels = 3;

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * 3 + c;
    }
    std::uint8_t at(int x, int y, int c) const { return data[index(x, y, c)]; }
    std::uint8_t& at(int x, int y, int c) { return data[index(x, y, c)]; }

    bool same_pixels(const Raster& o) const {
        return width == o.width && height == o.height && data == o.data;
    }
};

// Decodes an 8-bit PNG. Grayscale and palette images are expanded to RGB
// (gray replicated per channel); alpha is stripped; 16-bit files are
// rejected. Error kinds: file_missing, unsupported_format, corrupt_data.
Raster load_raster(const std::filesystem::path& path);

// Lossless 8-bit RGB PNG via temp+rename; no partial file on failure.
// `provenance`, when non-empty, is stored as a tEXt chunk and ignored by
// load_raster. `compression` is the zlib level: 0 (stored, fastest; used for
// the bulky synthetic slides) through 9; intermediates default to 1.
void save_raster(const Raster& r, const std::filesystem::path& path,
                 const std::string& provenance = {}, int compression = 1);

// Area-weighted (box) downsample. Each output pixel is the exact mean of its
// source footprint, rounded half away from zero per channel; computed in
// integer arithmetic, so results are bit-stable. target == source returns a
// copy. Upsampling is out of contract (invalid_argument).
Raster downsample(const Raster& r, int target_w, int target_h);

} // namespace mstile
