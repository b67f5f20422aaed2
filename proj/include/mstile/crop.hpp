#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mstile/raster.hpp"

namespace mstile {

struct InputResolution {
    int h = 0;
    int w = 0;
};

struct CropPlan {
    enum class Mode { random, ordered };
    Mode mode = Mode::ordered;
    std::vector<std::pair<int, int>> positions; // (x, y) origins, ordered mode
    int n = 0;
    std::uint64_t seed = 0; // random mode
};

// Multiplicative photometric jitter plus flips. Defaults are mild jitter for
// H&E-like imagery; degenerate ranges / zero probabilities give the exact
// identity.
struct AugmentParams {
    double brightness_lo = 0.8, brightness_hi = 1.2;
    double contrast_lo = 0.8, contrast_hi = 1.2;
    double saturation_lo = 0.8, saturation_hi = 1.2;
    double hue_shift_lo = -18.0, hue_shift_hi = 18.0; // degrees
    double flip_h_prob = 0.5;
    double flip_v_prob = 0.5;

    static AugmentParams identity() {
        AugmentParams p;
        p.brightness_lo = p.brightness_hi = 1.0;
        p.contrast_lo = p.contrast_hi = 1.0;
        p.saturation_lo = p.saturation_hi = 1.0;
        p.hue_shift_lo = p.hue_shift_hi = 0.0;
        p.flip_h_prob = p.flip_v_prob = 0.0;
        return p;
    }
};

// Crop with origin drawn uniformly over the integer grid
// [0, tile_w - res_w] x [0, tile_h - res_h]; identical seed, identical crop.
Raster random_crop(const Raster& tile, InputResolution res, std::uint64_t seed);

// Axis origins for the evaluation grid over a tile_size-wide axis:
// g = ceil(tile_size / res); stride (tile_size - res)/(g - 1) rounded to
// nearest, first origin 0 and last tile_size - res. The g x g grid covers
// every pixel.
std::vector<int> ordered_axis_origins(int tile_size, int res);

// Full ordered plan; positions row-major (y outer, x inner), n = g^2.
CropPlan ordered_crop_grid(int tile_size, int res);

Raster crop_at(const Raster& tile, int x, int y, InputResolution res);

// Fixed order: horizontal flip, vertical flip, brightness, contrast,
// saturation, hue. All factor draws come from the seed stream whether or not
// the range is degenerate, so enabling one op never shifts another's draw.
Raster augment(const Raster& crop, const AugmentParams& p, std::uint64_t seed);

// Hexcone HSV on 8-bit channels; H in degrees [0,360), S and V in [0,1].
// Exposed for the documented conversion test vectors.
std::array<double, 3> rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v);

Raster flip_horizontal(const Raster& r);
Raster flip_vertical(const Raster& r);

} // namespace mstile
