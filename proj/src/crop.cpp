#include "mstile/crop.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mstile/util/rng.hpp"

namespace mstile {

namespace {

std::uint8_t quantize(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

} // namespace

std::vector<int> ordered_axis_origins(int tile_size, int res) {
    if (res < 1) fail(Error::Kind::invalid_argument, "input resolution must be >= 1");
    if (res > tile_size)
        fail(Error::Kind::invalid_argument,
             "input resolution " + std::to_string(res) + " exceeds tile size " +
                 std::to_string(tile_size));
    const int g = (tile_size + res - 1) / res;
    std::vector<int> origins;
    origins.reserve(static_cast<std::size_t>(g));
    if (g == 1) {
        origins.push_back(0);
        return origins;
    }
    const double stride = static_cast<double>(tile_size - res) / (g - 1);
    for (int k = 0; k < g; ++k)
        origins.push_back(static_cast<int>(std::floor(k * stride + 0.5)));
    return origins;
}

CropPlan ordered_crop_grid(int tile_size, int res) {
    const auto axis = ordered_axis_origins(tile_size, res);
    CropPlan plan;
    plan.mode = CropPlan::Mode::ordered;
    plan.n = static_cast<int>(axis.size() * axis.size());
    plan.positions.reserve(static_cast<std::size_t>(plan.n));
    for (int y : axis)
        for (int x : axis) plan.positions.emplace_back(x, y);
    return plan;
}

Raster crop_at(const Raster& tile, int x, int y, InputResolution res) {
    if (x < 0 || y < 0 || x + res.w > tile.width || y + res.h > tile.height)
        fail(Error::Kind::invalid_argument, "crop window out of bounds");
    Raster out(res.w, res.h);
    const std::size_t span = static_cast<std::size_t>(res.w) * 3;
    for (int row = 0; row < res.h; ++row)
        std::memcpy(out.data.data() + out.index(0, row, 0),
                    tile.data.data() + tile.index(x, y + row, 0), span);
    return out;
}

Raster random_crop(const Raster& tile, InputResolution res, std::uint64_t seed) {
    if (res.w > tile.width || res.h > tile.height)
        fail(Error::Kind::invalid_argument, "crop resolution exceeds tile");
    Rng rng(seed);
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(tile.width - res.w) + 1));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(tile.height - res.h) + 1));
    return crop_at(tile, x, y, res);
}

Raster flip_horizontal(const Raster& r) {
    Raster out(r.width, r.height);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = r.at(r.width - 1 - x, y, c);
    return out;
}

Raster flip_vertical(const Raster& r) {
    Raster out(r.width, r.height);
    for (int y = 0; y < r.height; ++y)
        std::memcpy(out.data.data() + out.index(0, y, 0),
                    r.data.data() + r.index(0, r.height - 1 - y, 0),
                    static_cast<std::size_t>(r.width) * 3);
    return out;
}

std::array<double, 3> rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double rf = r / 255.0, gf = g / 255.0, bf = b / 255.0;
    const double maxc = std::max({rf, gf, bf});
    const double minc = std::min({rf, gf, bf});
    const double chroma = maxc - minc;
    double h = 0.0;
    if (chroma > 0.0) {
        if (maxc == rf)
            h = 60.0 * std::fmod((gf - bf) / chroma + 6.0, 6.0);
        else if (maxc == gf)
            h = 60.0 * ((bf - rf) / chroma + 2.0);
        else
            h = 60.0 * ((rf - gf) / chroma + 4.0);
    }
    const double s = maxc > 0.0 ? chroma / maxc : 0.0;
    return {h, s, maxc};
}

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    if (h < 0) h += 360.0;
    s = std::clamp(s, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double rf = 0, gf = 0, bf = 0;
    switch (static_cast<int>(hp)) {
        case 0: rf = c; gf = x; break;
        case 1: rf = x; gf = c; break;
        case 2: gf = c; bf = x; break;
        case 3: gf = x; bf = c; break;
        case 4: rf = x; bf = c; break;
        default: rf = c; bf = x; break;
    }
    const double m = v - c;
    return {quantize((rf + m) * 255.0), quantize((gf + m) * 255.0), quantize((bf + m) * 255.0)};
}

Raster augment(const Raster& crop, const AugmentParams& p, std::uint64_t seed) {
    Rng rng(seed);
    // All six draws always happen, in this order, so a degenerate range for
    // one op does not shift the others' samples.
    const bool do_hflip = rng.next_unit() < p.flip_h_prob;
    const bool do_vflip = rng.next_unit() < p.flip_v_prob;
    const double f_b = rng.uniform(p.brightness_lo, p.brightness_hi);
    const double f_c = rng.uniform(p.contrast_lo, p.contrast_hi);
    const double f_s = rng.uniform(p.saturation_lo, p.saturation_hi);
    const double shift = rng.uniform(p.hue_shift_lo, p.hue_shift_hi);

    Raster img = do_hflip ? flip_horizontal(crop) : crop;
    if (do_vflip) img = flip_vertical(img);

    if (f_b != 1.0) {
        for (auto& v : img.data) v = quantize(v * f_b);
    }
    if (f_c != 1.0) {
        double lum_sum = 0.0;
        for (std::size_t i = 0; i < img.data.size(); i += 3)
            lum_sum += luminance(img.data[i], img.data[i + 1], img.data[i + 2]);
        const double lbar = lum_sum / (img.data.size() / 3);
        for (auto& v : img.data) v = quantize(lbar + f_c * (v - lbar));
    }
    if (f_s != 1.0 || shift != 0.0) {
        // saturation and hue are independent HSV coordinates; one round trip
        // applies "S x f_s, then H + shift" exactly
        for (std::size_t i = 0; i < img.data.size(); i += 3) {
            auto hsv = rgb_to_hsv(img.data[i], img.data[i + 1], img.data[i + 2]);
            auto rgb = hsv_to_rgb(hsv[0] + shift, hsv[1] * f_s, hsv[2]);
            img.data[i] = rgb[0];
            img.data[i + 1] = rgb[1];
            img.data[i + 2] = rgb[2];
        }
    }
    return img;
}

} // namespace mstile
