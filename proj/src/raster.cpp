#include "mstile/raster.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>

namespace fs = std::filesystem;

namespace mstile {
namespace {

struct FileCloser {
    std::FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

// libpng reports errors via longjmp; we convert them to exceptions after the
// jump target. png_error_msg carries the message out of the handler.
struct PngReadCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadCtx() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriteCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteCtx() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void on_png_error(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot) *slot = msg ? msg : "png error";
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

} // namespace

Raster load_raster(const fs::path& path) {
    FileCloser fc;
    fc.f = std::fopen(path.string().c_str(), "rb");
    if (!fc.f) fail(Error::Kind::file_missing, "cannot open " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fc.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        fail(Error::Kind::corrupt_data, "not a PNG file: " + path.string());

    std::string errmsg;
    PngReadCtx ctx;
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &errmsg, on_png_error, on_png_warning);
    if (!ctx.png) fail(Error::Kind::io_failure, "png_create_read_struct failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) fail(Error::Kind::io_failure, "png_create_info_struct failed");

    Raster out;
    if (setjmp(png_jmpbuf(ctx.png)))
        fail(Error::Kind::corrupt_data, "corrupt PNG " + path.string() + ": " + errmsg);

    png_init_io(ctx.png, fc.f);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
    const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
    const int depth = png_get_bit_depth(ctx.png, ctx.info);
    const int color = png_get_color_type(ctx.png, ctx.info);

    if (depth > 8)
        fail(Error::Kind::unsupported_format,
             path.string() + ": " + std::to_string(depth) + "-bit PNG not supported (8-bit only)");
    if (w == 0 || h == 0) fail(Error::Kind::corrupt_data, "empty PNG " + path.string());

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (depth < 8) png_set_packing(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    if (png_get_channels(ctx.png, ctx.info) != 3 || png_get_bit_depth(ctx.png, ctx.info) != 8)
        fail(Error::Kind::unsupported_format, path.string() + ": colorspace not convertible to 8-bit RGB");

    out = Raster(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; ++y)
        png_read_row(ctx.png, out.data.data() + static_cast<std::size_t>(y) * w * 3, nullptr);
    png_read_end(ctx.png, nullptr);
    return out;
}

void save_raster(const Raster& r, const fs::path& path, const std::string& provenance,
                 int compression) {
    if (r.width < 1 || r.height < 1 ||
        r.data.size() != static_cast<std::size_t>(r.width) * r.height * 3)
        fail(Error::Kind::invalid_argument, "raster shape/data mismatch");
    if (compression < 0 || compression > 9)
        fail(Error::Kind::invalid_argument, "png compression level must be 0..9");

    fs::path tmp = path;
    tmp += ".tmp";

    {
        FileCloser fc;
        fc.f = std::fopen(tmp.string().c_str(), "wb");
        if (!fc.f) fail(Error::Kind::io_failure, "cannot create " + tmp.string());

        std::string errmsg;
        PngWriteCtx ctx;
        ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &errmsg, on_png_error, on_png_warning);
        if (!ctx.png) fail(Error::Kind::io_failure, "png_create_write_struct failed");
        ctx.info = png_create_info_struct(ctx.png);
        if (!ctx.info) fail(Error::Kind::io_failure, "png_create_info_struct failed");

        if (setjmp(png_jmpbuf(ctx.png))) {
            std::error_code ec;
            fs::remove(tmp, ec);
            fail(Error::Kind::io_failure, "PNG write failed for " + path.string() + ": " + errmsg);
        }

        png_init_io(ctx.png, fc.f);
        // fast, deterministic encode; tiles are bulk intermediate data
        png_set_compression_level(ctx.png, compression);
        png_set_filter(ctx.png, 0, compression == 0 ? PNG_FILTER_NONE : PNG_FAST_FILTERS);
        png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(r.width),
                     static_cast<png_uint_32>(r.height), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        if (!provenance.empty()) {
            png_text text;
            std::memset(&text, 0, sizeof(text));
            char key[] = "provenance";
            text.compression = PNG_TEXT_COMPRESSION_NONE;
            text.key = key;
            text.text = const_cast<char*>(provenance.c_str());
            text.text_length = provenance.size();
            png_set_text(ctx.png, ctx.info, &text, 1);
        }
        png_write_info(ctx.png, ctx.info);
        for (int y = 0; y < r.height; ++y)
            png_write_row(ctx.png,
                          const_cast<png_bytep>(r.data.data() + static_cast<std::size_t>(y) * r.width * 3));
        png_write_end(ctx.png, ctx.info);
        if (std::fflush(fc.f) != 0) {
            std::error_code ec;
            fs::remove(tmp, ec);
            fail(Error::Kind::io_failure, "flush failed: " + tmp.string());
        }
    }

    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(Error::Kind::io_failure, "rename to " + path.string() + " failed");
    }
}

namespace {

// Per-axis box weights for S -> T. Weight of source index i inside output
// cell o is the overlap of [i,i+1) with [o*S/T,(o+1)*S/T), scaled by T so it
// is an integer; weights for one output cell sum to S.
struct AxisSeg {
    int first;                      // first source index
    std::vector<std::uint32_t> w;   // weights, scaled by T
};

std::vector<AxisSeg> axis_weights(int S, int T) {
    std::vector<AxisSeg> segs(static_cast<std::size_t>(T));
    for (int o = 0; o < T; ++o) {
        const std::int64_t lo = static_cast<std::int64_t>(o) * S;        // in 1/T units
        const std::int64_t hi = static_cast<std::int64_t>(o + 1) * S;
        const int i0 = static_cast<int>(lo / T);
        const int i1 = static_cast<int>((hi - 1) / T); // last overlapped source index
        AxisSeg seg;
        seg.first = i0;
        seg.w.reserve(static_cast<std::size_t>(i1 - i0 + 1));
        for (int i = i0; i <= i1; ++i) {
            const std::int64_t a = std::max<std::int64_t>(lo, static_cast<std::int64_t>(i) * T);
            const std::int64_t b = std::min<std::int64_t>(hi, static_cast<std::int64_t>(i + 1) * T);
            seg.w.push_back(static_cast<std::uint32_t>(b - a));
        }
        segs[static_cast<std::size_t>(o)] = std::move(seg);
    }
    return segs;
}

// Horizontal box pass over one source row: out[ox*3+c] = sum_i wx*v, exact.
void hresample_row(const std::uint8_t* row, const std::vector<AxisSeg>& wx, std::uint64_t* out) {
    const std::size_t tw = wx.size();
    for (std::size_t ox = 0; ox < tw; ++ox) {
        const AxisSeg& seg = wx[ox];
        std::uint64_t s0 = 0, s1 = 0, s2 = 0;
        const std::uint8_t* p = row + static_cast<std::size_t>(seg.first) * 3;
        for (std::uint32_t weight : seg.w) {
            s0 += static_cast<std::uint64_t>(weight) * p[0];
            s1 += static_cast<std::uint64_t>(weight) * p[1];
            s2 += static_cast<std::uint64_t>(weight) * p[2];
            p += 3;
        }
        out[ox * 3 + 0] = s0;
        out[ox * 3 + 1] = s1;
        out[ox * 3 + 2] = s2;
    }
}

} // namespace

Raster downsample(const Raster& r, int target_w, int target_h) {
    if (target_w < 1 || target_h < 1)
        fail(Error::Kind::invalid_argument, "downsample target must be >= 1");
    if (target_w > r.width || target_h > r.height)
        fail(Error::Kind::invalid_argument,
             "downsample target " + std::to_string(target_w) + "x" + std::to_string(target_h) +
                 " exceeds source " + std::to_string(r.width) + "x" + std::to_string(r.height));
    if (target_w == r.width && target_h == r.height) return r;

    const auto wx = axis_weights(r.width, target_w);
    const auto wy = axis_weights(r.height, target_h);

    Raster out(target_w, target_h);
    const std::size_t row_cells = static_cast<std::size_t>(target_w) * 3;
    std::vector<std::uint64_t> hrow(row_cells);
    std::vector<std::uint64_t> acc(row_cells);

    // total weight mass per output pixel = S_w * S_h; round half away from zero
    const std::uint64_t area = static_cast<std::uint64_t>(r.width) * static_cast<std::uint64_t>(r.height);

    int cached_row = -1;
    for (int oy = 0; oy < target_h; ++oy) {
        std::fill(acc.begin(), acc.end(), 0);
        const AxisSeg& seg = wy[static_cast<std::size_t>(oy)];
        for (std::size_t k = 0; k < seg.w.size(); ++k) {
            const int j = seg.first + static_cast<int>(k);
            if (j != cached_row) {
                hresample_row(r.data.data() + static_cast<std::size_t>(j) * r.width * 3, wx, hrow.data());
                cached_row = j;
            }
            const std::uint64_t weight = seg.w[k];
            for (std::size_t i = 0; i < row_cells; ++i) acc[i] += weight * hrow[i];
        }
        std::uint8_t* dst = out.data.data() + static_cast<std::size_t>(oy) * target_w * 3;
        for (std::size_t i = 0; i < row_cells; ++i)
            dst[i] = static_cast<std::uint8_t>((2 * acc[i] + area) / (2 * area));
    }
    return out;
}

} // namespace mstile
