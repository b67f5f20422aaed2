#include "mstile/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mstile/util/parallel.hpp"
#include "mstile/util/rng.hpp"

namespace fs = std::filesystem;

namespace mstile {

void validate_synth_params(const SynthParams& p) {
    if (p.wsi_size < 64) fail(Error::Kind::config_invalid, "wsi_size must be >= 64");
    if (p.nodule_density < 0) fail(Error::Kind::config_invalid, "nodule_density must be >= 0");
    if (p.nodule_radius_min < 1 || p.nodule_radius_max < p.nodule_radius_min)
        fail(Error::Kind::config_invalid, "nodule radius range must satisfy 1 <= min <= max");
    if (p.nodule_contrast < 0) fail(Error::Kind::config_invalid, "nodule_contrast must be >= 0");
    if (p.fine_texture_scale < 1 || p.micro_texture_scale < 1 || p.mid_texture_scale < 1 ||
        p.base_field_scale < 1)
        fail(Error::Kind::config_invalid, "texture scales must be >= 1");
    if (p.noise_std < 0 || p.micro_texture_std < 0 || p.mid_texture_std < 0 ||
        p.base_field_std < 0)
        fail(Error::Kind::config_invalid, "texture stds must be >= 0");
    if (p.dead_density < 0) fail(Error::Kind::config_invalid, "dead_density must be >= 0");
    if (p.dead_radius_min < 1 || p.dead_radius_max < p.dead_radius_min)
        fail(Error::Kind::config_invalid, "dead radius range must satisfy 1 <= min <= max");
    if (p.dead_strength < 0 || p.dead_strength > 1)
        fail(Error::Kind::config_invalid, "dead_strength must be in [0,1]");
    for (int c : p.base_color)
        if (c < 0 || c > 255) fail(Error::Kind::config_invalid, "base_color must be in [0,255]");
    if (p.texture_jitter < 0 || p.texture_jitter >= 1)
        fail(Error::Kind::config_invalid, "texture_jitter must be in [0,1)");
}

namespace {

// Poisson(lambda) disk set: count from summed Exp(1) gaps, centers uniform
// over the slide, radii uniform in range. Separate streams keep the count
// draw from disturbing the parameter draws when lambda changes.
std::vector<Nodule> draw_disks(double density, int r_min, int r_max, int wsi_size,
                               std::uint64_t patient_seed, const char* count_stream,
                               const char* param_stream) {
    const double lambda = density * (static_cast<double>(wsi_size) * wsi_size / 1e6);
    Rng count_rng(derive_seed(patient_seed, count_stream));
    int count = 0;
    double acc = 0.0;
    for (;;) {
        acc += -std::log1p(-count_rng.next_unit()); // Exp(1) gap
        if (acc > lambda) break;
        ++count;
    }
    Rng param_rng(derive_seed(patient_seed, param_stream));
    std::vector<Nodule> out(static_cast<std::size_t>(count));
    for (auto& n : out) {
        n.cx = param_rng.uniform(0.0, static_cast<double>(wsi_size));
        n.cy = param_rng.uniform(0.0, static_cast<double>(wsi_size));
        n.r = param_rng.uniform(static_cast<double>(r_min), static_cast<double>(r_max));
    }
    return out;
}

} // namespace

std::vector<Nodule> draw_nodules(const SynthParams& p, std::uint64_t patient_seed) {
    return draw_disks(p.nodule_density, p.nodule_radius_min, p.nodule_radius_max, p.wsi_size,
                      patient_seed, "nodule-count", "nodule-params");
}

std::vector<Nodule> draw_dead_patches(const SynthParams& p, std::uint64_t patient_seed) {
    return draw_disks(p.dead_density, p.dead_radius_min, p.dead_radius_max, p.wsi_size,
                      patient_seed, "dead-count", "dead-params");
}

namespace {

inline double smoothstep01(double t) { return t * t * (3.0 - 2.0 * t); }

// One value-noise field, evaluated row by row. Lattice rows are cached and
// only recomputed when the row crosses a lattice cell; per-pixel work is a
// single horizontal lerp of vertically pre-interpolated, amplitude-scaled
// column values.
class FieldRows {
public:
    void init(std::uint64_t salt, int scale, double nominal_std, int size) {
        salt_ = salt;
        scale_ = scale;
        amp_ = nominal_std * 3.4641016151377544; // sqrt(12): uniform range for this std
        cols_ = size / scale + 2;
        lat0_.resize(static_cast<std::size_t>(cols_));
        lat1_.resize(static_cast<std::size_t>(cols_));
        col_.resize(static_cast<std::size_t>(cols_));
        ix_.resize(static_cast<std::size_t>(size));
        tx_.resize(static_cast<std::size_t>(size));
        for (int x = 0; x < size; ++x) {
            ix_[static_cast<std::size_t>(x)] = x / scale;
            tx_[static_cast<std::size_t>(x)] =
                smoothstep01(static_cast<double>(x % scale) / scale);
        }
        j0_ = -1;
    }

    void prepare_row(int y) {
        const int j0 = y / scale_;
        if (j0 != j0_) {
            for (int i = 0; i < cols_; ++i) {
                lat0_[static_cast<std::size_t>(i)] = lattice_unit(salt_, i, j0);
                lat1_[static_cast<std::size_t>(i)] = lattice_unit(salt_, i, j0 + 1);
            }
            j0_ = j0;
        }
        const double ty = smoothstep01(static_cast<double>(y % scale_) / scale_);
        for (int i = 0; i < cols_; ++i) {
            const double v =
                lat0_[static_cast<std::size_t>(i)] +
                (lat1_[static_cast<std::size_t>(i)] - lat0_[static_cast<std::size_t>(i)]) * ty;
            col_[static_cast<std::size_t>(i)] = amp_ * (v - 0.5);
        }
    }

    double at(int x) const {
        const int i = ix_[static_cast<std::size_t>(x)];
        const double a = col_[static_cast<std::size_t>(i)];
        return a + (col_[static_cast<std::size_t>(i) + 1] - a) * tx_[static_cast<std::size_t>(x)];
    }

private:
    std::uint64_t salt_ = 0;
    int scale_ = 1;
    double amp_ = 0.0;
    int cols_ = 0;
    int j0_ = -1;
    std::vector<double> lat0_, lat1_, col_, tx_;
    std::vector<int> ix_;
};

} // namespace

GeneratedPatient generate_patient(Label label, const SynthParams& p, std::uint64_t seed) {
    validate_synth_params(p);
    const int size = p.wsi_size;

    GeneratedPatient out;
    {
        // annotation uniform over the central half: [size/4, size/4 + size/2)
        Rng ann(derive_seed(seed, "annotation"));
        out.center_x = size / 4 + static_cast<int>(ann.below(static_cast<std::uint64_t>(size / 2)));
        out.center_y = size / 4 + static_cast<int>(ann.below(static_cast<std::uint64_t>(size / 2)));
    }

    Rng jitter(derive_seed(seed, "texture-jitter"));
    const double fine_mul = jitter.uniform(1.0 - p.texture_jitter, 1.0 + p.texture_jitter);
    const double mid_mul = jitter.uniform(1.0 - p.texture_jitter, 1.0 + p.texture_jitter);
    const double micro_ox = jitter.uniform(0.0, static_cast<double>(p.micro_texture_scale));
    const double micro_oy = jitter.uniform(0.0, static_cast<double>(p.micro_texture_scale));

    std::vector<Nodule> nodules;
    if (label == Label::dn && p.nodule_contrast > 0) nodules = draw_nodules(p, seed);
    // suppression strength rides on the same knob as the bump so that
    // contrast = 0 makes the classes pixel-identical
    const double suppress = p.nodule_contrast / (p.nodule_contrast + 8.0);

    // texture-dead patches are drawn for both classes from their own streams
    const std::vector<Nodule> dead = draw_dead_patches(p, seed);

    FieldRows fine, mid, slow;
    fine.init(derive_seed(seed, "field-fine"), p.fine_texture_scale, p.noise_std * fine_mul, size);
    mid.init(derive_seed(seed, "field-mid"), p.mid_texture_scale, p.mid_texture_std * mid_mul,
             size);
    slow.init(derive_seed(seed, "field-slow"), p.base_field_scale, p.base_field_std, size);

    // grating: amp * sin(wx(x+ox)) * sin(wy(y+oy)); the product of two unit
    // sinusoids has variance 1/4, so amp = 2*std gives the nominal std
    const double micro_amp = 2.0 * p.micro_texture_std * fine_mul;
    const double micro_w = 6.283185307179586 / p.micro_texture_scale;
    std::vector<double> micro_colv(static_cast<std::size_t>(size));
    for (int x = 0; x < size; ++x)
        micro_colv[static_cast<std::size_t>(x)] = micro_amp * std::sin(micro_w * (x + micro_ox));

    out.raster = Raster(size, size);
    std::uint8_t* data = out.raster.data.data();
    std::vector<double> bump(static_cast<std::size_t>(size));
    std::vector<double> deadrow(static_cast<std::size_t>(size));
    const double b0 = p.base_color[0], b1 = p.base_color[1], b2 = p.base_color[2];

    for (int y = 0; y < size; ++y) {
        fine.prepare_row(y);
        mid.prepare_row(y);
        slow.prepare_row(y);
        const double micro_rowv = std::sin(micro_w * (y + micro_oy));

        std::fill(bump.begin(), bump.end(), 0.0);
        for (const Nodule& n : nodules) {
            const double dy = y - n.cy;
            if (std::abs(dy) >= n.r) continue;
            const double half = std::sqrt(n.r * n.r - dy * dy);
            const int x0 = std::max(0, static_cast<int>(std::ceil(n.cx - half)));
            const int x1 = std::min(size - 1, static_cast<int>(std::floor(n.cx + half)));
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - n.cx;
                const double d = std::sqrt(dx * dx + dy * dy);
                const double t = 1.0 - d / n.r;
                if (t <= 0.0) continue;
                const double v = smoothstep01(t);
                if (v > bump[static_cast<std::size_t>(x)]) bump[static_cast<std::size_t>(x)] = v;
            }
        }

        std::fill(deadrow.begin(), deadrow.end(), 0.0);
        for (const Nodule& n : dead) {
            const double dy = y - n.cy;
            if (std::abs(dy) >= n.r) continue;
            const double half = std::sqrt(n.r * n.r - dy * dy);
            const int x0 = std::max(0, static_cast<int>(std::ceil(n.cx - half)));
            const int x1 = std::min(size - 1, static_cast<int>(std::floor(n.cx + half)));
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - n.cx;
                const double d = std::sqrt(dx * dx + dy * dy);
                const double t = 1.0 - d / n.r;
                if (t <= 0.0) continue;
                // flat core, smoothstep rim over the outer 30% of the radius
                const double v = smoothstep01(std::min(1.0, t / 0.3));
                if (v > deadrow[static_cast<std::size_t>(x)])
                    deadrow[static_cast<std::size_t>(x)] = v;
            }
        }

        std::uint8_t* row = data + static_cast<std::size_t>(y) * size * 3;
        for (int x = 0; x < size; ++x) {
            const double nb = bump[static_cast<std::size_t>(x)];
            // suppression saturates toward the nodule core faster than the
            // intensity bump ramps up
            const double sg = std::min(1.0, 2.0 * nb);
            const double dd = deadrow[static_cast<std::size_t>(x)];
            const double texmul = 1.0 - p.dead_strength * dd;
            const double f = (fine.at(x) * (1.0 - suppress * sg) +
                              micro_colv[static_cast<std::size_t>(x)] * micro_rowv) *
                                 texmul +
                             mid.at(x) + slow.at(x) - p.nodule_contrast * nb;
            // lrint under the default FP environment: round to nearest even
            const long v0 = std::lrint(b0 + f);
            const long v1 = std::lrint(b1 + f);
            const long v2 = std::lrint(b2 + f);
            row[3 * x + 0] = static_cast<std::uint8_t>(std::clamp(v0, 0L, 255L));
            row[3 * x + 1] = static_cast<std::uint8_t>(std::clamp(v1, 0L, 255L));
            row[3 * x + 2] = static_cast<std::uint8_t>(std::clamp(v2, 0L, 255L));
        }
    }
    return out;
}

std::vector<PatientRecord> generate_cohort(int n_cmb, int n_dn, const SynthParams& p,
                                           std::uint64_t seed, const fs::path& out_dir, int jobs,
                                           const std::string& provenance) {
    if (n_cmb < 1 || n_dn < 1)
        fail(Error::Kind::invalid_argument, "cohort needs at least one patient per class");
    validate_synth_params(p);

    fs::create_directories(out_dir / "wsi");
    const int total = n_cmb + n_dn;
    std::vector<PatientRecord> patients(static_cast<std::size_t>(total));

    parallel_for(static_cast<std::size_t>(total), jobs, [&](std::size_t i) {
        const Label label = static_cast<int>(i) < n_cmb ? Label::cmb : Label::dn;
        const int class_index = label == Label::cmb ? static_cast<int>(i)
                                                    : static_cast<int>(i) - n_cmb;
        char id[32];
        std::snprintf(id, sizeof id, "%s-%03d", label == Label::cmb ? "cmb" : "dn", class_index);

        const std::uint64_t patient_seed = derive_seed(seed, "patient", {i});
        GeneratedPatient g = generate_patient(label, p, patient_seed);

        const std::string wsi_rel = std::string("wsi/") + id + ".png";
        save_raster(g.raster, out_dir / wsi_rel, provenance, /*compression=*/0);

        PatientRecord rec;
        rec.patient_id = id;
        rec.label = label;
        rec.annotations.push_back({wsi_rel, g.center_x, g.center_y});
        patients[i] = std::move(rec);
    });

    write_cohort(patients, out_dir / "cohort.csv", provenance);
    return patients;
}

} // namespace mstile
