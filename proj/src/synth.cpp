#include "lstmcnn/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace lstmcnn {

void SynthConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw UsageError(std::string("synth config: ") + name + " must be positive");
    };
    if (subjects_per_class < 1) throw UsageError("synth config: subjects_per_class must be >= 1");
    positive(sample_rate_hz, "sample_rate_hz");
    positive(duration_sec, "duration_sec");
    positive(spiral_pitch_mm, "spiral_pitch_mm");
    positive(spiral_turns, "spiral_turns");
    if (!(tremor_freq_lo_hz > 0.0) || tremor_freq_hi_hz < tremor_freq_lo_hz) {
        throw UsageError("synth config: tremor frequency band is invalid");
    }
    if (tremor_amp_pd_mm < 0.0 || tremor_amp_hc_mm < 0.0 || noise_sd_mm < 0.0) {
        throw UsageError("synth config: amplitudes must be nonnegative");
    }
    if (sample_rate_hz * duration_sec < 2.0) {
        throw UsageError("synth config: fewer than 2 samples per sequence");
    }
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// arc length of r = b*theta from 0 to theta
double spiral_arclen(double b, double theta) {
    return 0.5 * b * (theta * std::sqrt(1.0 + theta * theta) + std::asinh(theta));
}

}  // namespace

RawSequence generate_spiral_sequence(Label cls, const SynthConfig& cfg, Rng& rng,
                                     const std::string& subject_id) {
    cfg.validate();
    const std::size_t n = static_cast<std::size_t>(std::llround(cfg.sample_rate_hz * cfg.duration_sec));
    const double dt = 1.0 / cfg.sample_rate_hz;
    const double b = cfg.spiral_pitch_mm / kTwoPi;
    const double theta_end = kTwoPi * cfg.spiral_turns;
    const double pen_speed = spiral_arclen(b, theta_end) / cfg.duration_sec;  // mm/s

    const double tremor_amp = cls == Label::PD ? cfg.tremor_amp_pd_mm : cfg.tremor_amp_hc_mm;

    // per-subject character, drawn before any per-sample noise; the tremor
    // frequency and phase vary across the configured band, the nuisance
    // drifts vary only mildly so they do not drown the class signal
    const double tremor_freq = rng.uniform(cfg.tremor_freq_lo_hz, cfg.tremor_freq_hi_hz + 1e-12);
    const double tremor_phase = rng.uniform(0.0, kTwoPi);
    const double az_base = rng.uniform(0.5, kTwoPi - 0.5);
    const double az_drift_phase = rng.uniform(0.0, 0.3);
    const double alt_base = rng.uniform(0.8, 1.2);
    const double alt_drift_phase = rng.uniform(0.0, 0.3);
    const double pressure_base = rng.uniform(495.0, 505.0);
    const double pressure_wobble_phase = rng.uniform(0.0, kTwoPi);

    RawSequence seq;
    seq.subject_id = subject_id;
    seq.label = cls;
    seq.task = "spiral";
    seq.t.reserve(n);
    seq.x.reserve(n);
    seq.y.reserve(n);
    seq.azimuth.reserve(n);
    seq.altitude.reserve(n);
    seq.pressure.reserve(n);

    double theta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double r = b * theta + tremor_amp * std::sin(kTwoPi * tremor_freq * t + tremor_phase);
        seq.t.push_back(t);
        seq.x.push_back(r * std::cos(theta) + rng.normal(0.0, cfg.noise_sd_mm));
        seq.y.push_back(r * std::sin(theta) + rng.normal(0.0, cfg.noise_sd_mm));
        seq.azimuth.push_back(az_base + 0.3 * std::sin(kTwoPi * 0.05 * t + az_drift_phase));
        seq.altitude.push_back(alt_base + 0.1 * std::sin(kTwoPi * 0.03 * t + alt_drift_phase));
        // smooth bump over the recording; the wobble rides on the tremor
        // amplitude so equal-amplitude classes stay indistinguishable
        seq.pressure.push_back(pressure_base + 150.0 * std::sin(M_PI * t / cfg.duration_sec) +
                               100.0 * tremor_amp *
                                   std::sin(kTwoPi * tremor_freq * t + pressure_wobble_phase) +
                               rng.normal(0.0, 2.0));
        // constant pen speed: d(theta)/dt = v / (b * sqrt(1 + theta^2))
        theta += dt * pen_speed / (b * std::sqrt(1.0 + theta * theta));
    }
    return seq;
}

std::vector<ManifestRow> generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw DataError("generate_dataset: cannot create output directory '" + out_dir + "'");
    }

    Rng master(cfg.seed);
    std::vector<ManifestRow> rows;
    std::uint64_t stream = 0;
    char name[32];
    for (Label cls : {Label::PD, Label::HC}) {
        for (std::size_t i = 0; i < cfg.subjects_per_class; ++i, ++stream) {
            std::snprintf(name, sizeof(name), "%s%02zu", label_name(cls), i + 1);
            Rng child = master.child(stream);
            RawSequence seq = generate_spiral_sequence(cls, cfg, child, name);
            const std::string filename = std::string(name) + ".dwt";
            const std::string path = (std::filesystem::path(out_dir) / filename).string();
            write_sequence_dwt(seq, path);
            ManifestRow row;
            row.subject_id = name;
            row.label = cls;
            row.task = "spiral";
            row.path = path;
            rows.push_back(std::move(row));
        }
    }

    // manifest rows reference the files by name, keeping the directory relocatable
    std::vector<ManifestRow> relative = rows;
    for (auto& r : relative) r.path = std::filesystem::path(r.path).filename().string();
    write_manifest(relative, (std::filesystem::path(out_dir) / "manifest.csv").string());
    return rows;
}

}  // namespace lstmcnn
