#ifndef LSTMCNN_SYNTH_HPP
#define LSTMCNN_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lstmcnn/numkit.hpp"
#include "lstmcnn/signal.hpp"

namespace lstmcnn {

// Deterministic spiral-drawing generator. PD-like recordings carry a radial
// tremor in the parkinsonian 4-6 Hz band; HC-like recordings are smooth.
// Everything else (drift, noise, pressure profile) is class-independent or
// scales with the tremor amplitude, so setting the two amplitudes equal
// makes the classes statistically identical.
struct SynthConfig {
    std::size_t subjects_per_class = 15;
    double sample_rate_hz = 200.0;
    double duration_sec = 20.0;
    double spiral_pitch_mm = 2.0;  // radial gain per turn
    double spiral_turns = 5.0;
    double tremor_freq_lo_hz = 4.0;
    double tremor_freq_hi_hz = 6.0;
    double tremor_amp_pd_mm = 0.4;
    double tremor_amp_hc_mm = 0.0;
    double noise_sd_mm = 0.05;
    std::uint64_t seed = 1;

    void validate() const;
};

// Archimedean spiral r = b*theta sampled at sample_rate with the angular
// velocity adjusted for roughly constant pen speed. Tremor frequency and
// phase are drawn per subject from the configured band.
RawSequence generate_spiral_sequence(Label cls, const SynthConfig& cfg, Rng& rng,
                                     const std::string& subject_id);

// Writes one dwt file per subject plus the manifest CSV; returns the rows.
std::vector<ManifestRow> generate_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace lstmcnn

#endif
