#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "enfgrid/signal.hpp"

namespace enfgrid {

// Synthetic grid signature: an Ornstein-Uhlenbeck frequency drift around the
// nominal (stationary std drift_sigma_hz, mean-reversion time drift_tau_s),
// a three-harmonic stack, and a per-recording SNR drawn from [snr_db_min,
// snr_db_max]. Per-grid profile differences are what make the toy
// classification task learnable.
struct GridProfile {
    Nominal nominal = Nominal::Hz50;
    double drift_sigma_hz = 0.05; // must stay < 1 (inside the +-1 Hz band)
    double drift_tau_s = 10.0;
    std::array<double, 3> harmonic_amps = {1.0, 0.2, 0.1};
    double snr_db_min = 10.0;
    double snr_db_max = 20.0;

    void validate() const; // throws InvalidProfile
};

// Distinct profiles for grids A..I (A, C, I at 60 Hz; the rest at 50 Hz).
// rec_type selects the SNR band: Power carries stronger traces.
GridProfile default_grid_profile(Grid grid, RecType rec_type);

// f(t) = f0 + OU(t); signal = sum_h a_h sin(h * phase(t) + phi_h) + white
// Gaussian noise at the drawn SNR, peak-scaled to 0.9. Deterministic per
// seed. Requires duration >= 16 s.
Recording synth_enf(const GridProfile& profile, double duration_s,
                    std::uint32_t sample_rate, std::uint64_t seed);

// Noise-only recording (no ENF component) for the open-set "N" class.
Recording synth_noise(double duration_s, std::uint32_t sample_rate, std::uint64_t seed);

struct CorpusSpec {
    std::vector<Grid> grids;                  // which grid letters to emit
    std::vector<RecType> rec_types = {RecType::Audio};
    std::size_t train_per_grid = 16;
    std::size_t practice_per_grid = 0;
    std::size_t test_per_grid = 4;
    std::size_t noise_test = 0; // extra "N" recordings in the test split
    double duration_s = 64.0;
    std::uint32_t sample_rate = kDefaultSampleRate;
    std::uint64_t seed = 7;
    // profile override; empty = default_grid_profile
    std::map<Grid, GridProfile> profiles;
};

// First-N toy ordering: the three 60 Hz grids come first so a small corpus
// exercises one group end to end.
std::vector<Grid> toy_grid_order(std::size_t count);

} // namespace enfgrid
