#include "enfgrid/synth.hpp"

#include <algorithm>
#include <cmath>

#include "enfgrid/errors.hpp"
#include "enfgrid/rng.hpp"

namespace enfgrid {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void GridProfile::validate() const {
    if (!(drift_sigma_hz >= 0.0 && drift_sigma_hz < 1.0))
        raise(ErrorCode::InvalidProfile, "drift_sigma must lie in [0, 1) Hz");
    if (!(drift_tau_s > 0.0))
        raise(ErrorCode::InvalidProfile, "drift_tau must be positive");
    if (harmonic_amps[0] <= 0.0)
        raise(ErrorCode::InvalidProfile, "fundamental amplitude must be positive");
    for (double a : harmonic_amps)
        if (a < 0.0) raise(ErrorCode::InvalidProfile, "harmonic amplitudes must be >= 0");
    if (snr_db_min > snr_db_max)
        raise(ErrorCode::InvalidProfile, "snr range is inverted");
}

GridProfile default_grid_profile(Grid grid, RecType rec_type) {
    // Profiles separate along two axes, drift scale (sigma) and drift rate
    // (tau), with the wide+fast corner left unoccupied. Bandpassed white
    // noise is both wide and fast, so no single class sits next to it in
    // feature space; a smooth wide wander and a narrow rapid jitter are each
    // half-similar, which keeps the open-set gate effective.
    GridProfile p;
    switch (grid) {
        // 60 Hz grids
        case Grid::A: p = {Nominal::Hz60, 0.010, 3.0,  {1.0, 0.30, 0.10}, 0, 0}; break;
        case Grid::C: p = {Nominal::Hz60, 0.450, 20.0, {1.0, 0.05, 0.30}, 0, 0}; break;
        case Grid::I: p = {Nominal::Hz60, 0.120, 0.7,  {1.0, 0.15, 0.02}, 0, 0}; break;
        // 50 Hz grids
        case Grid::B: p = {Nominal::Hz50, 0.012, 2.5,  {1.0, 0.25, 0.08}, 0, 0}; break;
        case Grid::D: p = {Nominal::Hz50, 0.400, 25.0, {1.0, 0.06, 0.25}, 0, 0}; break;
        case Grid::E: p = {Nominal::Hz50, 0.100, 0.8,  {1.0, 0.18, 0.03}, 0, 0}; break;
        case Grid::F: p = {Nominal::Hz50, 0.150, 6.0,  {1.0, 0.40, 0.15}, 0, 0}; break;
        case Grid::G: p = {Nominal::Hz50, 0.600, 60.0, {1.0, 0.02, 0.12}, 0, 0}; break;
        case Grid::H: p = {Nominal::Hz50, 0.040, 10.0, {1.0, 0.10, 0.35}, 0, 0}; break;
        case Grid::N:
            raise(ErrorCode::InvalidProfile, "grid N has no ENF profile");
    }
    // power recordings carry much stronger ENF traces
    if (rec_type == RecType::Power) {
        p.snr_db_min = 15.0;
        p.snr_db_max = 30.0;
    } else {
        p.snr_db_min = 0.0;
        p.snr_db_max = 10.0;
    }
    return p;
}

Recording synth_enf(const GridProfile& profile, double duration_s,
                    std::uint32_t sample_rate, std::uint64_t seed) {
    profile.validate();
    if (duration_s < 16.0)
        raise(ErrorCode::InvalidProfile, "duration must be at least 16 s");
    if (sample_rate == 0)
        raise(ErrorCode::InvalidProfile, "sample rate must be positive");

    const double f0 = nominal_hz(profile.nominal);
    const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate);
    const double dt = 1.0 / static_cast<double>(sample_rate);

    Rng rng(seed);

    // exact OU transition: stationary std stays drift_sigma for any dt
    const double decay = std::exp(-dt / profile.drift_tau_s);
    const double diffusion = profile.drift_sigma_hz * std::sqrt(1.0 - decay * decay);
    double drift = profile.drift_sigma_hz > 0.0 ? rng.gaussian(0.0, profile.drift_sigma_hz) : 0.0;

    const std::array<double, 3> phases = {rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi),
                                          rng.uniform(0.0, kTwoPi)};
    const double snr_db = rng.uniform(profile.snr_db_min, profile.snr_db_max);

    Recording rec;
    rec.sample_rate = sample_rate;
    rec.rec_type = RecType::Unknown;
    rec.samples.resize(n);

    double phase = 0.0; // integral of 2*pi*f(t)
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = f0 + drift;
        phase += kTwoPi * f * dt;
        double s = 0.0;
        for (int h = 0; h < 3; ++h)
            s += profile.harmonic_amps[h] * std::sin((h + 1) * phase + phases[h]);
        rec.samples[i] = s;
        power += s * s;
        if (profile.drift_sigma_hz > 0.0)
            drift = drift * decay + diffusion * rng.gaussian();
    }
    power /= static_cast<double>(n);

    // additive white Gaussian noise at the drawn SNR
    const double noise_std = std::sqrt(power) * std::pow(10.0, -snr_db / 20.0);
    if (noise_std > 0.0)
        for (double& s : rec.samples) s += noise_std * rng.gaussian();

    // leave headroom so the 16-bit writer never clips
    double peak = 0.0;
    for (double s : rec.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0) {
        const double scale = 0.9 / peak;
        for (double& s : rec.samples) s *= scale;
    }
    return rec;
}

Recording synth_noise(double duration_s, std::uint32_t sample_rate, std::uint64_t seed) {
    if (duration_s < 16.0)
        raise(ErrorCode::InvalidProfile, "duration must be at least 16 s");
    Rng rng(seed);
    Recording rec;
    rec.sample_rate = sample_rate;
    rec.samples.resize(static_cast<std::size_t>(duration_s * sample_rate));
    for (double& s : rec.samples) s = 0.25 * rng.gaussian();
    for (double& s : rec.samples) s = std::clamp(s, -0.999, 0.999);
    return rec;
}

std::vector<Grid> toy_grid_order(std::size_t count) {
    static constexpr std::array<Grid, 9> order = {Grid::A, Grid::C, Grid::I, Grid::B, Grid::D,
                                                  Grid::E, Grid::F, Grid::G, Grid::H};
    if (count > order.size())
        raise(ErrorCode::ConfigInvalid, "at most nine grids exist");
    return std::vector<Grid>(order.begin(), order.begin() + count);
}

} // namespace enfgrid
