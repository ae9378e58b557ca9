#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "enfgrid/signal.hpp"

namespace enfgrid {

// Magnitude STFT, time_bins x freq_bins (one-sided spectrum).
struct Spectrogram {
    std::vector<double> magnitudes; // row-major, time_bins x freq_bins
    std::size_t time_bins = 0;
    std::size_t freq_bins = 0;
    double freq_resolution = 0.0; // Hz per bin = sample_rate / nfft
    double time_step = 0.0;       // seconds per column = hop / sample_rate
    std::uint32_t sample_rate = 0;

    double at(std::size_t t, std::size_t f) const {
        return magnitudes[t * freq_bins + f];
    }
};

// STFT defaults used by nominal-frequency detection: 4 s Hann window, 50%
// hop, 8 s zero-padded FFT -> 0.125 Hz resolution at the 1 kHz working rate.
struct StftParams {
    std::size_t window_len = 4000;
    std::size_t hop = 2000;
    std::size_t nfft = 8000;

    static StftParams for_rate(std::uint32_t sample_rate) {
        StftParams p;
        p.window_len = static_cast<std::size_t>(4) * sample_rate;
        p.hop = p.window_len / 2;
        p.nfft = static_cast<std::size_t>(8) * sample_rate;
        return p;
    }
};

// Hann-window magnitude STFT. Column count = floor((N - window_len)/hop) + 1.
// Throws InvalidWindow when window_len > nfft or the signal is shorter than
// one window.
Spectrogram spectrogram(const std::vector<double>& samples, std::uint32_t sample_rate,
                        std::size_t window_len, std::size_t hop, std::size_t nfft);

// Mean magnitude over all cells whose bin center lies in
// [center - halfwidth, center + halfwidth], averaged over time and frequency.
// Throws BandOutOfRange.
double harmonic_band_mean(const Spectrogram& spec, double center_hz, double halfwidth_hz);

struct NominalDecision {
    Nominal nominal = Nominal::Hz50;
    double score50 = 0.0;
    double score60 = 0.0;
    std::array<double, 3> harmonics50{}; // band means at 50/100/150 Hz
    std::array<double, 3> harmonics60{}; // band means at 60/120/180 Hz
    bool tie = false;
};

// Four-step detection: band means at the first three harmonics of each
// candidate, drop the weakest harmonic per candidate, score with the mean of
// the remaining two, pick the larger score. Ties break to Hz50 (flagged).
// Requires at least 16 s of signal.
NominalDecision detect_nominal(const Recording& recording,
                               double halfwidth_hz = 1.0);

// Zero-phase ENF isolation: 4th-order Butterworth bandpass at
// [f0 - 1, f0 + 1] Hz applied forward then backward (8th-order effective).
// Output length equals input length. Throws NyquistViolation.
std::vector<double> bandpass_enf(const std::vector<double>& samples,
                                 std::uint32_t sample_rate, Nominal nominal);

// General zero-phase Butterworth bandpass; order is the prototype order
// (poles double for the bandpass and again for the two passes).
struct BandpassFilter {
    BandpassFilter(double low_hz, double high_hz, double sample_rate, int order = 4);

    // single forward pass, zero initial state
    std::vector<double> filter(const std::vector<double>& input) const;
    // forward-backward pass with odd-symmetric edge extension
    std::vector<double> filtfilt(const std::vector<double>& input) const;
    // |H(f)| of one pass, from the cascade coefficients
    double magnitude_at(double freq_hz) const;

    struct Biquad {
        double b0, b1, b2; // numerator
        double a1, a2;     // denominator (a0 = 1)
    };
    const std::vector<Biquad>& sections() const { return sections_; }

private:
    std::vector<Biquad> sections_;
    double sample_rate_;
};

// Debug export: first line is the frequency header, then one line per time
// column.
void spectrogram_to_csv(const Spectrogram& spec, const std::filesystem::path& path);

} // namespace enfgrid
