#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <complex>
#include <fstream>

#include "enfgrid/spectral.hpp"
#include "enfgrid/synth.hpp"
#include "test_util.hpp"

using namespace enfgrid;
using testutil::sine_wave;

namespace {

Recording make_recording(std::vector<double> samples, std::uint32_t rate = 1000) {
    Recording rec;
    rec.samples = std::move(samples);
    rec.sample_rate = rate;
    rec.source_id = "test";
    return rec;
}

// independent single-bin DFT magnitude with the same Hann window
double goertzel_bin(const std::vector<double>& samples, std::size_t window_len,
                    std::size_t offset, std::size_t nfft, std::size_t bin) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < window_len; ++i) {
        const double w =
            0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / double(window_len));
        const double angle =
            -2.0 * 3.14159265358979323846 * double(bin) * double(i) / double(nfft);
        acc += samples[offset + i] * w * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    return std::abs(acc);
}

} // namespace

TEST_CASE("50 Hz tone peaks at bin 200 with nfft 4000") {
    const auto tone = sine_wave(50.0, 1.0, 8000, 1000.0);
    const Spectrogram spec = spectrogram(tone, 1000, 4000, 2000, 4000);
    CHECK(spec.freq_resolution == doctest::Approx(0.25));
    CHECK(spec.time_bins == (8000 - 4000) / 2000 + 1);

    for (std::size_t t = 0; t < spec.time_bins; ++t) {
        std::size_t peak = 0;
        for (std::size_t f = 1; f < spec.freq_bins; ++f)
            if (spec.at(t, f) > spec.at(t, peak)) peak = f;
        CHECK(peak == 200);
        // cross-check the peak magnitude against a direct DFT of that bin
        const double direct = goertzel_bin(tone, 4000, t * 2000, 4000, 200);
        CHECK(spec.at(t, 200) == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("zero input gives a zero spectrogram") {
    const std::vector<double> zeros(6000, 0.0);
    const Spectrogram spec = spectrogram(zeros, 1000, 4000, 2000, 4000);
    for (double m : spec.magnitudes) CHECK(m == 0.0);
}

TEST_CASE("constant input confines energy to bin zero") {
    // without zero padding a Hann-windowed constant occupies bins 0 and 1 only
    const std::vector<double> dc(6000, 1.0);
    const Spectrogram spec = spectrogram(dc, 1000, 4000, 2000, 4000);
    const double dc_mag = spec.at(0, 0);
    CHECK(dc_mag > 0.0);
    for (std::size_t f = 2; f < spec.freq_bins; f += 17)
        CHECK(spec.at(0, f) < 1e-9 * dc_mag);
}

TEST_CASE("bad stft parameters raise InvalidWindow") {
    const std::vector<double> x(100, 0.0);
    CHECK(testutil::throws_code([&] { spectrogram(x, 1000, 200, 100, 100); },
                                ErrorCode::InvalidWindow)); // window > nfft
    CHECK(testutil::throws_code([&] { spectrogram(x, 1000, 128, 64, 256); },
                                ErrorCode::InvalidWindow)); // signal < window
}

TEST_CASE("harmonic band mean orders a 50 Hz tone's bands") {
    const auto tone = sine_wave(50.0, 1.0, 32000, 1000.0);
    const Spectrogram spec = spectrogram(tone, 1000, 4000, 2000, 8000);
    const double at50 = harmonic_band_mean(spec, 50.0, 1.0);
    const double at60 = harmonic_band_mean(spec, 60.0, 1.0);
    CHECK(at50 > at60);
    CHECK(at50 > 10.0 * at60);
}

TEST_CASE("zero spectrogram has zero band mean") {
    const std::vector<double> zeros(8000, 0.0);
    const Spectrogram spec = spectrogram(zeros, 1000, 4000, 2000, 8000);
    CHECK(harmonic_band_mean(spec, 120.0, 1.0) == 0.0);
}

TEST_CASE("bands outside the spectrum raise BandOutOfRange") {
    const std::vector<double> x(8000, 0.0);
    const Spectrogram spec = spectrogram(x, 1000, 4000, 2000, 8000);
    CHECK(testutil::throws_code([&] { harmonic_band_mean(spec, 499.9, 1.0); },
                                ErrorCode::BandOutOfRange));
}

TEST_CASE("detection picks 60 Hz from a noisy harmonic stack") {
    GridProfile profile;
    profile.nominal = Nominal::Hz60;
    profile.drift_sigma_hz = 0.05;
    profile.drift_tau_s = 10.0;
    profile.harmonic_amps = {1.0, 0.4, 0.2};
    profile.snr_db_min = profile.snr_db_max = 10.0;
    const Recording rec = synth_enf(profile, 32.0, 1000, 99);
    const NominalDecision decision = detect_nominal(rec);
    CHECK(decision.nominal == Nominal::Hz60);
    CHECK(decision.score60 > decision.score50);
}

TEST_CASE("dropping the weakest harmonic rescues a suppressed stack") {
    // 50 Hz fundamental and 3rd harmonic present, 2nd harmonic fully absent
    auto samples = sine_wave(50.0, 1.0, 32000, 1000.0);
    const auto third = sine_wave(150.0, 0.6, 32000, 1000.0);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] += third[i];
    const NominalDecision decision = detect_nominal(make_recording(std::move(samples)));
    CHECK(decision.nominal == Nominal::Hz50);
    // the dropped harmonic is the zero one at 100 Hz
    CHECK(decision.harmonics50[1] ==
          doctest::Approx(*std::min_element(decision.harmonics50.begin(),
                                            decision.harmonics50.end())));
}

TEST_CASE("white noise still yields a total decision") {
    Rng rng(7);
    std::vector<double> noise(32000);
    for (double& v : noise) v = rng.gaussian();
    const NominalDecision decision = detect_nominal(make_recording(std::move(noise)));
    CHECK(decision.score50 > 0.0);
    CHECK(decision.score60 > 0.0);
}

TEST_CASE("detection is amplitude-scale invariant") {
    GridProfile profile;
    profile.nominal = Nominal::Hz50;
    profile.drift_sigma_hz = 0.1;
    profile.drift_tau_s = 5.0;
    profile.snr_db_min = profile.snr_db_max = 5.0;
    Recording rec = synth_enf(profile, 24.0, 1000, 31);
    const NominalDecision base = detect_nominal(rec);
    for (double scale : {0.01, 3.7, 120.0}) {
        Recording scaled = rec;
        for (double& s : scaled.samples) s *= scale;
        const NominalDecision d = detect_nominal(scaled);
        CHECK(d.nominal == base.nominal);
        CHECK(d.score50 / d.score60 == doctest::Approx(base.score50 / base.score60).epsilon(1e-9));
    }
}

TEST_CASE("too-short recordings are rejected by detection") {
    CHECK(testutil::throws_code(
        [&] { detect_nominal(make_recording(std::vector<double>(15000, 0.1))); },
        ErrorCode::RecordingTooShort));
}

// --- bandpass -------------------------------------------------------------------

// reference single-pass |H(f)| from scipy.signal.butter(4, band, fs=1000,
// output='sos'), frozen
struct RefPoint {
    double freq;
    double mag;
};

TEST_CASE("bandpass magnitude response matches the reference design") {
    const RefPoint ref60[] = {
        {45.0, 1.091365235282247e-05}, {49.0, 4.549083810776380e-05},
        {50.0, 6.954753153744083e-05}, {51.0, 1.105511949930940e-04},
        {55.0, 1.358653517003731e-03}, {58.5, 1.887978175718299e-01},
        {59.0, 7.071067811865757e-01}, {59.5, 9.982314942303298e-01},
        {60.0, 1.000000000000034e+00}, {60.5, 9.978616034529468e-01},
        {61.0, 7.071067811865372e-01}, {61.5, 1.986640365117796e-01},
        {65.0, 1.845074366330041e-03}, {120.0, 2.104137439101377e-07},
    };
    const BandpassFilter filt60(59.0, 61.0, 1000.0, 4);
    for (const RefPoint& p : ref60)
        CHECK(filt60.magnitude_at(p.freq) == doctest::Approx(p.mag).epsilon(1e-6));

    const RefPoint ref50[] = {
        {45.0, 1.307621224370579e-03}, {49.0, 7.071067811865527e-01},
        {50.0, 9.999999999999459e-01}, {51.0, 7.071067811864654e-01},
        {55.0, 1.899894825902867e-03}, {60.0, 1.390915075079477e-04},
        {120.0, 1.406401580292802e-07},
    };
    const BandpassFilter filt50(49.0, 51.0, 1000.0, 4);
    for (const RefPoint& p : ref50)
        CHECK(filt50.magnitude_at(p.freq) == doctest::Approx(p.mag).epsilon(1e-6));
}

TEST_CASE("in-band tone keeps its RMS through the zero-phase pass") {
    const auto tone = sine_wave(60.0, 1.0, 16000, 1000.0);
    const auto out = bandpass_enf(tone, 1000, Nominal::Hz60);
    CHECK(out.size() == tone.size());
    const double rms_in = testutil::rms(tone, 2000, 14000);
    const double rms_out = testutil::rms(out, 2000, 14000);
    CHECK(rms_out == doctest::Approx(rms_in).epsilon(0.05));
}

TEST_CASE("stopband tone is crushed") {
    const auto tone = sine_wave(45.0, 1.0, 16000, 1000.0);
    const auto out = bandpass_enf(tone, 1000, Nominal::Hz50);
    const double rms_in = testutil::rms(tone, 2000, 14000);
    const double rms_out = testutil::rms(out, 2000, 14000);
    CHECK(rms_out < 0.01 * rms_in);
}

TEST_CASE("zero input filters to zero") {
    const std::vector<double> zeros(4000, 0.0);
    for (double v : bandpass_enf(zeros, 1000, Nominal::Hz60)) CHECK(v == 0.0);
}

TEST_CASE("filtering is linear") {
    Rng rng(13);
    std::vector<double> x(6000), y(6000);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (double& v : y) v = rng.uniform(-1.0, 1.0);
    const double a = 0.7, b = -1.3;

    std::vector<double> combo(6000);
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];

    const auto fx = bandpass_enf(x, 1000, Nominal::Hz60);
    const auto fy = bandpass_enf(y, 1000, Nominal::Hz60);
    const auto fc = bandpass_enf(combo, 1000, Nominal::Hz60);
    for (std::size_t i = 0; i < combo.size(); i += 11)
        CHECK(std::abs(fc[i] - (a * fx[i] + b * fy[i])) < 1e-9);
}

TEST_CASE("the pass is zero-phase") {
    const auto tone = sine_wave(60.0, 1.0, 16000, 1000.0);
    const auto out = bandpass_enf(tone, 1000, Nominal::Hz60);

    // cross-correlation peak over +-8 sample lags must sit at 0
    double best = -1e18;
    int best_lag = -99;
    for (int lag = -8; lag <= 8; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 2000; i < 14000; ++i)
            acc += tone[i] * out[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + lag)];
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    CHECK(best_lag == 0);
}

TEST_CASE("band above Nyquist raises NyquistViolation") {
    const std::vector<double> x(4000, 0.0);
    CHECK(testutil::throws_code([&] { bandpass_enf(x, 100, Nominal::Hz60); },
                                ErrorCode::NyquistViolation));
}

TEST_CASE("spectrogram csv export has a frequency header") {
    const auto tone = sine_wave(50.0, 1.0, 8000, 1000.0);
    const Spectrogram spec = spectrogram(tone, 1000, 4000, 2000, 4000);
    testutil::TempDir dir("speccsv");
    const auto path = dir.path() / "spec.csv";
    spectrogram_to_csv(spec, path);

    std::ifstream in(path);
    std::string header, first_row;
    REQUIRE(std::getline(in, header));
    REQUIRE(std::getline(in, first_row));
    CHECK(header.substr(0, 7) == "0,0.25,");
    std::size_t lines = 1;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines + 1 == 1 + spec.time_bins); // header + one line per column
}
