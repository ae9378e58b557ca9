#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "enfgrid/evaluate.hpp"
#include "enfgrid/manifest.hpp"
#include "enfgrid/spectral.hpp"
#include "enfgrid/synth.hpp"
#include "enfgrid/wav.hpp"
#include "test_util.hpp"

using namespace enfgrid;
using testutil::TempDir;

namespace {

std::vector<unsigned char> file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

// upward zero crossings per second over a window
double zero_crossing_freq(const std::vector<double>& x, std::size_t begin, std::size_t end,
                          double sample_rate) {
    std::size_t crossings = 0;
    for (std::size_t i = begin + 1; i < end; ++i)
        if (x[i - 1] < 0.0 && x[i] >= 0.0) ++crossings;
    return static_cast<double>(crossings) * sample_rate / static_cast<double>(end - begin);
}

GridProfile clean_profile(Nominal nominal, double sigma, double tau) {
    GridProfile p;
    p.nominal = nominal;
    p.drift_sigma_hz = sigma;
    p.drift_tau_s = tau;
    p.harmonic_amps = {1.0, 0.0, 0.0};
    p.snr_db_min = p.snr_db_max = 300.0; // effectively noise-free
    return p;
}

} // namespace

TEST_CASE("a driftless noise-free profile is a pure harmonic stack") {
    GridProfile p = clean_profile(Nominal::Hz60, 0.0, 10.0);
    p.harmonic_amps = {1.0, 0.3, 0.1};
    const Recording rec = synth_enf(p, 32.0, 1000, 5);
    CHECK(detect_nominal(rec).nominal == Nominal::Hz60);

    const Spectrogram spec = spectrogram(rec.samples, 1000, 4000, 2000, 8000);
    CHECK(harmonic_band_mean(spec, 60.0, 1.0) > 50.0 * harmonic_band_mean(spec, 50.0, 1.0));
}

TEST_CASE("the same seed reproduces the recording bit for bit") {
    const GridProfile p = default_grid_profile(Grid::C, RecType::Audio);
    const Recording a = synth_enf(p, 20.0, 1000, 12345);
    const Recording b = synth_enf(p, 20.0, 1000, 12345);
    CHECK(a.samples == b.samples);
    const Recording c = synth_enf(p, 20.0, 1000, 12346);
    CHECK(a.samples != c.samples);
}

TEST_CASE("invalid profiles are rejected") {
    GridProfile p = clean_profile(Nominal::Hz50, 1.2, 10.0);
    CHECK(testutil::throws_code([&] { synth_enf(p, 32.0, 1000, 1); },
                                ErrorCode::InvalidProfile));
    p = clean_profile(Nominal::Hz50, 0.1, -1.0);
    CHECK(testutil::throws_code([&] { synth_enf(p, 32.0, 1000, 1); },
                                ErrorCode::InvalidProfile));
    p = clean_profile(Nominal::Hz50, 0.1, 10.0);
    CHECK(testutil::throws_code([&] { synth_enf(p, 12.0, 1000, 1); },
                                ErrorCode::InvalidProfile));
}

TEST_CASE("instantaneous frequency stays inside the OU band") {
    // fundamental-only signal; zero-crossing estimates over 16 s windows must
    // stay within f0 +- 4 sigma for at least 99% of windows
    const double sigma = 0.2, f0 = 50.0;
    std::size_t windows = 0, inside = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const GridProfile p = clean_profile(Nominal::Hz50, sigma, 20.0);
        const Recording rec = synth_enf(p, 48.0, 1000, seed);
        for (std::size_t begin = 0; begin + 16000 <= rec.samples.size(); begin += 8000) {
            const double f = zero_crossing_freq(rec.samples, begin, begin + 16000, 1000.0);
            ++windows;
            if (std::abs(f - f0) <= 4.0 * sigma) ++inside;
        }
    }
    CHECK(windows >= 500);
    CHECK(static_cast<double>(inside) / static_cast<double>(windows) >= 0.99);
}

TEST_CASE("distinct drift profiles make separable frames") {
    // per-frame deviation of the spectral centroid from the nominal, Welch t
    auto centroid_devs = [](double sigma, double tau, std::uint64_t seed) {
        GridProfile p = clean_profile(Nominal::Hz60, sigma, tau);
        p.snr_db_min = p.snr_db_max = 20.0;
        std::vector<double> devs;
        for (std::uint64_t r = 0; r < 5; ++r) {
            Recording rec = synth_enf(p, 48.0, 1000, derive_seed(seed, "sep", r));
            rec.samples = bandpass_enf(rec.samples, 1000, Nominal::Hz60);
            const FrameBatch frames = make_frames(rec);
            for (std::size_t i = 0; i < frames.num_frames; ++i) {
                std::vector<double> frame(frames.frame(i),
                                          frames.frame(i) + frames.frame_len);
                const Spectrogram spec = spectrogram(frame, 1000, 4000, 2000, 8000);
                double num = 0.0, den = 0.0;
                const std::size_t lo = static_cast<std::size_t>(58.0 / spec.freq_resolution);
                const std::size_t hi = static_cast<std::size_t>(62.0 / spec.freq_resolution);
                for (std::size_t t = 0; t < spec.time_bins; ++t)
                    for (std::size_t f = lo; f <= hi; ++f) {
                        num += spec.at(t, f) * static_cast<double>(f) * spec.freq_resolution;
                        den += spec.at(t, f);
                    }
                devs.push_back(std::abs(num / den - 60.0));
            }
        }
        return devs;
    };

    const std::vector<double> tight = centroid_devs(0.02, 3.0, 41);
    const std::vector<double> wide = centroid_devs(0.30, 40.0, 42);

    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto var_of = [&](const std::vector<double>& v, double m) {
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / static_cast<double>(v.size() - 1);
    };
    const double m1 = mean_of(tight), m2 = mean_of(wide);
    const double se = std::sqrt(var_of(tight, m1) / tight.size() +
                                var_of(wide, m2) / wide.size());
    CHECK(std::abs(m2 - m1) > 3.0 * se);
}

// --- corpus ------------------------------------------------------------------------

TEST_CASE("a 3x20 corpus writes 60 wavs and 60 manifest rows") {
    TempDir dir("corpus");
    CorpusSpec spec;
    spec.grids = toy_grid_order(3);
    spec.train_per_grid = 16;
    spec.test_per_grid = 4;
    spec.duration_s = 16.0;
    spec.seed = 7;

    const CorpusManifest manifest = make_corpus(spec, dir.path());
    CHECK(manifest.entries.size() == 60);

    std::size_t wavs = 0;
    for (const auto& walk : std::filesystem::recursive_directory_iterator(dir.path()))
        if (walk.is_regular_file() && walk.path().extension() == ".wav") ++wavs;
    CHECK(wavs == 60);
    CHECK(std::filesystem::exists(dir.path() / "manifest.csv"));
}

TEST_CASE("an empty corpus request produces an empty manifest") {
    TempDir dir("corpus");
    CorpusSpec spec;
    spec.grids = toy_grid_order(2);
    spec.train_per_grid = spec.test_per_grid = spec.practice_per_grid = 0;
    const CorpusManifest manifest = make_corpus(spec, dir.path());
    CHECK(manifest.entries.empty());
}

TEST_CASE("regeneration with the same seed is byte-identical") {
    CorpusSpec spec;
    spec.grids = toy_grid_order(2);
    spec.train_per_grid = 2;
    spec.test_per_grid = 1;
    spec.noise_test = 1;
    spec.duration_s = 16.0;
    spec.seed = 99;

    TempDir dir_a("corpus_a"), dir_b("corpus_b");
    const CorpusManifest a = make_corpus(spec, dir_a.path());
    const CorpusManifest b = make_corpus(spec, dir_b.path());
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].path == b.entries[i].path);
        CHECK(file_bytes(dir_a.path() / a.entries[i].path) ==
              file_bytes(dir_b.path() / b.entries[i].path));
    }
}

TEST_CASE("load_layout round-trips a generated corpus exactly") {
    TempDir dir("corpus");
    CorpusSpec spec;
    spec.grids = toy_grid_order(3);
    spec.train_per_grid = 2;
    spec.practice_per_grid = 1;
    spec.test_per_grid = 1;
    spec.noise_test = 2;
    spec.duration_s = 16.0;
    spec.seed = 3;

    const CorpusManifest made = make_corpus(spec, dir.path());
    const CorpusManifest scanned = load_layout(dir.path());
    REQUIRE(scanned.entries.size() == made.entries.size());
    for (std::size_t i = 0; i < made.entries.size(); ++i) {
        CHECK(scanned.entries[i].path == made.entries[i].path);
        CHECK(scanned.entries[i].grid == made.entries[i].grid);
        CHECK(scanned.entries[i].rec_type == made.entries[i].rec_type);
        CHECK(scanned.entries[i].nominal == made.entries[i].nominal);
        CHECK(scanned.entries[i].duration_s == doctest::Approx(made.entries[i].duration_s));
        CHECK(scanned.entries[i].seed == made.entries[i].seed);
    }
}

TEST_CASE("layout rules fill grid, type and nominal from the path") {
    TempDir dir("layout");
    const auto train_dir = dir.path() / "train" / "audio" / "A";
    const auto test_dir = dir.path() / "test" / "power" / "N";
    std::filesystem::create_directories(train_dir);
    std::filesystem::create_directories(test_dir);
    write_wav_pcm16(train_dir / "x.wav", std::vector<double>(100, 0.1), 1000);
    write_wav_pcm16(test_dir / "y.wav", std::vector<double>(100, 0.1), 1000);

    const CorpusManifest manifest = load_layout(dir.path());
    REQUIRE(manifest.entries.size() == 2);
    const ManifestEntry* train = manifest.find("train/audio/A/x.wav");
    REQUIRE(train != nullptr);
    CHECK(train->grid == Grid::A);
    CHECK(train->rec_type == RecType::Audio);
    CHECK(train->nominal == Nominal::Hz60);

    const ManifestEntry* test = manifest.find("test/power/N/y.wav");
    REQUIRE(test != nullptr);
    CHECK(test->grid == Grid::N);
    CHECK(test->rec_type == RecType::Power);
    CHECK_FALSE(test->nominal.has_value());
}

TEST_CASE("a wav outside the schema is a layout error naming the file") {
    TempDir dir("layout");
    std::filesystem::create_directories(dir.path() / "train" / "audio");
    write_wav_pcm16(dir.path() / "train" / "audio" / "stray.wav",
                    std::vector<double>(10, 0.0), 1000);
    try {
        load_layout(dir.path());
        FAIL("expected LayoutError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LayoutError);
        CHECK(std::string(e.what()).find("stray.wav") != std::string::npos);
    }
}

// --- evaluation ----------------------------------------------------------------------

namespace {

CorpusManifest fake_manifest() {
    CorpusManifest manifest;
    auto add = [&](const std::string& path, Grid grid, RecType type) {
        ManifestEntry e;
        e.path = path;
        e.grid = grid;
        e.rec_type = type;
        manifest.entries.push_back(e);
    };
    add("test/audio/A/a0.wav", Grid::A, RecType::Audio);
    add("test/audio/C/c0.wav", Grid::C, RecType::Audio);
    add("test/power/I/i0.wav", Grid::I, RecType::Power);
    add("test/power/N/n0.wav", Grid::N, RecType::Power);
    return manifest;
}

RecordingVerdict fake_verdict(const std::string& source, RecType type, Grid final) {
    RecordingVerdict v;
    v.source_id = source;
    v.rec_type = type;
    v.nominal = Nominal::Hz60;
    v.final = final;
    return v;
}

} // namespace

TEST_CASE("all-correct verdicts produce a diagonal matrix") {
    const CorpusManifest manifest = fake_manifest();
    const std::vector<RecordingVerdict> verdicts = {
        fake_verdict("test/audio/A/a0.wav", RecType::Audio, Grid::A),
        fake_verdict("test/audio/C/c0.wav", RecType::Audio, Grid::C),
        fake_verdict("test/power/I/i0.wav", RecType::Power, Grid::I),
        fake_verdict("test/power/N/n0.wav", RecType::Power, Grid::N),
    };
    const AccuracyReport report = evaluate(verdicts, manifest);
    CHECK(report.overall_all == doctest::Approx(1.0));
    CHECK(report.overall_audio == doctest::Approx(1.0));
    CHECK(report.overall_power == doctest::Approx(1.0));
    CHECK(report.matrix.at(Grid::A, Grid::A) == 1);
    CHECK(report.matrix.at(Grid::N, Grid::N) == 1);
    std::size_t off_diagonal = 0;
    for (std::size_t t = 0; t < kNumVerdicts; ++t)
        for (std::size_t p = 0; p < kNumVerdicts; ++p)
            if (t != p) off_diagonal += report.matrix.counts[t][p];
    CHECK(off_diagonal == 0);
}

TEST_CASE("an all-N prediction on N truth fills only the N cell") {
    CorpusManifest manifest;
    ManifestEntry e;
    e.path = "test/audio/N/n0.wav";
    e.grid = Grid::N;
    e.rec_type = RecType::Audio;
    manifest.entries.push_back(e);

    const AccuracyReport report =
        evaluate({fake_verdict("test/audio/N/n0.wav", RecType::Audio, Grid::N)}, manifest);
    CHECK(report.matrix.at(Grid::N, Grid::N) == 1);
    CHECK(report.overall_all == doctest::Approx(1.0));
}

TEST_CASE("verdicts missing from the manifest are an error") {
    const CorpusManifest manifest = fake_manifest();
    CHECK(testutil::throws_code(
        [&] { evaluate({fake_verdict("test/audio/A/ghost.wav", RecType::Audio, Grid::A)},
                       manifest); },
        ErrorCode::UnknownSource));
}

TEST_CASE("the accuracy table separates audio and power rows") {
    const CorpusManifest manifest = fake_manifest();
    const std::vector<RecordingVerdict> verdicts = {
        fake_verdict("test/audio/A/a0.wav", RecType::Audio, Grid::A),
        fake_verdict("test/audio/C/c0.wav", RecType::Audio, Grid::N), // wrong
        fake_verdict("test/power/I/i0.wav", RecType::Power, Grid::I),
        fake_verdict("test/power/N/n0.wav", RecType::Power, Grid::N),
    };
    const AccuracyReport report = evaluate(verdicts, manifest);
    CHECK(report.overall_audio == doctest::Approx(0.5));
    CHECK(report.overall_power == doctest::Approx(1.0));
    CHECK(report.overall_all == doctest::Approx(0.75));

    const std::string table = format_accuracy_table(report);
    CHECK(table.find("type,A,B,C,D,E,F,G,H,I,N,overall") == 0);
    CHECK(table.find("audio,") != std::string::npos);
    CHECK(table.find("power,") != std::string::npos);
    CHECK(table.find("all,") != std::string::npos);
}
