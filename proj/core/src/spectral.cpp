#include "enfgrid/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <mutex>

#include <fftw3.h>

namespace enfgrid {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW planner calls are not thread-safe; executions are.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

struct RealFft {
    explicit RealFft(std::size_t nfft) : nfft_(nfft) {
        in_ = fftw_alloc_real(nfft);
        out_ = fftw_alloc_complex(nfft / 2 + 1);
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t nfft_;
    double* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

} // namespace

Spectrogram spectrogram(const std::vector<double>& samples, std::uint32_t sample_rate,
                        std::size_t window_len, std::size_t hop, std::size_t nfft) {
    if (window_len == 0 || hop == 0 || nfft == 0 || window_len > nfft)
        raise(ErrorCode::InvalidWindow,
              "window " + std::to_string(window_len) + ", hop " + std::to_string(hop) +
                  ", nfft " + std::to_string(nfft));
    if (samples.size() < window_len)
        raise(ErrorCode::InvalidWindow, "signal shorter than one window");

    const std::size_t time_bins = (samples.size() - window_len) / hop + 1;
    const std::size_t freq_bins = nfft / 2 + 1;

    // periodic Hann window
    std::vector<double> window(window_len);
    for (std::size_t i = 0; i < window_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                         static_cast<double>(window_len));

    Spectrogram spec;
    spec.time_bins = time_bins;
    spec.freq_bins = freq_bins;
    spec.sample_rate = sample_rate;
    spec.freq_resolution = static_cast<double>(sample_rate) / static_cast<double>(nfft);
    spec.time_step = static_cast<double>(hop) / static_cast<double>(sample_rate);
    spec.magnitudes.resize(time_bins * freq_bins);

    RealFft fft(nfft);
    for (std::size_t t = 0; t < time_bins; ++t) {
        const double* src = samples.data() + t * hop;
        for (std::size_t i = 0; i < window_len; ++i) fft.in_[i] = src[i] * window[i];
        std::fill(fft.in_ + window_len, fft.in_ + nfft, 0.0);
        fftw_execute(fft.plan_);
        double* dst = spec.magnitudes.data() + t * freq_bins;
        for (std::size_t f = 0; f < freq_bins; ++f)
            dst[f] = std::hypot(fft.out_[f][0], fft.out_[f][1]);
    }
    return spec;
}

double harmonic_band_mean(const Spectrogram& spec, double center_hz, double halfwidth_hz) {
    if (center_hz + halfwidth_hz >= spec.sample_rate / 2.0)
        raise(ErrorCode::BandOutOfRange,
              "band around " + std::to_string(center_hz) + " Hz exceeds Nyquist");

    const double lo = center_hz - halfwidth_hz;
    const double hi = center_hz + halfwidth_hz;
    const std::size_t first =
        static_cast<std::size_t>(std::max(0.0, std::ceil(lo / spec.freq_resolution)));
    const std::size_t last =
        static_cast<std::size_t>(std::floor(hi / spec.freq_resolution));
    if (first > last || first >= spec.freq_bins)
        raise(ErrorCode::BandOutOfRange, "no bin centers inside the band");
    const std::size_t last_clamped = std::min(last, spec.freq_bins - 1);

    double acc = 0.0;
    for (std::size_t t = 0; t < spec.time_bins; ++t)
        for (std::size_t f = first; f <= last_clamped; ++f) acc += spec.at(t, f);
    return acc / (static_cast<double>(spec.time_bins) *
                  static_cast<double>(last_clamped - first + 1));
}

NominalDecision detect_nominal(const Recording& recording, double halfwidth_hz) {
    if (recording.sample_rate == 0)
        raise(ErrorCode::ConfigInvalid, "recording has zero sample rate");
    if (recording.duration_s() < 16.0)
        raise(ErrorCode::RecordingTooShort,
              recording.source_id + " spans less than 16 s");

    const StftParams params = StftParams::for_rate(recording.sample_rate);
    const Spectrogram spec = spectrogram(recording.samples, recording.sample_rate,
                                         params.window_len, params.hop, params.nfft);

    NominalDecision decision;
    auto score = [&](double f0, std::array<double, 3>& harmonics) {
        for (int h = 0; h < 3; ++h)
            harmonics[h] = harmonic_band_mean(spec, f0 * (h + 1), halfwidth_hz);
        // drop the weakest harmonic, average the remaining two
        const auto weakest = std::min_element(harmonics.begin(), harmonics.end());
        double sum = 0.0;
        for (const double& v : harmonics)
            if (&v != &*weakest) sum += v;
        return sum / 2.0;
    };

    decision.score50 = score(50.0, decision.harmonics50);
    decision.score60 = score(60.0, decision.harmonics60);
    decision.tie = decision.score50 == decision.score60;
    if (decision.tie)
        std::fprintf(stderr, "warning: nominal detection tie on %s, defaulting to 50 Hz\n",
                     recording.source_id.c_str());
    decision.nominal = decision.score60 > decision.score50 ? Nominal::Hz60 : Nominal::Hz50;
    return decision;
}

// --- Butterworth bandpass ---------------------------------------------------

BandpassFilter::BandpassFilter(double low_hz, double high_hz, double sample_rate, int order)
    : sample_rate_(sample_rate) {
    if (!(0.0 < low_hz && low_hz < high_hz))
        raise(ErrorCode::ConfigInvalid, "bad band edges");
    if (high_hz >= sample_rate / 2.0)
        raise(ErrorCode::NyquistViolation,
              std::to_string(high_hz) + " Hz >= Nyquist at fs " + std::to_string(sample_rate));
    if (order < 1 || order > 12)
        raise(ErrorCode::ConfigInvalid, "unsupported filter order");

    using Complex = std::complex<double>;
    const double k = 2.0 * sample_rate; // bilinear constant
    const double w1 = k * std::tan(kPi * low_hz / sample_rate);
    const double w2 = k * std::tan(kPi * high_hz / sample_rate);
    const double bw = w2 - w1;
    const double w0 = std::sqrt(w1 * w2);

    // analog lowpass prototype poles on the unit circle's left half
    std::vector<Complex> bp_poles;
    for (int i = 0; i < order; ++i) {
        const double theta = kPi * (2.0 * i + order + 1.0) / (2.0 * order);
        const Complex proto(std::cos(theta), std::sin(theta));
        // lowpass -> bandpass: s^2 - p*bw*s + w0^2 = 0
        const Complex pb = proto * (bw / 2.0);
        const Complex disc = std::sqrt(pb * pb - w0 * w0);
        bp_poles.push_back(pb + disc);
        bp_poles.push_back(pb - disc);
    }

    // bilinear transform; analog zeros are `order` at s=0 (-> z=1) and
    // `order` at infinity (-> z=-1)
    std::vector<Complex> digital;
    digital.reserve(bp_poles.size());
    for (const Complex& p : bp_poles) digital.push_back((k + p) / (k - p));

    // keep one of each conjugate pair, sorted for a deterministic cascade
    std::vector<Complex> upper;
    for (const Complex& p : digital)
        if (p.imag() > 0.0) upper.push_back(p);
    std::sort(upper.begin(), upper.end(), [](const Complex& a, const Complex& b) {
        return std::arg(a) != std::arg(b) ? std::arg(a) < std::arg(b)
                                          : std::abs(a) < std::abs(b);
    });
    if (upper.size() != static_cast<std::size_t>(order))
        raise(ErrorCode::ConfigInvalid, "pole pairing failed (band too narrow?)");

    const double w_center = 2.0 * std::atan(w0 / k); // digital center, rad/sample
    sections_.reserve(upper.size());
    for (const Complex& p : upper) {
        Biquad s{};
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0; // zeros at +1 and -1
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        // normalize this section to unit gain at the band center
        const Complex z = std::polar(1.0, w_center);
        const Complex num = (z - 1.0) * (z + 1.0);
        const Complex den = (z - p) * (z - std::conj(p));
        const double gain = std::abs(num / den);
        s.b0 /= gain;
        s.b2 /= gain;
        sections_.push_back(s);
    }
}

std::vector<double> BandpassFilter::filter(const std::vector<double>& input) const {
    std::vector<double> y = input;
    for (const Biquad& s : sections_) {
        double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
        for (double& v : y) {
            const double x0 = v;
            const double y0 = s.b0 * x0 + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            v = y0;
        }
    }
    return y;
}

std::vector<double> BandpassFilter::filtfilt(const std::vector<double>& input) const {
    if (input.empty()) return {};

    // odd-symmetric edge extension long enough for the 2 Hz band's ring-down
    const std::size_t pad =
        std::min(input.size() - 1, static_cast<std::size_t>(2.0 * sample_rate_));
    std::vector<double> ext;
    ext.reserve(input.size() + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * input.front() - input[i]);
    ext.insert(ext.end(), input.begin(), input.end());
    for (std::size_t i = 1; i <= pad; ++i)
        ext.push_back(2.0 * input.back() - input[input.size() - 1 - i]);

    std::vector<double> fwd = filter(ext);
    std::reverse(fwd.begin(), fwd.end());
    std::vector<double> bwd = filter(fwd);
    std::reverse(bwd.begin(), bwd.end());

    return std::vector<double>(bwd.begin() + static_cast<std::ptrdiff_t>(pad),
                               bwd.begin() + static_cast<std::ptrdiff_t>(pad + input.size()));
}

double BandpassFilter::magnitude_at(double freq_hz) const {
    using Complex = std::complex<double>;
    const Complex z = std::polar(1.0, 2.0 * kPi * freq_hz / sample_rate_);
    const Complex zi = 1.0 / z;
    Complex h(1.0, 0.0);
    for (const Biquad& s : sections_) {
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    }
    return std::abs(h);
}

std::vector<double> bandpass_enf(const std::vector<double>& samples,
                                 std::uint32_t sample_rate, Nominal nominal) {
    const double f0 = nominal_hz(nominal);
    if (f0 + 1.0 >= sample_rate / 2.0)
        raise(ErrorCode::NyquistViolation, "ENF band exceeds Nyquist");
    const BandpassFilter filter(f0 - 1.0, f0 + 1.0, sample_rate, 4);
    return filter.filtfilt(samples);
}

void spectrogram_to_csv(const Spectrogram& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    char buf[32];
    for (std::size_t f = 0; f < spec.freq_bins; ++f) {
        std::snprintf(buf, sizeof(buf), "%.6g", static_cast<double>(f) * spec.freq_resolution);
        out << (f ? "," : "") << buf;
    }
    out << '\n';
    for (std::size_t t = 0; t < spec.time_bins; ++t) {
        for (std::size_t f = 0; f < spec.freq_bins; ++f) {
            std::snprintf(buf, sizeof(buf), "%.9g", spec.at(t, f));
            out << (f ? "," : "") << buf;
        }
        out << '\n';
    }
}

} // namespace enfgrid
