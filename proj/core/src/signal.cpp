#include "enfgrid/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "binio.hpp"

namespace enfgrid {

void normalize_peak(std::vector<double>& samples) {
    double peak = 0.0;
    for (double s : samples) peak = std::max(peak, std::abs(s));
    if (peak <= 0.0) return; // silence passes through
    const double inv = 1.0 / peak;
    for (double& s : samples) s *= inv;
}

void normalize_peak(float* samples, std::size_t len) {
    float peak = 0.0f;
    for (std::size_t i = 0; i < len; ++i) peak = std::max(peak, std::abs(samples[i]));
    if (peak <= 0.0f) return;
    const float inv = 1.0f / peak;
    for (std::size_t i = 0; i < len; ++i) samples[i] *= inv;
}

std::size_t frame_hop(std::size_t frame_len, double overlap) {
    if (overlap < 0.0 || overlap >= 1.0)
        raise(ErrorCode::ConfigInvalid, "overlap must lie in [0, 1)");
    const double hop = std::round((1.0 - overlap) * static_cast<double>(frame_len));
    return static_cast<std::size_t>(std::max(1.0, hop));
}

FrameBatch make_frames(const Recording& recording, std::size_t frame_len, double overlap) {
    if (recording.samples.size() < frame_len)
        raise(ErrorCode::RecordingTooShort,
              recording.source_id + ": " + std::to_string(recording.samples.size()) +
                  " samples < frame length " + std::to_string(frame_len));

    const std::size_t hop = frame_hop(frame_len, overlap);
    const std::size_t num_frames = (recording.samples.size() - frame_len) / hop + 1;

    FrameBatch batch;
    batch.frame_len = frame_len;
    batch.hop = hop;
    batch.num_frames = num_frames;
    batch.source_id = recording.source_id;
    batch.frames.resize(num_frames * frame_len);

    for (std::size_t i = 0; i < num_frames; ++i) {
        const double* src = recording.samples.data() + i * hop;
        float* dst = batch.frame(i);
        for (std::size_t j = 0; j < frame_len; ++j)
            dst[j] = static_cast<float>(src[j]);
        normalize_peak(dst, frame_len);
    }
    return batch;
}

namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = 3.14159265358979323846 * x;
    return std::sin(px) / px;
}

// zeroth-order modified Bessel function, power series
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_sq = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (k * static_cast<double>(k));
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

} // namespace

std::vector<double> resample_poly(const std::vector<double>& samples,
                                  std::uint32_t rate_in, std::uint32_t rate_out) {
    if (rate_in == 0 || rate_out == 0)
        raise(ErrorCode::ConfigInvalid, "sample rates must be positive");
    if (rate_in == rate_out) return samples;
    if (samples.empty()) return {};

    const std::uint32_t g = std::gcd(rate_in, rate_out);
    const std::size_t up = rate_out / g;
    const std::size_t down = rate_in / g;

    // windowed-sinc lowpass at the tighter Nyquist, Kaiser beta 8.6,
    // 10 zero crossings per side at the upsampled rate
    const std::size_t max_rate = std::max(up, down);
    const std::size_t half_len = 10 * max_rate;
    const double cutoff = 1.0 / static_cast<double>(max_rate); // fraction of upsampled Nyquist
    const double beta = 8.6;

    std::vector<double> taps(2 * half_len + 1);
    const double i0_beta = bessel_i0(beta);
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const double n = static_cast<double>(i) - static_cast<double>(half_len);
        const double w_arg = n / static_cast<double>(half_len);
        const double window = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - w_arg * w_arg))) / i0_beta;
        taps[i] = cutoff * sinc(cutoff * n) * window;
    }
    // unity DC gain after upsampling by `up`
    for (double& t : taps) t *= static_cast<double>(up);

    const std::size_t n_out =
        (samples.size() * up + down - 1) / down; // ceil(N * up / down)
    std::vector<double> out(n_out, 0.0);

    // Polyphase evaluation: output m taps the virtual upsampled stream at
    // index m*down; only every `up`-th tap hits a real input sample.
    for (std::size_t m = 0; m < n_out; ++m) {
        const std::int64_t center = static_cast<std::int64_t>(m) * static_cast<std::int64_t>(down);
        double acc = 0.0;
        // input sample k contributes via tap at offset center - k*up + half_len
        const std::int64_t k_min_raw =
            (center - static_cast<std::int64_t>(half_len) + static_cast<std::int64_t>(up) - 1) /
            static_cast<std::int64_t>(up);
        const std::int64_t k_min = std::max<std::int64_t>(0, k_min_raw);
        const std::int64_t k_max = std::min<std::int64_t>(
            static_cast<std::int64_t>(samples.size()) - 1,
            (center + static_cast<std::int64_t>(half_len)) / static_cast<std::int64_t>(up));
        for (std::int64_t k = k_min; k <= k_max; ++k) {
            const std::int64_t tap_idx =
                center - k * static_cast<std::int64_t>(up) + static_cast<std::int64_t>(half_len);
            acc += samples[static_cast<std::size_t>(k)] * taps[static_cast<std::size_t>(tap_idx)];
        }
        out[m] = acc;
    }
    return out;
}

Recording resample_recording(const Recording& recording, std::uint32_t rate_out) {
    if (recording.sample_rate == rate_out) return recording;
    Recording out = recording;
    out.samples = resample_poly(recording.samples, recording.sample_rate, rate_out);
    out.sample_rate = rate_out;
    return out;
}

namespace {
constexpr char kArchiveMagic[4] = {'E', 'G', 'N', '1'};
}

void save_frame_archive(const FrameBatch& batch, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());

    binio::write_bytes(out, kArchiveMagic, 4);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.frame_len));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.num_frames));
    binio::write_bytes(out, batch.frames.data(), batch.frames.size() * sizeof(float));
    if (!out) raise(ErrorCode::IoError, "short write to " + path.string());
}

FrameBatch load_frame_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());

    char magic[4];
    std::uint32_t frame_len = 0, num_frames = 0;
    if (!binio::read_bytes(in, magic, 4) || std::memcmp(magic, kArchiveMagic, 4) != 0)
        raise(ErrorCode::MalformedArchive, "bad magic in " + path.string());
    if (!binio::read_le(in, frame_len) || !binio::read_le(in, num_frames))
        raise(ErrorCode::MalformedArchive, "truncated header in " + path.string());

    FrameBatch batch;
    batch.frame_len = frame_len;
    batch.num_frames = num_frames;
    batch.source_id = path.filename().string();
    batch.frames.resize(static_cast<std::size_t>(frame_len) * num_frames);
    if (!batch.frames.empty() &&
        !binio::read_bytes(in, batch.frames.data(), batch.frames.size() * sizeof(float)))
        raise(ErrorCode::MalformedArchive, "truncated payload in " + path.string());
    return batch;
}

void append_frames(FrameBatch& dst, const FrameBatch& src) {
    if (dst.num_frames == 0 && dst.frame_len == 0) {
        dst.frame_len = src.frame_len;
        dst.hop = src.hop;
    }
    if (dst.frame_len != src.frame_len)
        raise(ErrorCode::ShapeMismatch, "frame length mismatch when appending batches");
    dst.frames.insert(dst.frames.end(), src.frames.begin(), src.frames.end());
    dst.num_frames += src.num_frames;
}

} // namespace enfgrid
