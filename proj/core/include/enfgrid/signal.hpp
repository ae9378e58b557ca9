#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enfgrid/types.hpp"

namespace enfgrid {

inline constexpr std::uint32_t kDefaultSampleRate = 1000; // working rate, Hz
inline constexpr std::size_t kDefaultFrameLen = 15999;    // network input size
inline constexpr double kDefaultOverlap = 0.5;

struct Recording {
    std::vector<double> samples;
    std::uint32_t sample_rate = kDefaultSampleRate;
    RecType rec_type = RecType::Unknown;
    Grid grid = Grid::N;
    bool grid_known = false;
    std::string source_id;

    double duration_s() const {
        return sample_rate == 0 ? 0.0
                                : static_cast<double>(samples.size()) / sample_rate;
    }
};

// Fixed-length overlapped frames cut from one recording, each frame peak
// normalized to [-1, 1].
struct FrameBatch {
    std::vector<float> frames; // row-major, num_frames x frame_len
    std::size_t frame_len = 0;
    std::size_t num_frames = 0;
    std::size_t hop = 0;
    std::string source_id;

    const float* frame(std::size_t i) const { return frames.data() + i * frame_len; }
    float* frame(std::size_t i) { return frames.data() + i * frame_len; }
};

// Peak normalization: x / max|x|. A zero signal passes through unchanged so
// silent stretches never abort a batch.
void normalize_peak(std::vector<double>& samples);
void normalize_peak(float* samples, std::size_t len);

// hop = round((1 - overlap) * frame_len); for the default 15999/0.5 this is
// the nominal 8000, keeping the 50% overlap exact. Trailing samples that do
// not fill a frame are dropped. Throws RecordingTooShort.
std::size_t frame_hop(std::size_t frame_len, double overlap);
FrameBatch make_frames(const Recording& recording,
                       std::size_t frame_len = kDefaultFrameLen,
                       double overlap = kDefaultOverlap);

// Polyphase rational resampler (windowed-sinc lowpass). Returns the input
// unchanged when rates already match.
std::vector<double> resample_poly(const std::vector<double>& samples,
                                  std::uint32_t rate_in, std::uint32_t rate_out);
Recording resample_recording(const Recording& recording, std::uint32_t rate_out);

// Flat binary frame archive: header {magic "EGN1", frame_len u32,
// num_frames u32}, then little-endian float32, row-major.
void save_frame_archive(const FrameBatch& batch, const std::filesystem::path& path);
FrameBatch load_frame_archive(const std::filesystem::path& path);
void append_frames(FrameBatch& dst, const FrameBatch& src); // frame_len must match

} // namespace enfgrid
