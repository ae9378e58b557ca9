#include "enfgrid/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "binio.hpp"

namespace enfgrid {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits_per_sample = 0;
};

double decode_sample(const unsigned char* p, std::uint16_t format, std::uint16_t bits) {
    if (format == kFormatFloat) {
        float v;
        std::memcpy(&v, p, 4);
        return static_cast<double>(v);
    }
    switch (bits) {
        case 16: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            return static_cast<double>(v) / 32768.0;
        }
        case 24: {
            std::int32_t v = (p[0]) | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xffffff; // sign extend
            return static_cast<double>(v) / 8388608.0;
        }
        case 32: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v) / 2147483648.0;
        }
        default:
            break;
    }
    raise(ErrorCode::UnsupportedEncoding, "unreachable");
}

} // namespace

Recording decode_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());

    char riff[4], wave[4];
    std::uint32_t riff_size = 0;
    if (!binio::read_bytes(in, riff, 4) || !binio::read_le(in, riff_size) ||
        !binio::read_bytes(in, wave, 4))
        raise(ErrorCode::MalformedWav, "truncated RIFF header in " + path.string());
    if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
        raise(ErrorCode::MalformedWav, "not a RIFF/WAVE file: " + path.string());

    FmtChunk fmt;
    bool have_fmt = false;
    std::vector<unsigned char> payload;
    bool have_data = false;

    while (true) {
        char id[4];
        std::uint32_t chunk_size = 0;
        if (!binio::read_bytes(in, id, 4)) break; // clean end of chunk list
        if (!binio::read_le(in, chunk_size))
            raise(ErrorCode::MalformedWav, "truncated chunk header in " + path.string());

        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16)
                raise(ErrorCode::MalformedWav, "fmt chunk too small in " + path.string());
            std::vector<unsigned char> body(chunk_size);
            if (!binio::read_bytes(in, body.data(), chunk_size))
                raise(ErrorCode::MalformedWav, "truncated fmt chunk in " + path.string());
            std::memcpy(&fmt.format, body.data() + 0, 2);
            std::memcpy(&fmt.channels, body.data() + 2, 2);
            std::memcpy(&fmt.sample_rate, body.data() + 4, 4);
            std::memcpy(&fmt.bits_per_sample, body.data() + 14, 2);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            payload.resize(chunk_size);
            if (chunk_size > 0 && !binio::read_bytes(in, payload.data(), chunk_size))
                raise(ErrorCode::MalformedWav, "truncated data chunk in " + path.string());
            have_data = true;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur); // skip, word aligned
            if (!in)
                raise(ErrorCode::MalformedWav, "truncated chunk body in " + path.string());
            continue;
        }
        if (chunk_size & 1) in.seekg(1, std::ios::cur);
    }

    if (!have_fmt || !have_data)
        raise(ErrorCode::MalformedWav, "missing fmt or data chunk in " + path.string());
    if (fmt.sample_rate == 0 || fmt.channels == 0)
        raise(ErrorCode::MalformedWav, "zero sample rate or channel count in " + path.string());

    const bool supported =
        (fmt.format == kFormatPcm && (fmt.bits_per_sample == 16 ||
                                      fmt.bits_per_sample == 24 ||
                                      fmt.bits_per_sample == 32)) ||
        (fmt.format == kFormatFloat && fmt.bits_per_sample == 32);
    if (!supported)
        raise(ErrorCode::UnsupportedEncoding,
              "format " + std::to_string(fmt.format) + "/" +
                  std::to_string(fmt.bits_per_sample) + " bits in " + path.string());

    const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
    const std::size_t stride = bytes_per_sample * fmt.channels;
    if (payload.empty() || payload.size() < stride)
        raise(ErrorCode::EmptyPayload, "no samples in " + path.string());

    const std::size_t num_frames = payload.size() / stride;
    Recording rec;
    rec.sample_rate = fmt.sample_rate;
    rec.source_id = path.filename().string();
    rec.samples.resize(num_frames);
    for (std::size_t i = 0; i < num_frames; ++i) {
        double acc = 0.0;
        const unsigned char* base = payload.data() + i * stride;
        for (std::uint16_t c = 0; c < fmt.channels; ++c)
            acc += decode_sample(base + c * bytes_per_sample, fmt.format, fmt.bits_per_sample);
        rec.samples[i] = acc / fmt.channels;
    }
    return rec;
}

void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, std::uint32_t sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    binio::write_bytes(out, "RIFF", 4);
    binio::write_le<std::uint32_t>(out, 36 + data_bytes);
    binio::write_bytes(out, "WAVE", 4);

    binio::write_bytes(out, "fmt ", 4);
    binio::write_le<std::uint32_t>(out, 16);
    binio::write_le<std::uint16_t>(out, kFormatPcm);
    binio::write_le<std::uint16_t>(out, 1); // mono
    binio::write_le<std::uint32_t>(out, sample_rate);
    binio::write_le<std::uint32_t>(out, sample_rate * 2); // byte rate
    binio::write_le<std::uint16_t>(out, 2);               // block align
    binio::write_le<std::uint16_t>(out, 16);

    binio::write_bytes(out, "data", 4);
    binio::write_le<std::uint32_t>(out, data_bytes);
    for (double s : samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        const auto v = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
        binio::write_le(out, v);
    }
    if (!out) raise(ErrorCode::IoError, "short write to " + path.string());
}

} // namespace enfgrid
