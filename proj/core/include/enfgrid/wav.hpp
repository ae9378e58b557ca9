#pragma once

#include <filesystem>

#include "enfgrid/signal.hpp"

namespace enfgrid {

// RIFF/WAVE reader for PCM 16/24/32-bit int and 32-bit float. Multichannel
// input is collapsed to mono by channel averaging; integer samples are scaled
// to [-1, 1] by the type's max magnitude (e.g. int16 -32768 -> -1.0).
// Throws MalformedWav / UnsupportedEncoding / EmptyPayload.
Recording decode_wav(const std::filesystem::path& path);

// 16-bit PCM mono writer (the corpus format). Samples are clamped to [-1, 1]
// and scaled by 32767.
void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, std::uint32_t sample_rate);

} // namespace enfgrid
