#pragma once

// Little-endian binary read/write helpers shared by the wav, frame-archive,
// and checkpoint codecs. Internal to core.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "enfgrid/errors.hpp"

namespace enfgrid::binio {

static_assert(std::endian::native == std::endian::little,
              "big-endian hosts need byte swaps here");

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return static_cast<std::size_t>(in.gcount()) == sizeof(T);
}

inline void write_bytes(std::ostream& out, const void* data, std::size_t len) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
}

inline bool read_bytes(std::istream& in, void* data, std::size_t len) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(len));
    return static_cast<std::size_t>(in.gcount()) == len;
}

} // namespace enfgrid::binio
