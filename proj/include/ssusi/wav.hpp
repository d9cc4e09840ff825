#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ssusi/signal.hpp"

namespace ssusi {

// Minimal 16-bit PCM mono RIFF reader/writer.

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    os.write(b, 4);
}

inline void put_u16(std::ostream& os, uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}

inline uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace detail

inline void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_wav: cannot open " + path);
    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint32_t data_bytes = n * 2;
    os.write("RIFF", 4);
    detail::put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    detail::put_u32(os, 16);
    detail::put_u16(os, 1);  // PCM
    detail::put_u16(os, 1);  // mono
    detail::put_u32(os, static_cast<uint32_t>(w.sample_rate));
    detail::put_u32(os, static_cast<uint32_t>(w.sample_rate) * 2);
    detail::put_u16(os, 2);
    detail::put_u16(os, 16);
    os.write("data", 4);
    detail::put_u32(os, data_bytes);
    for (double s : w.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const int16_t q = static_cast<int16_t>(std::lround(c * 32767.0));
        detail::put_u16(os, static_cast<uint16_t>(q));
    }
    if (!os) throw std::runtime_error("write_wav: write failed for " + path);
}

inline Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_wav: cannot open " + path);
    char tag[4];
    is.read(tag, 4);
    if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: not a RIFF file");
    detail::get_u32(is);
    is.read(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: not a WAVE file");

    Waveform w;
    bool got_fmt = false;
    while (is.read(tag, 4)) {
        const uint32_t chunk = detail::get_u32(is);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const uint16_t fmt = detail::get_u16(is);
            const uint16_t ch = detail::get_u16(is);
            const uint32_t rate = detail::get_u32(is);
            detail::get_u32(is);
            detail::get_u16(is);
            const uint16_t bits = detail::get_u16(is);
            if (fmt != 1 || ch != 1 || bits != 16)
                throw std::runtime_error("read_wav: expected 16-bit PCM mono");
            w.sample_rate = static_cast<int>(rate);
            is.ignore(chunk > 16 ? chunk - 16 : 0);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw std::runtime_error("read_wav: data before fmt");
            const uint32_t n = chunk / 2;
            w.samples.resize(n);
            for (uint32_t i = 0; i < n; ++i) {
                const int16_t q = static_cast<int16_t>(detail::get_u16(is));
                w.samples[i] = static_cast<double>(q) / 32767.0;
            }
            return w;
        } else {
            is.ignore(chunk + (chunk & 1));
        }
    }
    throw std::runtime_error("read_wav: no data chunk in " + path);
}

// NormalizationStats as a small text file: bin count, then the mean vector,
// then the std vector, one value per line.
inline void save_stats(const std::string& path, const NormalizationStats& st) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_stats: cannot open " + path);
    os.precision(17);
    os << "ssusi-norm-stats 1\n" << st.mean.size() << "\n";
    for (double v : st.mean) os << v << "\n";
    for (double v : st.stdev) os << v << "\n";
}

inline NormalizationStats load_stats(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_stats: cannot open " + path);
    std::string magic;
    int version = 0;
    size_t n = 0;
    is >> magic >> version >> n;
    if (magic != "ssusi-norm-stats" || version != 1)
        throw std::runtime_error("load_stats: bad header in " + path);
    NormalizationStats st;
    st.mean.resize(n);
    st.stdev.resize(n);
    for (auto& v : st.mean) is >> v;
    for (auto& v : st.stdev) is >> v;
    if (!is) throw std::runtime_error("load_stats: truncated file " + path);
    return st;
}

}  // namespace ssusi
