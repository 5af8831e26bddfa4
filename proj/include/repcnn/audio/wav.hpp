#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace repcnn {

/// Keyword location in 10 ms feature frames, [start, end).
struct KeywordSpan {
    int start_frame = 0;
    int end_frame = 0;
};

struct Utterance {
    std::vector<float> samples;  // PCM in [-1, 1]
    int sample_rate = 16000;
    std::optional<KeywordSpan> keyword_span;
    std::string id;
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

/// RIFF/WAVE reader restricted to PCM 16-bit mono 16 kHz. Samples are scaled
/// by 1/32768.
inline Utterance read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) ||
        std::memcmp(bytes.data() + 8, "WAVE", 4))
        throw std::runtime_error("read_wav: " + path + " is not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t chunk_len = detail::read_u32(bytes.data() + pos + 4);
        const unsigned char* body = bytes.data() + pos + 8;
        if (pos + 8 + chunk_len > bytes.size())
            throw std::runtime_error("read_wav: truncated chunk in " + path);
        if (!std::memcmp(bytes.data() + pos, "fmt ", 4)) {
            if (chunk_len < 16) throw std::runtime_error("read_wav: short fmt chunk in " + path);
            format = detail::read_u16(body);
            channels = detail::read_u16(body + 2);
            rate = detail::read_u32(body + 4);
            bits = detail::read_u16(body + 14);
        } else if (!std::memcmp(bytes.data() + pos, "data", 4)) {
            data = body;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }

    if (!data) throw std::runtime_error("read_wav: no data chunk in " + path);
    if (format != 1)
        throw std::runtime_error("read_wav: " + path + " is not PCM (format tag " +
                                 std::to_string(format) + ")");
    if (channels != 1)
        throw std::runtime_error("read_wav: " + path + " has " + std::to_string(channels) +
                                 " channels, expected mono");
    if (bits != 16)
        throw std::runtime_error("read_wav: " + path + " has " + std::to_string(bits) +
                                 "-bit samples, expected 16");
    if (rate != 16000)
        throw std::runtime_error("read_wav: " + path + " has sample rate " +
                                 std::to_string(rate) + ", expected 16000");

    Utterance u;
    u.sample_rate = 16000;
    u.id = path;
    u.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < u.samples.size(); ++i) {
        const std::int16_t v =
            static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
        u.samples[i] = static_cast<float>(v) / 32768.0f;
    }
    return u;
}

/// 16-bit PCM mono writer; quantizes with round(x * 32768) clamped to the
/// int16 range, so write-then-read round-trips int16-derived samples exactly.
inline void write_wav(const std::string& path, const std::vector<float>& samples,
                      int sample_rate = 16000) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_wav: cannot open " + path);

    const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
    auto put_u32 = [&](std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                    static_cast<unsigned char>((v >> 8) & 0xff),
                                    static_cast<unsigned char>((v >> 16) & 0xff),
                                    static_cast<unsigned char>((v >> 24) & 0xff)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    auto put_u16 = [&](std::uint16_t v) {
        const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                    static_cast<unsigned char>((v >> 8) & 0xff)};
        f.write(reinterpret_cast<const char*>(b), 2);
    };

    f.write("RIFF", 4);
    put_u32(36 + data_len);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(16);
    put_u16(1);  // PCM
    put_u16(1);  // mono
    put_u32(static_cast<std::uint32_t>(sample_rate));
    put_u32(static_cast<std::uint32_t>(sample_rate * 2));
    put_u16(2);
    put_u16(16);
    f.write("data", 4);
    put_u32(data_len);
    for (float s : samples) {
        long v = std::lround(static_cast<double>(s) * 32768.0);
        if (v > 32767) v = 32767;
        if (v < -32768) v = -32768;
        const std::int16_t q = static_cast<std::int16_t>(v);
        const unsigned char b[2] = {static_cast<unsigned char>(q & 0xff),
                                    static_cast<unsigned char>((q >> 8) & 0xff)};
        f.write(reinterpret_cast<const char*>(b), 2);
    }
    if (!f) throw std::runtime_error("write_wav: write failed for " + path);
}

}  // namespace repcnn
