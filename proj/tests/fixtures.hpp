#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nonword/audio.hpp"
#include "nonword/features.hpp"

namespace fixtures {

inline nonword::audio::AudioClip sine(double freq, double seconds, int rate = 16000,
                                      float amp = 1.0f, const std::string& id = "sine") {
    nonword::audio::AudioClip clip;
    clip.sample_rate = rate;
    clip.source_id = id;
    const size_t n = static_cast<size_t>(seconds * rate);
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        clip.samples[i] = amp * static_cast<float>(
                                    std::sin(2.0 * std::numbers::pi * freq * i / rate));
    return clip;
}

inline nonword::audio::AudioClip noise(double seconds, int rate, uint64_t seed,
                                       float amp = 1.0f) {
    nonword::audio::AudioClip clip;
    clip.sample_rate = rate;
    clip.source_id = "noise";
    std::mt19937_64 rng(seed);
    const size_t n = static_cast<size_t>(seconds * rate);
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        clip.samples[i] = amp * static_cast<float>(2.0 * u - 1.0);
    }
    return clip;
}

inline nonword::audio::AudioClip concat(const std::vector<nonword::audio::AudioClip>& parts) {
    nonword::audio::AudioClip out;
    out.sample_rate = parts.front().sample_rate;
    out.source_id = parts.front().source_id;
    for (const auto& p : parts)
        out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
    return out;
}

inline nonword::audio::AudioClip silence(double seconds, int rate = 16000) {
    nonword::audio::AudioClip clip;
    clip.sample_rate = rate;
    clip.source_id = "silence";
    clip.samples.assign(static_cast<size_t>(seconds * rate), 0.0f);
    return clip;
}

// Hand-rolled WAV byte stream builders for decode tests.
namespace wav {

inline void u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v & 0xff));
    b.push_back(static_cast<uint8_t>(v >> 8));
}

inline void u32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i) & 0xff));
}

inline void tag(std::vector<uint8_t>& b, const char* t) { b.insert(b.end(), t, t + 4); }

/// Interleaved PCM16 WAV; frames[i] holds one sample per channel.
inline std::vector<uint8_t> pcm16(const std::vector<std::vector<int16_t>>& frames,
                                  uint32_t rate) {
    const uint16_t channels = frames.empty() ? 1 : static_cast<uint16_t>(frames[0].size());
    const uint32_t data_len = static_cast<uint32_t>(frames.size() * channels * 2);
    std::vector<uint8_t> b;
    tag(b, "RIFF");
    u32(b, 36 + data_len);
    tag(b, "WAVE");
    tag(b, "fmt ");
    u32(b, 16);
    u16(b, 1);
    u16(b, channels);
    u32(b, rate);
    u32(b, rate * channels * 2);
    u16(b, channels * 2);
    u16(b, 16);
    tag(b, "data");
    u32(b, data_len);
    for (const auto& f : frames)
        for (int16_t s : f) u16(b, static_cast<uint16_t>(s));
    return b;
}

inline std::vector<uint8_t> float32(const std::vector<std::vector<float>>& frames,
                                    uint32_t rate) {
    const uint16_t channels = frames.empty() ? 1 : static_cast<uint16_t>(frames[0].size());
    const uint32_t data_len = static_cast<uint32_t>(frames.size() * channels * 4);
    std::vector<uint8_t> b;
    tag(b, "RIFF");
    u32(b, 36 + data_len);
    tag(b, "WAVE");
    tag(b, "fmt ");
    u32(b, 16);
    u16(b, 3);
    u16(b, channels);
    u32(b, rate);
    u32(b, rate * channels * 4);
    u16(b, channels * 4);
    u16(b, 32);
    tag(b, "data");
    u32(b, data_len);
    for (const auto& f : frames)
        for (float s : f) {
            uint32_t v;
            std::memcpy(&v, &s, 4);
            u32(b, v);
        }
    return b;
}

} // namespace wav

} // namespace fixtures
