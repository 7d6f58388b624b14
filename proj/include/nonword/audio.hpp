#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nonword::audio {

inline constexpr int kCanonicalRate = 16000;

/// Mono PCM clip, samples in [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 0;
    std::string source_id;

    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

/// Decode a RIFF/WAVE byte stream (PCM16 or IEEE float32, any channel count).
/// Multi-channel input is averaged to mono; integer samples are scaled by
/// 2^(bits-1); float samples are clamped to [-1, 1].
AudioClip decode_wav(const std::vector<uint8_t>& bytes, const std::string& source_id = "");

/// Encode a clip as mono IEEE float32 WAV.
std::vector<uint8_t> encode_wav(const AudioClip& clip);

AudioClip read_wav_file(const std::string& path, const std::string& source_id = "");
void write_wav_file(const std::string& path, const AudioClip& clip);

/// Linear-interpolation resampler. Output length = round(len * target/source).
/// target == source returns the clip unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

} // namespace nonword::audio
