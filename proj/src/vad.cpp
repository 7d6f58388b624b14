#include "nonword/vad.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nonword/error.hpp"

namespace nonword::vad {

audio::AudioClip trim(const audio::AudioClip& clip, const VadConfig& cfg) {
    const size_t frame_len = static_cast<size_t>(cfg.frame_ms) * clip.sample_rate / 1000;
    const size_t hop_len = static_cast<size_t>(cfg.hop_ms) * clip.sample_rate / 1000;
    const size_t n = clip.samples.size();

    if (frame_len == 0 || hop_len == 0 || n < frame_len)
        throw Error(Errc::no_speech_detected, "clip shorter than one frame: " + clip.source_id);

    const size_t n_frames = (n - frame_len) / hop_len + 1;
    std::vector<double> rms(n_frames);
    double peak = 0.0;
    for (size_t f = 0; f < n_frames; ++f) {
        double acc = 0.0;
        const float* x = clip.samples.data() + f * hop_len;
        for (size_t i = 0; i < frame_len; ++i) acc += static_cast<double>(x[i]) * x[i];
        rms[f] = std::sqrt(acc / frame_len);
        peak = std::max(peak, rms[f]);
    }
    if (peak <= 0.0)
        throw Error(Errc::no_speech_detected, "all-zero clip: " + clip.source_id);

    size_t first = n_frames, last = 0, count = 0;
    for (size_t f = 0; f < n_frames; ++f) {
        double db = 20.0 * std::log10(rms[f] / peak + 1e-300);
        if (db >= cfg.energy_floor_db) {
            first = std::min(first, f);
            last = std::max(last, f);
            ++count;
        }
    }
    if (count < static_cast<size_t>(cfg.min_speech_frames))
        throw Error(Errc::no_speech_detected,
                    "only " + std::to_string(count) + " speech frames in " + clip.source_id);

    const size_t hang = static_cast<size_t>(cfg.hangover_frames);
    size_t begin_frame = first > hang ? first - hang : 0;
    size_t end_frame = std::min(last + hang, n_frames - 1);

    size_t begin_sample = begin_frame * hop_len;
    size_t end_sample = std::min(end_frame * hop_len + frame_len, n);

    audio::AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.source_id = clip.source_id;
    out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin_sample),
                       clip.samples.begin() + static_cast<std::ptrdiff_t>(end_sample));
    return out;
}

} // namespace nonword::vad
