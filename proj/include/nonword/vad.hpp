#pragma once

#include "nonword/audio.hpp"

namespace nonword::vad {

/// Energy-based endpoint detector. The threshold is relative to the clip's
/// peak frame RMS, so gain changes do not alter decisions.
struct VadConfig {
    int frame_ms = 25;
    int hop_ms = 10;
    double energy_floor_db = -35.0;
    int hangover_frames = 5;
    int min_speech_frames = 5;
};

/// Trim leading/trailing non-speech. A frame is speech when its RMS, in dB
/// relative to the peak frame RMS, is at or above energy_floor_db. The result
/// spans the first to last speech frame, each extended by hangover_frames.
/// Interior frames are never removed.
/// Throws NoSpeechDetected when fewer than min_speech_frames qualify.
audio::AudioClip trim(const audio::AudioClip& clip, const VadConfig& cfg = {});

} // namespace nonword::vad
