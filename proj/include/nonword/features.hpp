#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonword/audio.hpp"

namespace nonword::features {

struct StftConfig {
    int frame_ms = 25;
    int hop_ms = 10;
    int n_fft = 512; // power of two, >= frame length in samples

    int frame_length(int sample_rate) const { return frame_ms * sample_rate / 1000; }
    int hop_length(int sample_rate) const { return hop_ms * sample_rate / 1000; }
};

/// Power spectrogram, frames x (n_fft/2 + 1), row-major.
struct Spectrogram {
    std::vector<double> data;
    size_t frames = 0;
    size_t bins = 0;

    double at(size_t f, size_t b) const { return data[f * bins + b]; }
};

enum class FeatureKind : uint8_t {
    mel = 0,
    utterance_embedding = 1,
    frame_embedding = 2,
    senone_posterior = 3,
};

const char* feature_kind_name(FeatureKind k);

/// frames x dims real matrix; the universal classifier input.
struct FeatureMatrix {
    std::vector<float> data; // row-major frames x dims
    size_t frames = 0;
    size_t dims = 0;
    double hop_seconds = 0.0; // 0 for utterance-level features
    FeatureKind kind = FeatureKind::mel;
    std::string utterance_id;

    float at(size_t f, size_t d) const { return data[f * dims + d]; }
    float& at(size_t f, size_t d) { return data[f * dims + d]; }
};

/// Throws on violated invariants (empty, non-finite, utterance kind with >1 frame).
void validate_feature_matrix(const FeatureMatrix& fm);

struct MelFilterbank {
    size_t n_mels = 128;
    int sample_rate = 0;
    int n_fft = 0;
    double warp_alpha = 1.0;
    std::vector<float> weights; // n_mels x (n_fft/2+1), row-major, peak-normalized
    std::vector<double> center_freqs; // Hz, one per filter

    size_t bins() const { return static_cast<size_t>(n_fft) / 2 + 1; }
    float weight(size_t mel, size_t bin) const { return weights[mel * bins() + bin]; }
};

struct WarpFactor {
    double alpha = 1.0;
    std::string speaker_id;
    double mean_f0_hz = 0.0;
    bool no_voiced_frames = false;
};

inline constexpr double kAlphaMin = 0.7;
inline constexpr double kAlphaMax = 1.4;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// VTLN frequency remapping applied to filterbank edges: f/alpha, clamped at Nyquist.
double warp_frequency(double hz, double alpha, double nyquist);

/// Hann-windowed power STFT; frame count = floor((N - frame_len)/hop) + 1.
Spectrogram compute_stft(const audio::AudioClip& clip, const StftConfig& cfg = {});

MelFilterbank build_mel_filterbank(int sample_rate, int n_fft, size_t n_mels = 128,
                                   double warp_alpha = 1.0);

/// log(power * weights^T + 1e-10), frames x n_mels.
FeatureMatrix mel_spectrogram(const audio::AudioClip& clip, const StftConfig& cfg,
                              const MelFilterbank& bank);

/// Per-frame f0 (40 ms frame, 10 ms hop) by normalized autocorrelation with
/// parabolic peak interpolation. nullopt = unvoiced. Estimates are confined
/// to [fmin, fmax].
std::vector<std::optional<double>> estimate_f0(const audio::AudioClip& clip,
                                               double fmin = 120.0, double fmax = 600.0);

/// clamp(mean_f0 / reference_f0, 0.7, 1.4) — the per-speaker warp rule.
double warp_alpha_from_f0(double mean_f0, double reference_f0);

/// Pooled mean voiced f0 across the speaker's clips; alpha = clamp(mean/reference).
/// No voiced frame anywhere yields the identity warp with a warning flag.
WarpFactor compute_warp_factor(const std::vector<audio::AudioClip>& speaker_clips,
                               double reference_f0, const std::string& speaker_id = "");

struct PadResult {
    FeatureMatrix features;
    bool truncated = false;
};

/// Zero-pad rows up to target_frames, or truncate (flagged) beyond it.
PadResult pad_or_truncate(const FeatureMatrix& fm, size_t target_frames);

} // namespace nonword::features
