#include "nonword/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "nonword/error.hpp"

namespace nonword::features {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

} // namespace

const char* feature_kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::mel: return "mel";
        case FeatureKind::utterance_embedding: return "utterance_embedding";
        case FeatureKind::frame_embedding: return "frame_embedding";
        case FeatureKind::senone_posterior: return "senone_posterior";
    }
    return "unknown";
}

void validate_feature_matrix(const FeatureMatrix& fm) {
    if (fm.frames < 1 || fm.dims < 1)
        throw Error(Errc::dim_mismatch, "feature matrix must be at least 1x1");
    if (fm.data.size() != fm.frames * fm.dims)
        throw Error(Errc::dim_mismatch, "data size does not match frames x dims");
    for (float v : fm.data)
        if (!std::isfinite(v))
            throw Error(Errc::non_finite_value, "non-finite entry in " + fm.utterance_id);
    if (fm.kind == FeatureKind::utterance_embedding && fm.frames != 1)
        throw Error(Errc::dim_mismatch, "utterance embedding must have exactly one frame");
    if (fm.kind == FeatureKind::frame_embedding && fm.hop_seconds <= 0.0)
        throw Error(Errc::dim_mismatch, "frame embedding requires hop_seconds > 0");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double warp_frequency(double hz, double alpha, double nyquist) {
    return std::min(hz / alpha, nyquist);
}

Spectrogram compute_stft(const audio::AudioClip& clip, const StftConfig& cfg) {
    const int frame_len = cfg.frame_length(clip.sample_rate);
    const int hop_len = cfg.hop_length(clip.sample_rate);
    if (frame_len <= 0 || hop_len <= 0 || hop_len > frame_len)
        throw Error(Errc::bad_config, "invalid frame/hop configuration");
    if (!is_power_of_two(cfg.n_fft) || cfg.n_fft < frame_len)
        throw Error(Errc::bad_config, "n_fft must be a power of two >= frame length");
    if (clip.samples.size() < static_cast<size_t>(frame_len))
        throw Error(Errc::clip_too_short,
                    std::to_string(clip.samples.size()) + " samples < one frame (" +
                        std::to_string(frame_len) + ")");

    const size_t n_frames = (clip.samples.size() - frame_len) / hop_len + 1;
    const size_t n_bins = static_cast<size_t>(cfg.n_fft) / 2 + 1;

    std::vector<double> window(frame_len);
    for (int i = 0; i < frame_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / frame_len);

    Spectrogram spec;
    spec.frames = n_frames;
    spec.bins = n_bins;
    spec.data.resize(n_frames * n_bins);

    std::vector<std::complex<double>> buf(cfg.n_fft);
    for (size_t f = 0; f < n_frames; ++f) {
        const float* x = clip.samples.data() + f * hop_len;
        for (int i = 0; i < frame_len; ++i) buf[i] = {x[i] * window[i], 0.0};
        std::fill(buf.begin() + frame_len, buf.end(), std::complex<double>(0.0, 0.0));
        fft_radix2(buf);
        for (size_t b = 0; b < n_bins; ++b) spec.data[f * n_bins + b] = std::norm(buf[b]);
    }
    return spec;
}

MelFilterbank build_mel_filterbank(int sample_rate, int n_fft, size_t n_mels, double warp_alpha) {
    if (warp_alpha < kAlphaMin || warp_alpha > kAlphaMax)
        throw Error(Errc::invalid_alpha, "warp_alpha " + std::to_string(warp_alpha) +
                                             " outside [0.7, 1.4]");
    if (!is_power_of_two(n_fft) || sample_rate <= 0 || n_mels < 1)
        throw Error(Errc::bad_config, "bad filterbank parameters");

    const double nyquist = sample_rate / 2.0;
    const size_t n_bins = static_cast<size_t>(n_fft) / 2 + 1;

    // n_mels + 2 edges, uniform in mel, warped edge-wise.
    std::vector<double> edges(n_mels + 2);
    const double mel_max = hz_to_mel(nyquist);
    for (size_t i = 0; i < edges.size(); ++i) {
        double hz = mel_to_hz(mel_max * static_cast<double>(i) / (n_mels + 1));
        edges[i] = warp_frequency(hz, warp_alpha, nyquist);
    }

    MelFilterbank bank;
    bank.n_mels = n_mels;
    bank.sample_rate = sample_rate;
    bank.n_fft = n_fft;
    bank.warp_alpha = warp_alpha;
    bank.center_freqs.assign(edges.begin() + 1, edges.end() - 1);
    bank.weights.assign(n_mels * n_bins, 0.0f);

    const double bin_hz = static_cast<double>(sample_rate) / n_fft;
    std::vector<double> row(n_bins);
    for (size_t m = 0; m < n_mels; ++m) {
        const double e0 = edges[m], e1 = edges[m + 1], e2 = edges[m + 2];
        double row_max = 0.0;
        for (size_t k = 0; k < n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f > e0 && f < e1 && e1 > e0)
                w = (f - e0) / (e1 - e0);
            else if (f == e1)
                w = 1.0;
            else if (f > e1 && f < e2 && e2 > e1)
                w = (e2 - f) / (e2 - e1);
            row[k] = w;
            row_max = std::max(row_max, w);
        }
        if (row_max > 0.0) {
            for (size_t k = 0; k < n_bins; ++k)
                bank.weights[m * n_bins + k] = static_cast<float>(row[k] / row_max);
        } else {
            // Filter narrower than one FFT bin: fall back to the bin nearest
            // the center frequency so the row keeps a single unit peak.
            size_t k = static_cast<size_t>(std::llround(e1 / bin_hz));
            k = std::min(k, n_bins - 1);
            bank.weights[m * n_bins + k] = 1.0f;
        }
    }
    return bank;
}

FeatureMatrix mel_spectrogram(const audio::AudioClip& clip, const StftConfig& cfg,
                              const MelFilterbank& bank) {
    if (bank.sample_rate != clip.sample_rate)
        throw Error(Errc::bad_config, "filterbank sample rate does not match clip");
    if (bank.n_fft != cfg.n_fft)
        throw Error(Errc::bad_config, "filterbank n_fft does not match STFT config");

    Spectrogram spec = compute_stft(clip, cfg);
    const size_t n_bins = spec.bins;

    FeatureMatrix fm;
    fm.frames = spec.frames;
    fm.dims = bank.n_mels;
    fm.hop_seconds = cfg.hop_ms / 1000.0;
    fm.kind = FeatureKind::mel;
    fm.utterance_id = clip.source_id;
    fm.data.resize(fm.frames * fm.dims);

    for (size_t f = 0; f < spec.frames; ++f) {
        const double* p = spec.data.data() + f * n_bins;
        for (size_t m = 0; m < bank.n_mels; ++m) {
            const float* w = bank.weights.data() + m * n_bins;
            double acc = 0.0;
            for (size_t k = 0; k < n_bins; ++k) acc += p[k] * w[k];
            fm.data[f * fm.dims + m] = static_cast<float>(std::log(acc + 1e-10));
        }
    }
    return fm;
}

std::vector<std::optional<double>> estimate_f0(const audio::AudioClip& clip, double fmin,
                                               double fmax) {
    const int rate = clip.sample_rate;
    const size_t frame_len = static_cast<size_t>(40 * rate / 1000);
    const size_t hop_len = static_cast<size_t>(10 * rate / 1000);
    const size_t lag_min = static_cast<size_t>(std::ceil(rate / fmax));
    const size_t lag_max = static_cast<size_t>(std::floor(rate / fmin));

    std::vector<std::optional<double>> track;
    if (clip.samples.size() < frame_len || lag_max + 1 >= frame_len || lag_min < 1 ||
        lag_min > lag_max)
        return track;

    const size_t n_frames = (clip.samples.size() - frame_len) / hop_len + 1;
    const size_t w = frame_len - lag_max; // fixed correlation window
    std::vector<double> r(lag_max + 2, 0.0);

    for (size_t f = 0; f < n_frames; ++f) {
        const float* x = clip.samples.data() + f * hop_len;

        double e0 = 0.0;
        for (size_t t = 0; t < w; ++t) e0 += static_cast<double>(x[t]) * x[t];

        double best = 0.0;
        size_t best_lag = 0;
        for (size_t lag = lag_min; lag <= lag_max; ++lag) {
            double num = 0.0, elag = 0.0;
            for (size_t t = 0; t < w; ++t) {
                num += static_cast<double>(x[t]) * x[t + lag];
                elag += static_cast<double>(x[t + lag]) * x[t + lag];
            }
            double denom = std::sqrt(e0 * elag);
            double v = denom > 0.0 ? num / denom : 0.0;
            r[lag] = v;
            if (v > best) {
                best = v;
                best_lag = lag;
            }
        }

        if (best < 0.5 || best_lag == 0) {
            track.push_back(std::nullopt);
            continue;
        }

        double lag_est = static_cast<double>(best_lag);
        if (best_lag > lag_min && best_lag < lag_max) {
            const double rm = r[best_lag - 1], r0 = r[best_lag], rp = r[best_lag + 1];
            const double denom = rm - 2.0 * r0 + rp;
            if (std::abs(denom) > 1e-12) {
                double delta = 0.5 * (rm - rp) / denom;
                lag_est += std::clamp(delta, -0.5, 0.5);
            }
        }
        lag_est = std::clamp(lag_est, static_cast<double>(lag_min), static_cast<double>(lag_max));
        track.push_back(rate / lag_est);
    }
    return track;
}

double warp_alpha_from_f0(double mean_f0, double reference_f0) {
    return std::clamp(mean_f0 / reference_f0, kAlphaMin, kAlphaMax);
}

WarpFactor compute_warp_factor(const std::vector<audio::AudioClip>& speaker_clips,
                               double reference_f0, const std::string& speaker_id) {
    if (reference_f0 <= 0.0)
        throw Error(Errc::bad_config, "reference f0 must be positive");

    double sum = 0.0;
    size_t count = 0;
    for (const auto& clip : speaker_clips) {
        for (const auto& f0 : estimate_f0(clip)) {
            if (f0) {
                sum += *f0;
                ++count;
            }
        }
    }

    WarpFactor wf;
    wf.speaker_id = speaker_id;
    if (count == 0) {
        wf.alpha = 1.0;
        wf.mean_f0_hz = 0.0;
        wf.no_voiced_frames = true;
        return wf;
    }
    wf.mean_f0_hz = sum / static_cast<double>(count);
    wf.alpha = warp_alpha_from_f0(wf.mean_f0_hz, reference_f0);
    return wf;
}

PadResult pad_or_truncate(const FeatureMatrix& fm, size_t target_frames) {
    if (target_frames < 1)
        throw Error(Errc::bad_config, "target_frames must be >= 1");

    PadResult res;
    res.features = fm;
    if (fm.frames == target_frames) return res;

    res.features.frames = target_frames;
    res.features.data.resize(target_frames * fm.dims, 0.0f);
    res.truncated = fm.frames > target_frames;
    return res;
}

} // namespace nonword::features
