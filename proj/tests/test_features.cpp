#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "nonword/error.hpp"
#include "nonword/features.hpp"

using namespace nonword;
using namespace nonword::features;

TEST_CASE("stft frame count and bin count") {
    auto spec = compute_stft(fixtures::sine(440.0, 1.0), {});
    CHECK(spec.frames == 98); // floor((16000 - 400) / 160) + 1
    CHECK(spec.bins == 257);
}

TEST_CASE("stft of silence is all zero") {
    auto spec = compute_stft(fixtures::silence(0.5), {});
    for (double v : spec.data) CHECK(v == 0.0);
}

TEST_CASE("stft puts a 1 kHz tone in bin 32") {
    auto spec = compute_stft(fixtures::sine(1000.0, 0.5), {});
    for (size_t f = 0; f < spec.frames; ++f) {
        size_t argmax = 0;
        for (size_t b = 1; b < spec.bins; ++b)
            if (spec.at(f, b) > spec.at(f, argmax)) argmax = b;
        CHECK(argmax == 32); // 1000 / (16000/512)
    }
}

TEST_CASE("stft power matches a naive DFT oracle") {
    // independent O(n^2) reference over the same Hann-windowed frame
    auto clip = fixtures::noise(0.04, 16000, 31, 0.9f); // one 25 ms frame
    features::StftConfig cfg;
    auto spec = compute_stft(clip, cfg);
    REQUIRE(spec.frames >= 1);

    const int frame_len = cfg.frame_length(16000);
    std::vector<double> windowed(static_cast<size_t>(cfg.n_fft), 0.0);
    for (int i = 0; i < frame_len; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / frame_len);
        windowed[static_cast<size_t>(i)] = clip.samples[static_cast<size_t>(i)] * w;
    }
    for (size_t b = 0; b < spec.bins; ++b) {
        double re = 0.0, im = 0.0;
        for (size_t t = 0; t < windowed.size(); ++t) {
            const double phase = -2.0 * std::numbers::pi * static_cast<double>(b * t) / cfg.n_fft;
            re += windowed[t] * std::cos(phase);
            im += windowed[t] * std::sin(phase);
        }
        const double expected = re * re + im * im;
        CHECK(spec.at(0, b) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("stft rejects short clips") {
    try {
        compute_stft(fixtures::sine(440.0, 0.01), {});
        FAIL("expected ClipTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::clip_too_short);
    }
}

TEST_CASE("mel scale formula and inverse") {
    CHECK(hz_to_mel(0.0) == 0.0);
    CHECK(hz_to_mel(1000.0) == doctest::Approx(1000.0).epsilon(1e-4));
    CHECK(mel_to_hz(hz_to_mel(4000.0)) == doctest::Approx(4000.0).epsilon(1e-9));
    CHECK(hz_to_mel(mel_to_hz(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));
}

TEST_CASE("filterbank identity warp matches the unwarped bank") {
    const double nyq = 8000.0;
    CHECK(warp_frequency(3333.0, 1.0, nyq) == 3333.0);
    auto a = build_mel_filterbank(16000, 512, 128, 1.0);
    auto b = build_mel_filterbank(16000, 512, 128, 1.0);
    CHECK(a.weights == b.weights);
    CHECK(a.n_mels == 128);
    CHECK(a.center_freqs.size() == 128);
}

TEST_CASE("filterbank rejects alpha outside [0.7, 1.4]") {
    for (double alpha : {0.69, 1.41, 0.0, -1.0}) {
        try {
            build_mel_filterbank(16000, 512, 128, alpha);
            FAIL("expected InvalidAlpha");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::invalid_alpha);
        }
    }
}

TEST_CASE("warp alpha=1.25 divides every center frequency") {
    auto base = build_mel_filterbank(16000, 512, 128, 1.0);
    auto warped = build_mel_filterbank(16000, 512, 128, 1.25);
    const double half_bin = 0.5 * 16000.0 / 512.0;
    for (size_t m = 0; m < 128; ++m)
        CHECK(std::abs(warped.center_freqs[m] - base.center_freqs[m] / 1.25) <= half_bin);
}

TEST_CASE("warp round trip recovers the identity centers") {
    auto base = build_mel_filterbank(16000, 512, 128, 1.0);
    for (double alpha : {1.25, 1.1, 0.8}) {
        auto warped = build_mel_filterbank(16000, 512, 128, alpha);
        for (size_t m = 0; m < 128; ++m) {
            if (warped.center_freqs[m] >= 7999.999) continue; // clamped at Nyquist
            const double back = warp_frequency(warped.center_freqs[m], 1.0 / alpha, 8000.0);
            CHECK(std::abs(back - base.center_freqs[m]) <=
                  1e-6 * std::max(1.0, base.center_freqs[m]));
        }
    }
}

TEST_CASE("filterbank rows peak at 1 with contiguous support") {
    for (double alpha : {0.7, 1.0, 1.25, 1.4}) {
        auto bank = build_mel_filterbank(16000, 512, 128, alpha);
        const size_t bins = bank.bins();
        for (size_t m = 0; m < bank.n_mels; ++m) {
            float row_max = 0.0f;
            size_t first = bins, last = 0;
            for (size_t k = 0; k < bins; ++k) {
                const float w = bank.weight(m, k);
                CHECK(w >= 0.0f);
                row_max = std::max(row_max, w);
                if (w > 0.0f) {
                    first = std::min(first, k);
                    last = std::max(last, k);
                }
            }
            CHECK(row_max == 1.0f);
            // support is one contiguous bin range
            for (size_t k = first; k <= last; ++k) {
                const bool inside = bank.weight(m, k) > 0.0f;
                if (!inside) {
                    bool before = false, after = false;
                    for (size_t j = first; j < k; ++j) before |= bank.weight(m, j) > 0.0f;
                    for (size_t j = k + 1; j <= last; ++j) after |= bank.weight(m, j) > 0.0f;
                    CHECK(!(before && after));
                }
            }
        }
    }
}

TEST_CASE("mel spectrogram of silence is the log floor") {
    auto bank = build_mel_filterbank(16000, 512, 128, 1.0);
    auto fm = mel_spectrogram(fixtures::silence(0.3), {}, bank);
    const float floor_db = static_cast<float>(std::log(1e-10));
    for (float v : fm.data) CHECK(v == doctest::Approx(floor_db));
    CHECK(fm.hop_seconds == doctest::Approx(0.010));
    CHECK(fm.kind == FeatureKind::mel);
}

TEST_CASE("mel spectrogram shape is 98 x 128 for one second") {
    auto bank = build_mel_filterbank(16000, 512, 128, 1.0);
    auto fm = mel_spectrogram(fixtures::sine(500.0, 1.0), {}, bank);
    CHECK(fm.frames == 98);
    CHECK(fm.dims == 128);
}

TEST_CASE("mel energies never fall below the log floor") {
    auto bank = build_mel_filterbank(16000, 512, 128, 1.0);
    auto fm = mel_spectrogram(fixtures::noise(0.4, 16000, 21), {}, bank);
    const float floor_db = static_cast<float>(std::log(1e-10));
    for (float v : fm.data) CHECK(v >= floor_db - 1e-5f);
}

TEST_CASE("mel frame count depends only on length and config") {
    auto bank = build_mel_filterbank(16000, 512, 128, 1.0);
    auto a = mel_spectrogram(fixtures::sine(500.0, 0.8), {}, bank);
    auto b = mel_spectrogram(fixtures::noise(0.8, 16000, 5), {}, bank);
    CHECK(a.frames == b.frames);
}

TEST_CASE("f0 estimate tracks pure sines") {
    for (double freq : {150.0, 220.0, 400.0}) {
        auto track = estimate_f0(fixtures::sine(freq, 0.5));
        size_t voiced = 0;
        for (const auto& f0 : track) {
            if (!f0) continue;
            ++voiced;
            CHECK(std::abs(*f0 - freq) <= 2.0);
        }
        CHECK(voiced > 0);
        CHECK(voiced >= track.size() - 2);
    }
}

TEST_CASE("f0 of white noise is mostly unvoiced") {
    auto track = estimate_f0(fixtures::noise(1.0, 16000, 9));
    REQUIRE(!track.empty());
    size_t unvoiced = 0;
    for (const auto& f0 : track)
        if (!f0) ++unvoiced;
    CHECK(static_cast<double>(unvoiced) >= 0.9 * static_cast<double>(track.size()));
}

TEST_CASE("f0 never reports below fmin") {
    auto track = estimate_f0(fixtures::sine(100.0, 0.5), 120.0, 600.0);
    for (const auto& f0 : track)
        if (f0) CHECK(*f0 >= 120.0);
}

TEST_CASE("f0 is amplitude invariant") {
    auto loud = fixtures::sine(220.0, 0.4, 16000, 1.0f);
    auto quiet = fixtures::sine(220.0, 0.4, 16000, 0.1f);
    auto ta = estimate_f0(loud), tb = estimate_f0(quiet);
    REQUIRE(ta.size() == tb.size());
    for (size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].has_value() == tb[i].has_value());
        if (ta[i]) CHECK(std::abs(*ta[i] - *tb[i]) <= 0.1);
    }
}

TEST_CASE("warp factor rule: ratio with clamping") {
    CHECK(warp_alpha_from_f0(200.0, 200.0) == 1.0);
    CHECK(warp_alpha_from_f0(250.0, 200.0) == 1.25);
    CHECK(warp_alpha_from_f0(350.0, 200.0) == 1.4);
    CHECK(warp_alpha_from_f0(100.0, 200.0) == 0.7);
}

TEST_CASE("warp factor pools voiced frames across clips") {
    std::vector<audio::AudioClip> clips = {fixtures::sine(250.0, 0.4),
                                           fixtures::sine(250.0, 0.3)};
    auto wf = compute_warp_factor(clips, 200.0, "spk1");
    CHECK(wf.speaker_id == "spk1");
    CHECK_FALSE(wf.no_voiced_frames);
    CHECK(wf.mean_f0_hz == doctest::Approx(250.0).epsilon(0.01));
    CHECK(wf.alpha == doctest::Approx(1.25).epsilon(0.01));
}

TEST_CASE("warp factor clamps high ratios to 1.4 exactly") {
    std::vector<audio::AudioClip> clips = {fixtures::sine(350.0, 0.5)};
    auto wf = compute_warp_factor(clips, 200.0, "spk2");
    CHECK(wf.alpha == 1.4);
}

TEST_CASE("warp factor degenerates to identity without voiced frames") {
    std::vector<audio::AudioClip> clips = {fixtures::noise(0.3, 16000, 4, 0.5f)};
    auto wf = compute_warp_factor(clips, 200.0, "spk3");
    CHECK(wf.alpha == 1.0);
    CHECK(wf.no_voiced_frames);
}

TEST_CASE("pad_or_truncate") {
    FeatureMatrix fm;
    fm.frames = 50;
    fm.dims = 4;
    fm.kind = FeatureKind::mel;
    fm.hop_seconds = 0.01;
    fm.data.resize(200);
    for (size_t i = 0; i < fm.data.size(); ++i) fm.data[i] = static_cast<float>(i + 1);

    SUBCASE("pads with zero rows") {
        auto r = pad_or_truncate(fm, 98);
        CHECK_FALSE(r.truncated);
        CHECK(r.features.frames == 98);
        for (size_t i = 0; i < 200; ++i) CHECK(r.features.data[i] == fm.data[i]);
        for (size_t i = 200; i < 98 * 4; ++i) CHECK(r.features.data[i] == 0.0f);
    }
    SUBCASE("equal length is bitwise identical") {
        auto r = pad_or_truncate(fm, 50);
        CHECK_FALSE(r.truncated);
        CHECK(r.features.data == fm.data);
    }
    SUBCASE("truncates with a warning flag") {
        auto r = pad_or_truncate(fm, 30);
        CHECK(r.truncated);
        CHECK(r.features.frames == 30);
        CHECK(r.features.data ==
              std::vector<float>(fm.data.begin(), fm.data.begin() + 120));
    }
}

TEST_CASE("feature matrix validation") {
    FeatureMatrix fm;
    fm.frames = 2;
    fm.dims = 3;
    fm.kind = FeatureKind::utterance_embedding;
    fm.data = {1, 2, 3, 4, 5, 6};
    try {
        validate_feature_matrix(fm);
        FAIL("utterance embeddings must be single-frame");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::dim_mismatch);
    }
    fm.kind = FeatureKind::mel;
    CHECK_NOTHROW(validate_feature_matrix(fm));
    fm.data[3] = std::numeric_limits<float>::quiet_NaN();
    try {
        validate_feature_matrix(fm);
        FAIL("expected NonFiniteValue");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_finite_value);
    }
}
