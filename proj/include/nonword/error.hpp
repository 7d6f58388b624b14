#pragma once

#include <stdexcept>
#include <string>

namespace nonword {

enum class Errc {
    // audio
    malformed_header,
    unsupported_encoding,
    empty_audio,
    // vad
    no_speech_detected,
    // features
    clip_too_short,
    invalid_alpha,
    // dataset
    duplicate_id,
    bad_nonword_id,
    bad_label,
    missing_column,
    empty_split,
    single_class_split,
    bad_magic,
    dim_mismatch,
    non_finite_value,
    // nn
    shape_mismatch,
    stale_cache,
    // model
    input_too_small,
    version_mismatch,
    corrupt_blob,
    // train
    mode_mismatch,
    // eval
    empty_input,
    single_class_input,
    missing_model_for_word,
    empty_test_split,
    // cli / io
    io_error,
    bad_config,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace nonword
