#include "nonword/error.hpp"

namespace nonword {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::malformed_header: return "MalformedHeader";
        case Errc::unsupported_encoding: return "UnsupportedEncoding";
        case Errc::empty_audio: return "EmptyAudio";
        case Errc::no_speech_detected: return "NoSpeechDetected";
        case Errc::clip_too_short: return "ClipTooShort";
        case Errc::invalid_alpha: return "InvalidAlpha";
        case Errc::duplicate_id: return "DuplicateId";
        case Errc::bad_nonword_id: return "BadNonwordId";
        case Errc::bad_label: return "BadLabel";
        case Errc::missing_column: return "MissingColumn";
        case Errc::empty_split: return "EmptySplit";
        case Errc::single_class_split: return "SingleClassSplit";
        case Errc::bad_magic: return "BadMagic";
        case Errc::dim_mismatch: return "DimMismatch";
        case Errc::non_finite_value: return "NonFiniteValue";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::stale_cache: return "StaleCache";
        case Errc::input_too_small: return "InputTooSmall";
        case Errc::version_mismatch: return "VersionMismatch";
        case Errc::corrupt_blob: return "CorruptBlob";
        case Errc::mode_mismatch: return "ModeMismatch";
        case Errc::empty_input: return "EmptyInput";
        case Errc::single_class_input: return "SingleClassInput";
        case Errc::missing_model_for_word: return "MissingModelForWord";
        case Errc::empty_test_split: return "EmptyTestSplit";
        case Errc::io_error: return "IoError";
        case Errc::bad_config: return "BadConfig";
    }
    return "UnknownError";
}

} // namespace nonword
