#include "nonword/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nonword/error.hpp"

namespace nonword::audio {

namespace {

uint32_t read_u32(const std::vector<uint8_t>& b, size_t off) {
    return static_cast<uint32_t>(b[off]) | static_cast<uint32_t>(b[off + 1]) << 8 |
           static_cast<uint32_t>(b[off + 2]) << 16 | static_cast<uint32_t>(b[off + 3]) << 24;
}

uint16_t read_u16(const std::vector<uint8_t>& b, size_t off) {
    return static_cast<uint16_t>(b[off] | b[off + 1] << 8);
}

float read_f32(const std::vector<uint8_t>& b, size_t off) {
    uint32_t u = read_u32(b, off);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

bool tag_is(const std::vector<uint8_t>& b, size_t off, const char* tag) {
    return std::memcmp(b.data() + off, tag, 4) == 0;
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8 & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 16 & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 24 & 0xff));
}

void append_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8 & 0xff));
}

void append_tag(std::vector<uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

} // namespace

AudioClip decode_wav(const std::vector<uint8_t>& bytes, const std::string& source_id) {
    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
        throw Error(Errc::malformed_header, "not a RIFF/WAVE stream");

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    size_t data_off = 0, data_len = 0;
    bool have_data = false;

    size_t off = 12;
    while (off + 8 <= bytes.size()) {
        uint32_t chunk_len = read_u32(bytes, off + 4);
        size_t body = off + 8;
        if (body + chunk_len > bytes.size())
            throw Error(Errc::malformed_header, "chunk overruns file");
        if (tag_is(bytes, off, "fmt ")) {
            if (chunk_len < 16) throw Error(Errc::malformed_header, "fmt chunk too short");
            format = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (tag_is(bytes, off, "data")) {
            data_off = body;
            data_len = chunk_len;
            have_data = true;
        }
        off = body + chunk_len + (chunk_len & 1); // chunks are word-aligned
    }

    if (!have_fmt || !have_data)
        throw Error(Errc::malformed_header, "missing fmt or data chunk");
    if (channels == 0 || rate == 0)
        throw Error(Errc::malformed_header, "fmt declares zero channels or rate");
    if (!(format == 1 && bits == 16) && !(format == 3 && bits == 32))
        throw Error(Errc::unsupported_encoding,
                    "format " + std::to_string(format) + "/" + std::to_string(bits) +
                        "-bit; only PCM16 and IEEE float32 supported");
    if (data_len == 0) throw Error(Errc::empty_audio, "zero-length data chunk");

    const size_t bytes_per_sample = bits / 8;
    const size_t frame_bytes = bytes_per_sample * channels;
    const size_t n_frames = data_len / frame_bytes;
    if (n_frames == 0) throw Error(Errc::empty_audio, "data chunk shorter than one frame");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.source_id = source_id;
    clip.samples.resize(n_frames);

    for (size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
            size_t p = data_off + i * frame_bytes + c * bytes_per_sample;
            if (format == 1) {
                int16_t s = static_cast<int16_t>(read_u16(bytes, p));
                acc += s / 32768.0;
            } else {
                acc += read_f32(bytes, p);
            }
        }
        double v = acc / channels;
        clip.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    return clip;
}

std::vector<uint8_t> encode_wav(const AudioClip& clip) {
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_len = n * 4;
    std::vector<uint8_t> out;
    out.reserve(58 + data_len);

    append_tag(out, "RIFF");
    append_u32(out, 4 + 8 + 16 + 8 + 4 + 8 + data_len); // WAVE + fmt + fact + data
    append_tag(out, "WAVE");

    append_tag(out, "fmt ");
    append_u32(out, 16);
    append_u16(out, 3); // IEEE float
    append_u16(out, 1); // mono
    append_u32(out, static_cast<uint32_t>(clip.sample_rate));
    append_u32(out, static_cast<uint32_t>(clip.sample_rate) * 4);
    append_u16(out, 4);
    append_u16(out, 32);

    append_tag(out, "fact");
    append_u32(out, 4);
    append_u32(out, n);

    append_tag(out, "data");
    append_u32(out, data_len);
    for (float s : clip.samples) {
        uint32_t u;
        std::memcpy(&u, &s, 4);
        append_u32(out, u);
    }
    return out;
}

AudioClip read_wav_file(const std::string& path, const std::string& source_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_wav(bytes, source_id.empty() ? path : source_id);
}

void write_wav_file(const std::string& path, const AudioClip& clip) {
    auto bytes = encode_wav(clip);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw Error(Errc::empty_audio, "target rate must be positive");
    if (target_rate == clip.sample_rate) return clip;

    const size_t n = clip.samples.size();
    const size_t out_len = static_cast<size_t>(
        std::llround(static_cast<double>(n) * target_rate / clip.sample_rate));

    AudioClip out;
    out.sample_rate = target_rate;
    out.source_id = clip.source_id;
    out.samples.resize(out_len);

    const double step = static_cast<double>(clip.sample_rate) / target_rate;
    for (size_t i = 0; i < out_len; ++i) {
        double pos = i * step;
        size_t i0 = static_cast<size_t>(pos);
        if (i0 >= n - 1) {
            out.samples[i] = clip.samples[n - 1];
            continue;
        }
        double frac = pos - static_cast<double>(i0);
        out.samples[i] = static_cast<float>((1.0 - frac) * clip.samples[i0] + frac * clip.samples[i0 + 1]);
    }
    return out;
}

} // namespace nonword::audio
