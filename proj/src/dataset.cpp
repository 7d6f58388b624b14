#include "nonword/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_set>

#include "nonword/error.hpp"

namespace nonword::dataset {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

size_t round_half_up(double x) { return static_cast<size_t>(std::floor(x + 0.5)); }

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8 & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 16 & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 24 & 0xff));
}

uint32_t read_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

} // namespace

const char* label_name(Label l) { return l == Label::correct ? "correct" : "incorrect"; }

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

std::vector<const UtteranceRecord*> DatasetManifest::in_split(Split s) const {
    std::vector<const UtteranceRecord*> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(&r);
    return out;
}

std::vector<const UtteranceRecord*> DatasetManifest::in_split(Split s, int nonword_id) const {
    std::vector<const UtteranceRecord*> out;
    for (const auto& r : records)
        if (r.split == s && r.nonword_id == nonword_id) out.push_back(&r);
    return out;
}

DatasetManifest parse_manifest(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != kManifestHeader)
        throw Error(Errc::missing_column,
                    std::string("header must be exactly `") + kManifestHeader + "`");

    DatasetManifest manifest;
    std::unordered_set<std::string> seen_ids;
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 6)
            throw Error(Errc::missing_column, "row " + std::to_string(row) + " has " +
                                                  std::to_string(fields.size()) +
                                                  " fields, expected 6");
        UtteranceRecord rec;
        rec.utterance_id = fields[0];
        rec.speaker_id = fields[1];
        try {
            size_t pos = 0;
            rec.nonword_id = std::stoi(fields[2], &pos);
            if (pos != fields[2].size()) rec.nonword_id = -1;
        } catch (const std::exception&) {
            rec.nonword_id = -1;
        }
        if (rec.nonword_id < 1 || rec.nonword_id > 7)
            throw Error(Errc::bad_nonword_id,
                        "row " + std::to_string(row) + ": nonword_id `" + fields[2] +
                            "` outside 1..7");
        if (fields[3] == "correct")
            rec.label = Label::correct;
        else if (fields[3] == "incorrect")
            rec.label = Label::incorrect;
        else
            throw Error(Errc::bad_label,
                        "row " + std::to_string(row) + ": label `" + fields[3] + "`");
        rec.path = fields[4];
        if (fields[5] == "train")
            rec.split = Split::train;
        else if (fields[5] == "val")
            rec.split = Split::val;
        else if (fields[5] == "test")
            rec.split = Split::test;
        else
            rec.split = Split::unassigned;

        if (!seen_ids.insert(rec.utterance_id).second)
            throw Error(Errc::duplicate_id,
                        "row " + std::to_string(row) + ": duplicate utterance_id `" +
                            rec.utterance_id + "`");
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << kManifestHeader << "\n";
    for (const auto& r : manifest.records) {
        out << r.utterance_id << ',' << r.speaker_id << ',' << r.nonword_id << ','
            << label_name(r.label) << ',' << r.path << ',' << split_name(r.split) << "\n";
    }
    return out.str();
}

DatasetManifest read_manifest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_manifest(text);
}

void write_manifest_file(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    out << serialize_manifest(manifest);
}

namespace {

// Explicit Fisher-Yates so the shuffle is identical across standard libraries.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace

DatasetManifest split_dataset(const DatasetManifest& manifest, uint64_t seed,
                              bool speaker_disjoint) {
    for (const auto& r : manifest.records)
        if (r.split != Split::unassigned)
            throw Error(Errc::bad_config,
                        "record " + r.utterance_id + " already assigned to a split");
    if (manifest.records.empty()) throw Error(Errc::empty_split, "manifest has no records");

    DatasetManifest out = manifest;
    std::mt19937_64 rng(seed);

    auto assign = [](std::vector<Split>& slots) {
        const size_t n = slots.size();
        const size_t n_train = round_half_up(0.75 * static_cast<double>(n));
        const size_t n_test_all = n - n_train;
        const size_t n_val = round_half_up(0.25 * static_cast<double>(n_test_all));
        for (size_t i = 0; i < n; ++i) {
            if (i < n_train)
                slots[i] = Split::train;
            else if (i < n_train + n_val)
                slots[i] = Split::val;
            else
                slots[i] = Split::test;
        }
    };

    if (!speaker_disjoint) {
        std::vector<size_t> order(out.records.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        deterministic_shuffle(order, rng);
        std::vector<Split> slots(order.size());
        assign(slots);
        for (size_t i = 0; i < order.size(); ++i) out.records[order[i]].split = slots[i];
    } else {
        // Group by speaker in first-appearance order, shuffle the groups.
        std::vector<std::string> speakers;
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < out.records.size(); ++i) {
            auto& g = groups[out.records[i].speaker_id];
            if (g.empty()) speakers.push_back(out.records[i].speaker_id);
            g.push_back(i);
        }
        deterministic_shuffle(speakers, rng);
        std::vector<Split> slots(speakers.size());
        assign(slots);
        for (size_t s = 0; s < speakers.size(); ++s)
            for (size_t idx : groups[speakers[s]]) out.records[idx].split = slots[s];
    }

    for (Split s : {Split::train, Split::val, Split::test})
        if (out.in_split(s).empty())
            throw Error(Errc::empty_split, std::string("split `") + split_name(s) +
                                               "` received zero records");
    return out;
}

namespace {

ClassWeights weights_over(const std::vector<const UtteranceRecord*>& recs, const char* what) {
    size_t n_correct = 0, n_incorrect = 0;
    for (const auto* r : recs)
        (r->label == Label::correct ? n_correct : n_incorrect)++;
    if (n_correct == 0 || n_incorrect == 0)
        throw Error(Errc::single_class_split, std::string("only one label present in ") + what);
    const double n = static_cast<double>(recs.size());
    return {n / (2.0 * static_cast<double>(n_correct)),
            n / (2.0 * static_cast<double>(n_incorrect))};
}

} // namespace

ClassWeights class_weights(const DatasetManifest& manifest, Split split) {
    return weights_over(manifest.in_split(split), split_name(split));
}

ClassWeights class_weights(const DatasetManifest& manifest, Split split, int nonword_id) {
    return weights_over(manifest.in_split(split, nonword_id), split_name(split));
}

std::vector<uint8_t> encode_features(const features::FeatureMatrix& fm) {
    features::validate_feature_matrix(fm);
    std::vector<uint8_t> out;
    out.reserve(25 + 4 * fm.data.size());
    const char magic[4] = {'N', 'W', 'F', '1'};
    out.insert(out.end(), magic, magic + 4);
    append_u32(out, 1);
    out.push_back(static_cast<uint8_t>(fm.kind));
    append_u32(out, static_cast<uint32_t>(fm.frames));
    append_u32(out, static_cast<uint32_t>(fm.dims));
    uint64_t hop_bits;
    std::memcpy(&hop_bits, &fm.hop_seconds, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(hop_bits >> (8 * i) & 0xff));
    for (float v : fm.data) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        append_u32(out, u);
    }
    return out;
}

features::FeatureMatrix decode_features(const std::vector<uint8_t>& bytes,
                                        const std::string& utterance_id) {
    if (bytes.size() < 25 || std::memcmp(bytes.data(), "NWF1", 4) != 0)
        throw Error(Errc::bad_magic, "not an NWF1 file: " + utterance_id);
    const uint32_t version = read_u32(bytes.data() + 4);
    if (version != 1)
        throw Error(Errc::version_mismatch, "NWF1 version " + std::to_string(version));
    const uint8_t kind_byte = bytes[8];
    if (kind_byte > 3)
        throw Error(Errc::bad_magic, "unknown feature kind " + std::to_string(kind_byte));

    features::FeatureMatrix fm;
    fm.kind = static_cast<features::FeatureKind>(kind_byte);
    fm.frames = read_u32(bytes.data() + 9);
    fm.dims = read_u32(bytes.data() + 13);
    uint64_t hop_bits = 0;
    for (int i = 0; i < 8; ++i) hop_bits |= static_cast<uint64_t>(bytes[17 + i]) << (8 * i);
    std::memcpy(&fm.hop_seconds, &hop_bits, 8);
    fm.utterance_id = utterance_id;

    const size_t expected = 25 + 4 * fm.frames * fm.dims;
    if (bytes.size() != expected)
        throw Error(Errc::dim_mismatch, "payload is " + std::to_string(bytes.size()) +
                                            " bytes, header implies " + std::to_string(expected));

    fm.data.resize(fm.frames * fm.dims);
    for (size_t i = 0; i < fm.data.size(); ++i) {
        uint32_t u = read_u32(bytes.data() + 25 + 4 * i);
        std::memcpy(&fm.data[i], &u, 4);
    }
    features::validate_feature_matrix(fm);
    return fm;
}

features::FeatureMatrix ingest_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_features(bytes, path);
}

void write_features(const std::string& path, const features::FeatureMatrix& fm) {
    auto bytes = encode_features(fm);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + path);
}

} // namespace nonword::dataset
