#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nonword/features.hpp"

namespace nonword::dataset {

enum class Label { correct, incorrect };
enum class Split { train, val, test, unassigned };

const char* label_name(Label l);
const char* split_name(Split s);

struct UtteranceRecord {
    std::string utterance_id;
    std::string speaker_id;
    int nonword_id = 0; // 1..7
    Label label = Label::correct;
    std::string path; // audio file or feature file, depending on pipeline stage
    Split split = Split::unassigned;
};

struct DatasetManifest {
    std::vector<UtteranceRecord> records;
    Label positive_label = Label::incorrect;

    std::vector<const UtteranceRecord*> in_split(Split s) const;
    std::vector<const UtteranceRecord*> in_split(Split s, int nonword_id) const;
};

struct ClassWeights {
    double w_correct = 1.0;
    double w_incorrect = 1.0;

    double of(Label l) const { return l == Label::correct ? w_correct : w_incorrect; }
};

inline constexpr const char* kManifestHeader =
    "utterance_id,speaker_id,nonword_id,label,path,split";

/// Parse the manifest CSV. Unknown split strings map to unassigned.
DatasetManifest parse_manifest(const std::string& text);
std::string serialize_manifest(const DatasetManifest& manifest);

DatasetManifest read_manifest_file(const std::string& path);
void write_manifest_file(const std::string& path, const DatasetManifest& manifest);

/// Deterministic 75/25 train/test split with the first quarter of test moved
/// to val (round-half-up at both boundaries). Records are shuffled by a
/// Fisher-Yates pass over mt19937_64(seed). speaker_disjoint applies the same
/// ratios to shuffled speaker groups, utterances following their speaker.
DatasetManifest split_dataset(const DatasetManifest& manifest, uint64_t seed,
                              bool speaker_disjoint = false);

/// Balanced inverse frequency: w_c = N_total / (2 * N_c) over the given split.
ClassWeights class_weights(const DatasetManifest& manifest, Split split = Split::train);
ClassWeights class_weights(const DatasetManifest& manifest, Split split, int nonword_id);

/// NWF1 binary feature file (little-endian): magic "NWF1", u32 version=1,
/// u8 kind, u32 frames, u32 dims, f64 hop_seconds, then frames*dims float32
/// row-major. Total length must be 25 + 4*frames*dims bytes.
features::FeatureMatrix ingest_features(const std::string& path);
features::FeatureMatrix decode_features(const std::vector<uint8_t>& bytes,
                                        const std::string& utterance_id = "");
std::vector<uint8_t> encode_features(const features::FeatureMatrix& fm);
void write_features(const std::string& path, const features::FeatureMatrix& fm);

} // namespace nonword::dataset
