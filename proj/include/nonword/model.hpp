#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonword/features.hpp"
#include "nonword/nn.hpp"

namespace nonword::model {

enum class ModelFamily { vgg_cnn, embedding_mlp };

const char* model_family_name(ModelFamily f);

struct ModelSpec {
    ModelFamily family = ModelFamily::vgg_cnn;
    std::vector<size_t> input_shape; // vgg: {1, frames, dims}; mlp: {dims}
    std::vector<nn::LayerSpec> layers;
    std::optional<int> nonword_id; // absent = word-independent
    features::FeatureKind feature_kind = features::FeatureKind::mel;
};

struct TrainingMeta {
    uint64_t seed = 0;
    int epochs_run = 0;
    double best_val_loss = 0.0;
    std::string finetune_mode = "none";
    int64_t adam_step_count = 0; // nonzero only in resumable mid-training saves
};

struct Model {
    ModelSpec spec;
    std::vector<nn::LayerParams<float>> params;
};

struct Checkpoint {
    Model model;
    TrainingMeta meta;
    // Optimizer moments, present only in resumable mid-training checkpoints.
    std::vector<nn::LayerParams<float>> adam_m, adam_v;

    bool has_optimizer_state() const { return !adam_m.empty(); }
};

/// Five conv blocks (filters 4,8,16,32,64; conv -> relu -> batchnorm ->
/// maxpool), then flatten, dense(64), relu, dropout(0.5), dense(1), sigmoid.
/// Both input dimensions must survive five floor-halvings, i.e. be >= 32.
ModelSpec build_vgg(size_t input_frames, size_t input_dims,
                    features::FeatureKind kind = features::FeatureKind::mel);

/// dense(192 -> 256) -> relu -> dropout(0.5) -> dense(256 -> 1) -> sigmoid.
ModelSpec build_embedding_mlp();

Model init_model(const ModelSpec& spec, uint64_t seed);

size_t parameter_count(const Model& m);

/// Named parameter blobs in checkpoint order: `<layer name>.<field>`.
std::vector<std::pair<std::string, const nn::Tensor*>> named_blobs(const Model& m);

/// Inference score in (0,1). Frame-level features are padded or truncated to
/// the model's input length; utterance embeddings are fed directly.
float predict(const Model& m, const features::FeatureMatrix& fm);

/// Batched inference for prepared input tensors.
nn::Tensor predict_batch(const Model& m, const nn::Tensor& input);

/// Checkpoint file: magic "NWCK", u32 version, u32 spec length, JSON spec,
/// then per-parameter blobs (u32 name length, name, u32 byte length, payload,
/// CRC32 of the payload).
std::vector<uint8_t> save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::vector<uint8_t>& bytes);

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::string& path);

uint32_t crc32(const uint8_t* data, size_t len);

} // namespace nonword::model
