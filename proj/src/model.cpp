#include "nonword/model.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "nonword/error.hpp"

namespace nonword::model {

using nlohmann::json;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

constexpr uint32_t kCheckpointVersion = 1;

const char* kTrainableFields[] = {"kernel", "bias", "weight", "gamma", "beta"};
const char* kStateFields[] = {"running_mean", "running_var"};

nn::Tensor* field_of(nn::LayerParams<float>& p, const std::string& field) {
    if (field == "kernel") return &p.kernel;
    if (field == "bias") return &p.bias;
    if (field == "weight") return &p.weight;
    if (field == "gamma") return &p.gamma;
    if (field == "beta") return &p.beta;
    if (field == "running_mean") return &p.running_mean;
    if (field == "running_var") return &p.running_var;
    return nullptr;
}

std::vector<size_t> field_shape(const LayerSpec& spec, const std::string& field) {
    switch (spec.kind) {
        case LayerKind::conv3x3:
            if (field == "kernel") return {spec.out, spec.in, 3, 3};
            if (field == "bias") return {spec.out};
            break;
        case LayerKind::dense:
            if (field == "weight") return {spec.out, spec.in};
            if (field == "bias") return {spec.out};
            break;
        case LayerKind::batchnorm:
            if (field == "gamma" || field == "beta" || field == "running_mean" ||
                field == "running_var")
                return {spec.in};
            break;
        default:
            break;
    }
    return {};
}

std::vector<std::pair<std::string, std::string>> blob_names(const ModelSpec& spec) {
    std::vector<std::pair<std::string, std::string>> out; // (layer name, field)
    for (const auto& l : spec.layers) {
        for (const char* f : kTrainableFields)
            if (!field_shape(l, f).empty()) out.emplace_back(l.name, f);
        for (const char* f : kStateFields)
            if (!field_shape(l, f).empty()) out.emplace_back(l.name, f);
    }
    return out;
}

LayerKind layer_kind_from(const std::string& s) {
    for (LayerKind k : {LayerKind::conv3x3, LayerKind::relu, LayerKind::batchnorm,
                        LayerKind::maxpool2x2, LayerKind::flatten, LayerKind::dense,
                        LayerKind::dropout, LayerKind::sigmoid})
        if (s == nn::layer_kind_name(k)) return k;
    throw Error(Errc::corrupt_blob, "unknown layer kind `" + s + "`");
}

features::FeatureKind feature_kind_from(const std::string& s) {
    using features::FeatureKind;
    for (FeatureKind k : {FeatureKind::mel, FeatureKind::utterance_embedding,
                          FeatureKind::frame_embedding, FeatureKind::senone_posterior})
        if (s == features::feature_kind_name(k)) return k;
    throw Error(Errc::corrupt_blob, "unknown feature kind `" + s + "`");
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8 & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 16 & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 24 & 0xff));
}

uint32_t read_u32_at(const std::vector<uint8_t>& b, size_t off) {
    if (off + 4 > b.size()) throw Error(Errc::corrupt_blob, "truncated checkpoint");
    return static_cast<uint32_t>(b[off]) | static_cast<uint32_t>(b[off + 1]) << 8 |
           static_cast<uint32_t>(b[off + 2]) << 16 | static_cast<uint32_t>(b[off + 3]) << 24;
}

} // namespace

uint32_t crc32(const uint8_t* data, size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = 0xffffffffu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

const char* model_family_name(ModelFamily f) {
    return f == ModelFamily::vgg_cnn ? "vgg_cnn" : "embedding_mlp";
}

ModelSpec build_vgg(size_t input_frames, size_t input_dims, features::FeatureKind kind) {
    if (input_frames < 32 || input_dims < 32)
        throw Error(Errc::input_too_small,
                    "input " + std::to_string(input_frames) + "x" + std::to_string(input_dims) +
                        "; both dimensions must be >= 32 to survive five poolings");

    ModelSpec spec;
    spec.family = ModelFamily::vgg_cnn;
    spec.feature_kind = kind;
    spec.input_shape = {1, input_frames, input_dims};

    const size_t filters[5] = {4, 8, 16, 32, 64};
    size_t channels = 1, h = input_frames, w = input_dims;
    for (int b = 0; b < 5; ++b) {
        const std::string idx = std::to_string(b + 1);
        spec.layers.push_back({LayerKind::conv3x3, "conv" + idx, channels, filters[b]});
        spec.layers.push_back({LayerKind::relu, "relu" + idx});
        spec.layers.push_back({LayerKind::batchnorm, "bn" + idx, filters[b], filters[b]});
        spec.layers.push_back({LayerKind::maxpool2x2, "pool" + idx});
        channels = filters[b];
        h /= 2;
        w /= 2;
    }
    const size_t flat = channels * h * w;
    spec.layers.push_back({LayerKind::flatten, "flatten"});
    spec.layers.push_back({LayerKind::dense, "fc1", flat, 64});
    spec.layers.push_back({LayerKind::relu, "relu_fc1"});
    spec.layers.push_back({LayerKind::dropout, "drop1", 0, 0, 0.5});
    spec.layers.push_back({LayerKind::dense, "fc_out", 64, 1});
    spec.layers.push_back({LayerKind::sigmoid, "sigmoid_out"});
    return spec;
}

ModelSpec build_embedding_mlp() {
    ModelSpec spec;
    spec.family = ModelFamily::embedding_mlp;
    spec.feature_kind = features::FeatureKind::utterance_embedding;
    spec.input_shape = {192};
    spec.layers.push_back({LayerKind::dense, "fc1", 192, 256});
    spec.layers.push_back({LayerKind::relu, "relu1"});
    spec.layers.push_back({LayerKind::dropout, "drop1", 0, 0, 0.5});
    spec.layers.push_back({LayerKind::dense, "fc_out", 256, 1});
    spec.layers.push_back({LayerKind::sigmoid, "sigmoid_out"});
    return spec;
}

Model init_model(const ModelSpec& spec, uint64_t seed) {
    return {spec, nn::init_params<float>(spec.layers, seed)};
}

size_t parameter_count(const Model& m) {
    size_t n = 0;
    for (const auto& [name, t] : named_blobs(m)) {
        // Running statistics are state, not parameters.
        if (name.ends_with(".running_mean") || name.ends_with(".running_var")) continue;
        n += t->numel();
    }
    return n;
}

std::vector<std::pair<std::string, const nn::Tensor*>> named_blobs(const Model& m) {
    std::vector<std::pair<std::string, const nn::Tensor*>> out;
    for (size_t i = 0; i < m.spec.layers.size(); ++i) {
        const auto& l = m.spec.layers[i];
        auto& p = const_cast<nn::LayerParams<float>&>(m.params[i]);
        for (const char* f : kTrainableFields)
            if (!field_shape(l, f).empty()) out.emplace_back(l.name + "." + f, field_of(p, f));
        for (const char* f : kStateFields)
            if (!field_shape(l, f).empty()) out.emplace_back(l.name + "." + f, field_of(p, f));
    }
    return out;
}

nn::Tensor predict_batch(const Model& m, const nn::Tensor& input) {
    nn::ForwardOptions opts;
    opts.training = false;
    return nn::forward(m.spec.layers, m.params, input, opts).output;
}

float predict(const Model& m, const features::FeatureMatrix& fm) {
    if (fm.kind != m.spec.feature_kind)
        throw Error(Errc::dim_mismatch,
                    std::string("model expects ") + features::feature_kind_name(m.spec.feature_kind) +
                        " features, got " + features::feature_kind_name(fm.kind));

    nn::Tensor input;
    if (m.spec.family == ModelFamily::vgg_cnn) {
        if (fm.dims != m.spec.input_shape[2])
            throw Error(Errc::dim_mismatch, "feature dims " + std::to_string(fm.dims) +
                                                " != model input dims " +
                                                std::to_string(m.spec.input_shape[2]));
        auto padded = features::pad_or_truncate(fm, m.spec.input_shape[1]);
        input = nn::Tensor({1, 1, m.spec.input_shape[1], m.spec.input_shape[2]});
        std::copy(padded.features.data.begin(), padded.features.data.end(), input.data.begin());
    } else {
        if (fm.frames != 1 || fm.dims != m.spec.input_shape[0])
            throw Error(Errc::dim_mismatch, "embedding must be 1x" +
                                                std::to_string(m.spec.input_shape[0]));
        input = nn::Tensor({1, fm.dims});
        std::copy(fm.data.begin(), fm.data.end(), input.data.begin());
    }
    return predict_batch(m, input).data[0];
}

namespace {

json spec_to_json(const Checkpoint& ckpt) {
    const ModelSpec& spec = ckpt.model.spec;
    json j;
    j["family"] = model_family_name(spec.family);
    j["input_shape"] = spec.input_shape;
    if (spec.nonword_id)
        j["nonword_id"] = *spec.nonword_id;
    else
        j["nonword_id"] = nullptr;
    j["feature_kind"] = features::feature_kind_name(spec.feature_kind);
    json layers = json::array();
    for (const auto& l : spec.layers) {
        json jl;
        jl["kind"] = nn::layer_kind_name(l.kind);
        jl["name"] = l.name;
        jl["in"] = l.in;
        jl["out"] = l.out;
        jl["rate"] = l.rate;
        jl["momentum"] = l.momentum;
        jl["epsilon"] = l.epsilon;
        layers.push_back(jl);
    }
    j["layers"] = layers;
    j["meta"] = {{"seed", ckpt.meta.seed},
                 {"epochs_run", ckpt.meta.epochs_run},
                 {"best_val_loss", ckpt.meta.best_val_loss},
                 {"finetune_mode", ckpt.meta.finetune_mode},
                 {"adam_step_count", ckpt.meta.adam_step_count}};
    return j;
}

void spec_from_json(const json& j, Checkpoint& ckpt) {
    ModelSpec& spec = ckpt.model.spec;
    const std::string family = j.at("family").get<std::string>();
    if (family == "vgg_cnn")
        spec.family = ModelFamily::vgg_cnn;
    else if (family == "embedding_mlp")
        spec.family = ModelFamily::embedding_mlp;
    else
        throw Error(Errc::corrupt_blob, "unknown model family `" + family + "`");
    spec.input_shape = j.at("input_shape").get<std::vector<size_t>>();
    if (!j.at("nonword_id").is_null()) spec.nonword_id = j.at("nonword_id").get<int>();
    spec.feature_kind = feature_kind_from(j.at("feature_kind").get<std::string>());
    for (const auto& jl : j.at("layers")) {
        LayerSpec l;
        l.kind = layer_kind_from(jl.at("kind").get<std::string>());
        l.name = jl.at("name").get<std::string>();
        l.in = jl.at("in").get<size_t>();
        l.out = jl.at("out").get<size_t>();
        l.rate = jl.at("rate").get<double>();
        l.momentum = jl.at("momentum").get<double>();
        l.epsilon = jl.at("epsilon").get<double>();
        spec.layers.push_back(std::move(l));
    }
    const auto& m = j.at("meta");
    ckpt.meta.seed = m.at("seed").get<uint64_t>();
    ckpt.meta.epochs_run = m.at("epochs_run").get<int>();
    ckpt.meta.best_val_loss = m.at("best_val_loss").get<double>();
    ckpt.meta.finetune_mode = m.at("finetune_mode").get<std::string>();
    ckpt.meta.adam_step_count = m.at("adam_step_count").get<int64_t>();
}

void append_blob(std::vector<uint8_t>& out, const std::string& name, const nn::Tensor& t) {
    append_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const size_t bytes = t.numel() * 4;
    append_u32(out, static_cast<uint32_t>(bytes));
    const size_t payload_off = out.size();
    out.resize(out.size() + bytes);
    std::memcpy(out.data() + payload_off, t.data.data(), bytes);
    append_u32(out, crc32(out.data() + payload_off, bytes));
}

} // namespace

std::vector<uint8_t> save_checkpoint(const Checkpoint& ckpt) {
    const std::string spec_json = spec_to_json(ckpt).dump();

    std::vector<uint8_t> out;
    out.insert(out.end(), {'N', 'W', 'C', 'K'});
    append_u32(out, kCheckpointVersion);
    append_u32(out, static_cast<uint32_t>(spec_json.size()));
    out.insert(out.end(), spec_json.begin(), spec_json.end());

    for (const auto& [name, t] : named_blobs(ckpt.model)) append_blob(out, name, *t);

    if (ckpt.has_optimizer_state()) {
        const auto& layers = ckpt.model.spec.layers;
        for (size_t i = 0; i < layers.size(); ++i) {
            for (const char* f : kTrainableFields) {
                if (field_shape(layers[i], f).empty()) continue;
                auto& pm = const_cast<nn::LayerParams<float>&>(ckpt.adam_m[i]);
                auto& pv = const_cast<nn::LayerParams<float>&>(ckpt.adam_v[i]);
                append_blob(out, "adam.m." + layers[i].name + "." + f, *field_of(pm, f));
                append_blob(out, "adam.v." + layers[i].name + "." + f, *field_of(pv, f));
            }
        }
    }
    return out;
}

Checkpoint load_checkpoint(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 12) throw Error(Errc::corrupt_blob, "checkpoint shorter than header");
    if (std::memcmp(bytes.data(), "NWCK", 4) != 0)
        throw Error(Errc::corrupt_blob, "not an NWCK checkpoint (bad magic)");
    const uint32_t version = read_u32_at(bytes, 4);
    if (version != kCheckpointVersion)
        throw Error(Errc::version_mismatch, "checkpoint version " + std::to_string(version));
    const uint32_t spec_len = read_u32_at(bytes, 8);
    if (12 + static_cast<size_t>(spec_len) > bytes.size())
        throw Error(Errc::corrupt_blob, "spec overruns file");

    Checkpoint ckpt;
    try {
        spec_from_json(json::parse(bytes.begin() + 12, bytes.begin() + 12 + spec_len), ckpt);
    } catch (const json::exception& e) {
        throw Error(Errc::corrupt_blob, std::string("bad spec JSON: ") + e.what());
    }

    const auto& layers = ckpt.model.spec.layers;
    ckpt.model.params.resize(layers.size());

    // Layer-name lookup for routing blobs.
    auto layer_index = [&layers](const std::string& name) -> size_t {
        for (size_t i = 0; i < layers.size(); ++i)
            if (layers[i].name == name) return i;
        throw Error(Errc::corrupt_blob, "blob for unknown layer `" + name + "`");
    };

    size_t off = 12 + spec_len;
    size_t model_blobs = 0;
    while (off < bytes.size()) {
        const uint32_t name_len = read_u32_at(bytes, off);
        off += 4;
        if (off + name_len > bytes.size()) throw Error(Errc::corrupt_blob, "truncated blob name");
        std::string name(bytes.begin() + off, bytes.begin() + off + name_len);
        off += name_len;
        const uint32_t byte_len = read_u32_at(bytes, off);
        off += 4;
        if (off + byte_len + 4 > bytes.size())
            throw Error(Errc::corrupt_blob, "truncated payload for `" + name + "`");
        const uint8_t* payload = bytes.data() + off;
        off += byte_len;
        const uint32_t stored_crc = read_u32_at(bytes, off);
        off += 4;
        if (crc32(payload, byte_len) != stored_crc)
            throw Error(Errc::corrupt_blob, "checksum mismatch for `" + name + "`");

        std::string target = name;
        std::vector<nn::LayerParams<float>>* dest = &ckpt.model.params;
        if (name.starts_with("adam.m.") || name.starts_with("adam.v.")) {
            if (ckpt.adam_m.empty()) {
                ckpt.adam_m.resize(layers.size());
                ckpt.adam_v.resize(layers.size());
            }
            dest = name[5] == 'm' ? &ckpt.adam_m : &ckpt.adam_v;
            target = name.substr(7);
        } else {
            ++model_blobs;
        }

        const size_t dot = target.rfind('.');
        if (dot == std::string::npos) throw Error(Errc::corrupt_blob, "malformed blob name `" + name + "`");
        const size_t li = layer_index(target.substr(0, dot));
        const std::string field = target.substr(dot + 1);
        auto shape = field_shape(layers[li], field);
        if (shape.empty())
            throw Error(Errc::corrupt_blob, "unexpected blob `" + name + "`");
        nn::Tensor* t = field_of((*dest)[li], field);
        nn::Tensor tmp(shape);
        if (tmp.numel() * 4 != byte_len)
            throw Error(Errc::corrupt_blob, "blob `" + name + "` is " + std::to_string(byte_len) +
                                                " bytes, expected " +
                                                std::to_string(tmp.numel() * 4));
        std::memcpy(tmp.data.data(), payload, byte_len);
        *t = std::move(tmp);
    }

    const size_t expected = blob_names(ckpt.model.spec).size();
    if (model_blobs != expected)
        throw Error(Errc::corrupt_blob, "checkpoint has " + std::to_string(model_blobs) +
                                            " parameter blobs, spec requires " +
                                            std::to_string(expected));
    return ckpt;
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
    auto bytes = save_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "short write to " + path);
}

Checkpoint read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

} // namespace nonword::model
