#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

namespace nonword::nn {

template <typename T>
struct TensorT {
    std::vector<size_t> shape;
    std::vector<T> data; // row-major

    TensorT() = default;
    explicit TensorT(std::vector<size_t> s) : shape(std::move(s)) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        data.assign(n, T(0));
    }

    size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

using Tensor = TensorT<float>;

std::string shape_to_string(const std::vector<size_t>& shape);

/// Deterministic seed mixing (splitmix64 over the combined words).
uint64_t mix_seed(uint64_t a, uint64_t b);

enum class LayerKind : uint8_t {
    conv3x3,   // stride 1, same padding
    relu,
    batchnorm,
    maxpool2x2, // stride 2, floor
    flatten,
    dense,
    dropout,
    sigmoid,
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind;
    std::string name;
    size_t in = 0;  // conv in-channels, dense in-units, batchnorm channels
    size_t out = 0; // conv out-channels, dense out-units
    double rate = 0.5;     // dropout keep-complement
    double momentum = 0.9; // batchnorm running-stat decay
    double epsilon = 1e-5; // batchnorm
};

/// Parameter storage for one layer; unused fields stay empty.
/// conv: kernel {out,in,3,3} + bias {out}; dense: weight {out,in} + bias {out};
/// batchnorm: gamma/beta plus running_mean/running_var (state, not trained).
template <typename T>
struct LayerParams {
    TensorT<T> kernel, bias, weight, gamma, beta, running_mean, running_var;
};

template <typename T>
std::vector<LayerParams<T>> init_params(const std::vector<LayerSpec>& layers, uint64_t seed);

template <typename T>
struct LayerCache {
    TensorT<T> input;
    TensorT<T> output;          // sigmoid y
    TensorT<T> mask;            // dropout
    std::vector<size_t> argmax; // maxpool
    std::vector<T> mean, var, inv_std; // batchnorm stats used by this forward
    bool batch_stats = false;   // batchnorm normalized with batch statistics
};

template <typename T>
struct ForwardResult {
    TensorT<T> output;
    std::vector<LayerCache<T>> caches;
    std::vector<LayerKind> kinds;
    bool training = false;
};

struct ForwardOptions {
    bool training = false;
    uint64_t rng_seed = 0;
    // Frozen layers never update state; a frozen batchnorm normalizes with its
    // running statistics even in training mode.
    const std::unordered_set<std::string>* frozen = nullptr;
};

template <typename T>
ForwardResult<T> forward(const std::vector<LayerSpec>& layers,
                         const std::vector<LayerParams<T>>& params, const TensorT<T>& input,
                         const ForwardOptions& opts = {});

/// Fold the batch statistics captured during a training forward into the
/// running statistics of every unfrozen batchnorm layer.
template <typename T>
void update_running_stats(const std::vector<LayerSpec>& layers,
                          std::vector<LayerParams<T>>& params, const ForwardResult<T>& fwd,
                          const std::unordered_set<std::string>* frozen = nullptr);

template <typename T>
struct Gradients {
    std::vector<LayerParams<T>> layers; // same field layout as parameters
    TensorT<T> input;
};

template <typename T>
Gradients<T> backward(const std::vector<LayerSpec>& layers,
                      const std::vector<LayerParams<T>>& params, const ForwardResult<T>& fwd,
                      const TensorT<T>& loss_grad);

/// Mean over the batch of -w(y) * [y log p + (1-y) log(1-p)], with predictions
/// clipped to [1e-7, 1-1e-7]. Targets are 0/1; w1/w0 weight the two classes.
template <typename T>
double weighted_bce(const TensorT<T>& pred, const std::vector<int>& targets, double w1,
                    double w0);

template <typename T>
TensorT<T> weighted_bce_grad(const TensorT<T>& pred, const std::vector<int>& targets, double w1,
                             double w0);

template <typename T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t step_count = 0;
    std::vector<TensorT<T>> m, v; // aligned with the trainable parameter list
};

template <typename T>
AdamState<T> make_adam(double lr, const std::vector<TensorT<T>*>& params);

/// Standard bias-corrected Adam update over the aligned parameter list.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<TensorT<T>*>& params,
               const std::vector<const TensorT<T>*>& grads);

} // namespace nonword::nn
