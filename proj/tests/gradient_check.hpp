#pragma once

// Central finite-difference oracle for the exact backward pass. Lives in test
// code only; the implementation under test never sees it.

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "nonword/nn.hpp"

namespace gradcheck {

using nonword::nn::LayerParams;
using nonword::nn::LayerSpec;
using nonword::nn::TensorT;

inline double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

inline double uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform magnitude in [margin, 1] with random sign; the margin keeps
/// ReLU kinks and pooling ties away from the finite-difference step.
inline void fill_random(TensorT<double>& t, std::mt19937_64& rng, double margin = 1e-3) {
    for (auto& v : t.data) {
        const double mag = margin + (1.0 - margin) * uniform(rng);
        v = uniform(rng) < 0.5 ? -mag : mag;
    }
}

struct Oracle {
    std::function<double(const TensorT<double>&)> loss;
    std::function<TensorT<double>(const TensorT<double>&)> loss_grad;
};

/// Random-projection loss: sum(output * R).
inline Oracle projection_oracle(const std::vector<size_t>& out_shape, std::mt19937_64& rng) {
    auto proj = std::make_shared<TensorT<double>>(out_shape);
    fill_random(*proj, rng);
    Oracle o;
    o.loss = [proj](const TensorT<double>& out) {
        double acc = 0.0;
        for (size_t i = 0; i < out.numel(); ++i) acc += out.data[i] * proj->data[i];
        return acc;
    };
    o.loss_grad = [proj](const TensorT<double>&) { return *proj; };
    return o;
}

struct CheckResult {
    double max_rel_err = 0.0;
    size_t comparisons = 0;
};

/// Compare the analytic gradients of every trainable parameter and of the
/// input against central differences (step h) of the oracle loss.
inline CheckResult check(const std::vector<LayerSpec>& layers,
                         std::vector<LayerParams<double>> params, TensorT<double> input,
                         uint64_t fwd_seed, const Oracle& oracle, double h = 1e-5) {
    using nonword::nn::backward;
    using nonword::nn::forward;
    using nonword::nn::ForwardOptions;

    ForwardOptions opts;
    opts.training = true;
    opts.rng_seed = fwd_seed; // identical dropout masks on every evaluation

    auto eval_loss = [&] {
        return oracle.loss(forward(layers, params, input, opts).output);
    };

    auto fwd = forward(layers, params, input, opts);
    const auto grads = backward(layers, params, fwd, oracle.loss_grad(fwd.output));

    CheckResult res;
    auto compare = [&](TensorT<double>& theta, const TensorT<double>& analytic) {
        for (size_t i = 0; i < theta.numel(); ++i) {
            const double saved = theta.data[i];
            theta.data[i] = saved + h;
            const double up = eval_loss();
            theta.data[i] = saved - h;
            const double down = eval_loss();
            theta.data[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic.data[i], numeric));
            ++res.comparisons;
        }
    };

    for (size_t li = 0; li < layers.size(); ++li) {
        auto& p = params[li];
        const auto& g = grads.layers[li];
        if (!p.kernel.empty()) compare(p.kernel, g.kernel);
        if (!p.bias.empty()) compare(p.bias, g.bias);
        if (!p.weight.empty()) compare(p.weight, g.weight);
        if (!p.gamma.empty()) compare(p.gamma, g.gamma);
        if (!p.beta.empty()) compare(p.beta, g.beta);
    }
    compare(input, grads.input);
    return res;
}

struct LayerCase {
    std::string name;
    std::vector<LayerSpec> layers;
    std::vector<size_t> input_shape;
};

inline std::vector<LayerCase> layer_cases() {
    using nonword::nn::LayerKind;
    return {
        {"conv3x3", {{LayerKind::conv3x3, "conv", 2, 3}}, {2, 2, 5, 6}},
        {"relu", {{LayerKind::relu, "relu"}}, {2, 3, 4, 4}},
        {"batchnorm4d", {{LayerKind::batchnorm, "bn", 3, 3}}, {4, 3, 3, 3}},
        {"batchnorm2d", {{LayerKind::batchnorm, "bn", 5, 5}}, {6, 5}},
        {"maxpool2x2", {{LayerKind::maxpool2x2, "pool"}}, {2, 2, 6, 6}},
        {"flatten", {{LayerKind::flatten, "flat"}}, {2, 3, 2, 2}},
        {"dense", {{LayerKind::dense, "fc", 7, 4}}, {3, 7}},
        {"dropout", {{LayerKind::dropout, "drop", 0, 0, 0.4}}, {2, 10}},
        {"sigmoid", {{LayerKind::sigmoid, "sig"}}, {3, 5}},
    };
}

/// One randomized case for a layer configuration; returns the max relative error.
inline CheckResult run_case(const LayerCase& lc, uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto params = nonword::nn::init_params<double>(lc.layers, rng());

    // randomize affine batchnorm parameters away from the (1, 0) defaults
    for (size_t li = 0; li < lc.layers.size(); ++li) {
        if (lc.layers[li].kind == nonword::nn::LayerKind::batchnorm) {
            fill_random(params[li].gamma, rng);
            fill_random(params[li].beta, rng);
        }
    }

    TensorT<double> input(lc.input_shape);
    fill_random(input, rng);

    auto probe = nonword::nn::forward(lc.layers, params, input,
                                      {.training = true, .rng_seed = seed});
    const auto oracle = [&] {
        std::mt19937_64 proj_rng(seed ^ 0xabcdef);
        return projection_oracle(probe.output.shape, proj_rng);
    }();
    return check(lc.layers, std::move(params), std::move(input), seed, oracle);
}

} // namespace gradcheck
