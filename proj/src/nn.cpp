#include "nonword/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "nonword/error.hpp"

namespace nonword::nn {

std::string shape_to_string(const std::vector<size_t>& shape) {
    std::ostringstream out;
    out << '{';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << '}';
    return out.str();
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv3x3: return "conv3x3";
        case LayerKind::relu: return "relu";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::dropout: return "dropout";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

namespace {

[[noreturn]] void shape_error(size_t layer_index, const LayerSpec& spec,
                              const std::string& expected, const std::vector<size_t>& actual) {
    throw Error(Errc::shape_mismatch, "layer " + std::to_string(layer_index) + " (" + spec.name +
                                          ", " + layer_kind_name(spec.kind) + "): expected " +
                                          expected + ", got " + shape_to_string(actual));
}

// Uniform in [0,1) with 53 random bits; identical across platforms.
double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool is_frozen(const ForwardOptions& opts, const std::string& name) {
    return opts.frozen != nullptr && opts.frozen->count(name) > 0;
}

// View any activation tensor as (batch, channels, spatial).
struct NcsView {
    size_t n, c, s;
};

template <typename T>
NcsView ncs_view(const TensorT<T>& x, size_t channels, size_t layer_index, const LayerSpec& spec) {
    if (x.shape.size() == 4 && x.shape[1] == channels)
        return {x.shape[0], x.shape[1], x.shape[2] * x.shape[3]};
    if (x.shape.size() == 2 && x.shape[1] == channels) return {x.shape[0], x.shape[1], 1};
    shape_error(layer_index, spec, "{N," + std::to_string(channels) + ",...}", x.shape);
}

} // namespace

template <typename T>
std::vector<LayerParams<T>> init_params(const std::vector<LayerSpec>& layers, uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto he_uniform = [&rng](TensorT<T>& t, size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : t.data)
            v = static_cast<T>((2.0 * next_uniform(rng) - 1.0) * limit);
    };

    std::vector<LayerParams<T>> params(layers.size());
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& spec = layers[i];
        auto& p = params[i];
        switch (spec.kind) {
            case LayerKind::conv3x3:
                p.kernel = TensorT<T>({spec.out, spec.in, 3, 3});
                p.bias = TensorT<T>({spec.out});
                he_uniform(p.kernel, spec.in * 9);
                break;
            case LayerKind::dense:
                p.weight = TensorT<T>({spec.out, spec.in});
                p.bias = TensorT<T>({spec.out});
                he_uniform(p.weight, spec.in);
                break;
            case LayerKind::batchnorm:
                p.gamma = TensorT<T>({spec.in});
                p.beta = TensorT<T>({spec.in});
                p.running_mean = TensorT<T>({spec.in});
                p.running_var = TensorT<T>({spec.in});
                std::fill(p.gamma.data.begin(), p.gamma.data.end(), T(1));
                std::fill(p.running_var.data.begin(), p.running_var.data.end(), T(1));
                break;
            default:
                break;
        }
    }
    return params;
}

namespace {

template <typename T>
TensorT<T> conv3x3_forward(const TensorT<T>& x, const LayerParams<T>& p, const LayerSpec& spec,
                           size_t li) {
    if (x.shape.size() != 4 || x.shape[1] != spec.in)
        shape_error(li, spec, "{N," + std::to_string(spec.in) + ",H,W}", x.shape);
    const size_t n = x.shape[0], ci_n = spec.in, h = x.shape[2], w = x.shape[3];
    const size_t co_n = spec.out;

    TensorT<T> y({n, co_n, h, w});
    for (size_t b = 0; b < n; ++b) {
        for (size_t co = 0; co < co_n; ++co) {
            T* out = y.data.data() + ((b * co_n + co) * h) * w;
            const T bias = p.bias.data[co];
            for (size_t i = 0; i < h * w; ++i) out[i] = bias;
            for (size_t ci = 0; ci < ci_n; ++ci) {
                const T* in = x.data.data() + ((b * ci_n + ci) * h) * w;
                const T* k = p.kernel.data.data() + (co * ci_n + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dy = ky - 1;
                    const size_t y0 = dy < 0 ? 1 : 0;
                    const size_t y1 = dy > 0 ? h - 1 : h;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dx = kx - 1;
                        const size_t x0 = dx < 0 ? 1 : 0;
                        const size_t x1 = dx > 0 ? w - 1 : w;
                        const T kv = k[ky * 3 + kx];
                        for (size_t yy = y0; yy < y1; ++yy) {
                            T* orow = out + yy * w;
                            const T* irow = in + (yy + dy) * w + dx;
                            for (size_t xx = x0; xx < x1; ++xx) orow[xx] += kv * irow[xx];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv3x3_backward(const TensorT<T>& x, const TensorT<T>& g, const LayerParams<T>& p,
                      const LayerSpec& spec, LayerParams<T>& grad, TensorT<T>& gx) {
    const size_t n = x.shape[0], ci_n = spec.in, h = x.shape[2], w = x.shape[3];
    const size_t co_n = spec.out;

    grad.kernel = TensorT<T>({co_n, ci_n, 3, 3});
    grad.bias = TensorT<T>({co_n});
    gx = TensorT<T>(x.shape);

    for (size_t b = 0; b < n; ++b) {
        for (size_t co = 0; co < co_n; ++co) {
            const T* gout = g.data.data() + ((b * co_n + co) * h) * w;
            T bias_acc = 0;
            for (size_t i = 0; i < h * w; ++i) bias_acc += gout[i];
            grad.bias.data[co] += bias_acc;

            for (size_t ci = 0; ci < ci_n; ++ci) {
                const T* in = x.data.data() + ((b * ci_n + ci) * h) * w;
                T* gin = gx.data.data() + ((b * ci_n + ci) * h) * w;
                const T* k = p.kernel.data.data() + (co * ci_n + ci) * 9;
                T* gk = grad.kernel.data.data() + (co * ci_n + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dy = ky - 1;
                    const size_t y0 = dy < 0 ? 1 : 0;
                    const size_t y1 = dy > 0 ? h - 1 : h;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dx = kx - 1;
                        const size_t x0 = dx < 0 ? 1 : 0;
                        const size_t x1 = dx > 0 ? w - 1 : w;
                        const T kv = k[ky * 3 + kx];
                        T kacc = 0;
                        for (size_t yy = y0; yy < y1; ++yy) {
                            const T* grow = gout + yy * w;
                            const T* irow = in + (yy + dy) * w + dx;
                            T* girow = gin + (yy + dy) * w + dx;
                            for (size_t xx = x0; xx < x1; ++xx) {
                                kacc += grow[xx] * irow[xx];
                                girow[xx] += grow[xx] * kv;
                            }
                        }
                        gk[ky * 3 + kx] += kacc;
                    }
                }
            }
        }
    }
}

template <typename T>
TensorT<T> maxpool_forward(const TensorT<T>& x, std::vector<size_t>& argmax, const LayerSpec& spec,
                           size_t li) {
    if (x.shape.size() != 4) shape_error(li, spec, "{N,C,H,W}", x.shape);
    const size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const size_t oh = h / 2, ow = w / 2;
    if (oh == 0 || ow == 0) shape_error(li, spec, "spatial dims >= 2", x.shape);

    TensorT<T> y({n, c, oh, ow});
    argmax.assign(y.numel(), 0);
    size_t oi = 0;
    for (size_t b = 0; b < n; ++b) {
        for (size_t ch = 0; ch < c; ++ch) {
            const T* in = x.data.data() + ((b * c + ch) * h) * w;
            const size_t base = ((b * c + ch) * h) * w;
            for (size_t yy = 0; yy < oh; ++yy) {
                for (size_t xx = 0; xx < ow; ++xx, ++oi) {
                    size_t best = (2 * yy) * w + 2 * xx;
                    T bv = in[best];
                    const size_t cands[3] = {(2 * yy) * w + 2 * xx + 1, (2 * yy + 1) * w + 2 * xx,
                                             (2 * yy + 1) * w + 2 * xx + 1};
                    for (size_t cand : cands) {
                        if (in[cand] > bv) {
                            bv = in[cand];
                            best = cand;
                        }
                    }
                    y.data[oi] = bv;
                    argmax[oi] = base + best;
                }
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> dense_forward(const TensorT<T>& x, const LayerParams<T>& p, const LayerSpec& spec,
                         size_t li) {
    if (x.shape.size() != 2 || x.shape[1] != spec.in)
        shape_error(li, spec, "{N," + std::to_string(spec.in) + "}", x.shape);
    const size_t n = x.shape[0], in_n = spec.in, out_n = spec.out;
    TensorT<T> y({n, out_n});
    for (size_t b = 0; b < n; ++b) {
        const T* xin = x.data.data() + b * in_n;
        T* yout = y.data.data() + b * out_n;
        for (size_t o = 0; o < out_n; ++o) {
            const T* wrow = p.weight.data.data() + o * in_n;
            T acc = p.bias.data[o];
            for (size_t i = 0; i < in_n; ++i) acc += wrow[i] * xin[i];
            yout[o] = acc;
        }
    }
    return y;
}

} // namespace

template <typename T>
ForwardResult<T> forward(const std::vector<LayerSpec>& layers,
                         const std::vector<LayerParams<T>>& params, const TensorT<T>& input,
                         const ForwardOptions& opts) {
    if (params.size() != layers.size())
        throw Error(Errc::shape_mismatch, "parameter list does not match layer list");

    ForwardResult<T> res;
    res.training = opts.training;
    res.caches.resize(layers.size());
    res.kinds.reserve(layers.size());

    TensorT<T> x = input;
    for (size_t li = 0; li < layers.size(); ++li) {
        const auto& spec = layers[li];
        const auto& p = params[li];
        auto& cache = res.caches[li];
        res.kinds.push_back(spec.kind);

        switch (spec.kind) {
            case LayerKind::conv3x3: {
                cache.input = x;
                x = conv3x3_forward(x, p, spec, li);
                break;
            }
            case LayerKind::relu: {
                cache.input = x;
                for (auto& v : x.data) v = v > T(0) ? v : T(0);
                break;
            }
            case LayerKind::batchnorm: {
                cache.input = x;
                const NcsView v = ncs_view(x, spec.in, li, spec);
                const size_t m = v.n * v.s;
                cache.mean.assign(v.c, T(0));
                cache.var.assign(v.c, T(0));
                cache.inv_std.assign(v.c, T(0));
                const bool use_batch = opts.training && !is_frozen(opts, spec.name);
                cache.batch_stats = use_batch;
                for (size_t c = 0; c < v.c; ++c) {
                    T mean, var, inv_std;
                    if (use_batch) {
                        double acc = 0.0;
                        for (size_t b = 0; b < v.n; ++b) {
                            const T* px = x.data.data() + (b * v.c + c) * v.s;
                            for (size_t s = 0; s < v.s; ++s) acc += px[s];
                        }
                        mean = static_cast<T>(acc / static_cast<double>(m));
                        double var_acc = 0.0;
                        for (size_t b = 0; b < v.n; ++b) {
                            const T* px = x.data.data() + (b * v.c + c) * v.s;
                            for (size_t s = 0; s < v.s; ++s) {
                                const double d = static_cast<double>(px[s]) - mean;
                                var_acc += d * d;
                            }
                        }
                        var = static_cast<T>(var_acc / static_cast<double>(m));
                        inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + spec.epsilon));
                    } else {
                        mean = p.running_mean.data[c];
                        var = p.running_var.data[c];
                        inv_std = static_cast<T>(
                            1.0 / std::sqrt(static_cast<double>(var) + spec.epsilon));
                    }
                    cache.mean[c] = mean;
                    cache.var[c] = var;
                    cache.inv_std[c] = inv_std;
                    const T gamma = p.gamma.data[c], beta = p.beta.data[c];
                    for (size_t b = 0; b < v.n; ++b) {
                        T* px = x.data.data() + (b * v.c + c) * v.s;
                        for (size_t s = 0; s < v.s; ++s)
                            px[s] = gamma * ((px[s] - mean) * inv_std) + beta;
                    }
                }
                // x-hat is recovered in backward from input/mean/inv_std.
                break;
            }
            case LayerKind::maxpool2x2: {
                cache.input = x;
                x = maxpool_forward(x, cache.argmax, spec, li);
                break;
            }
            case LayerKind::flatten: {
                if (x.shape.size() < 2) shape_error(li, spec, "rank >= 2", x.shape);
                cache.input.shape = x.shape; // shape only; data not needed
                size_t flat = 1;
                for (size_t d = 1; d < x.shape.size(); ++d) flat *= x.shape[d];
                x.shape = {x.shape[0], flat};
                break;
            }
            case LayerKind::dense: {
                cache.input = x;
                x = dense_forward(x, p, spec, li);
                break;
            }
            case LayerKind::dropout: {
                if (spec.rate < 0.0 || spec.rate >= 1.0)
                    throw Error(Errc::bad_config, "dropout rate must be in [0, 1)");
                if (opts.training) {
                    std::mt19937_64 rng(mix_seed(opts.rng_seed, li));
                    const T scale = static_cast<T>(1.0 / (1.0 - spec.rate));
                    cache.mask = TensorT<T>(x.shape);
                    for (size_t i = 0; i < x.numel(); ++i) {
                        const bool keep = next_uniform(rng) >= spec.rate;
                        cache.mask.data[i] = keep ? scale : T(0);
                        x.data[i] *= cache.mask.data[i];
                    }
                }
                break;
            }
            case LayerKind::sigmoid: {
                for (auto& v : x.data) v = T(1) / (T(1) + std::exp(-v));
                cache.output = x;
                break;
            }
        }
    }
    res.output = std::move(x);
    return res;
}

template <typename T>
void update_running_stats(const std::vector<LayerSpec>& layers,
                          std::vector<LayerParams<T>>& params, const ForwardResult<T>& fwd,
                          const std::unordered_set<std::string>* frozen) {
    for (size_t li = 0; li < layers.size(); ++li) {
        const auto& spec = layers[li];
        if (spec.kind != LayerKind::batchnorm) continue;
        if (frozen && frozen->count(spec.name)) continue;
        const auto& cache = fwd.caches[li];
        if (!cache.batch_stats) continue;
        auto& p = params[li];
        const T momentum = static_cast<T>(spec.momentum);
        for (size_t c = 0; c < spec.in; ++c) {
            p.running_mean.data[c] =
                momentum * p.running_mean.data[c] + (T(1) - momentum) * cache.mean[c];
            p.running_var.data[c] =
                momentum * p.running_var.data[c] + (T(1) - momentum) * cache.var[c];
        }
    }
}

template <typename T>
Gradients<T> backward(const std::vector<LayerSpec>& layers,
                      const std::vector<LayerParams<T>>& params, const ForwardResult<T>& fwd,
                      const TensorT<T>& loss_grad) {
    if (fwd.kinds.size() != layers.size() || fwd.caches.size() != layers.size())
        throw Error(Errc::stale_cache, "cache does not match layer list");
    for (size_t i = 0; i < layers.size(); ++i)
        if (fwd.kinds[i] != layers[i].kind)
            throw Error(Errc::stale_cache, "cache kind differs at layer " + std::to_string(i));
    if (!fwd.training)
        throw Error(Errc::stale_cache, "backward requires a training-mode forward cache");

    Gradients<T> grads;
    grads.layers.resize(layers.size());

    TensorT<T> g = loss_grad;
    for (size_t li = layers.size(); li-- > 0;) {
        const auto& spec = layers[li];
        const auto& p = params[li];
        const auto& cache = fwd.caches[li];
        auto& gl = grads.layers[li];

        switch (spec.kind) {
            case LayerKind::conv3x3: {
                TensorT<T> gx;
                conv3x3_backward(cache.input, g, p, spec, gl, gx);
                g = std::move(gx);
                break;
            }
            case LayerKind::relu: {
                for (size_t i = 0; i < g.numel(); ++i)
                    if (cache.input.data[i] <= T(0)) g.data[i] = T(0);
                break;
            }
            case LayerKind::batchnorm: {
                const NcsView v = ncs_view(cache.input, spec.in, li, spec);
                const size_t m = v.n * v.s;
                gl.gamma = TensorT<T>({v.c});
                gl.beta = TensorT<T>({v.c});
                TensorT<T> gx(cache.input.shape);
                for (size_t c = 0; c < v.c; ++c) {
                    const T mean = cache.mean[c], inv_std = cache.inv_std[c];
                    const T gamma = p.gamma.data[c];
                    T sum_gy = 0, sum_gy_xhat = 0;
                    for (size_t b = 0; b < v.n; ++b) {
                        const T* px = cache.input.data.data() + (b * v.c + c) * v.s;
                        const T* pg = g.data.data() + (b * v.c + c) * v.s;
                        for (size_t s = 0; s < v.s; ++s) {
                            const T xhat = (px[s] - mean) * inv_std;
                            sum_gy += pg[s];
                            sum_gy_xhat += pg[s] * xhat;
                        }
                    }
                    gl.beta.data[c] = sum_gy;
                    gl.gamma.data[c] = sum_gy_xhat;
                    if (cache.batch_stats) {
                        const T inv_m = T(1) / static_cast<T>(m);
                        for (size_t b = 0; b < v.n; ++b) {
                            const T* px = cache.input.data.data() + (b * v.c + c) * v.s;
                            const T* pg = g.data.data() + (b * v.c + c) * v.s;
                            T* pgx = gx.data.data() + (b * v.c + c) * v.s;
                            for (size_t s = 0; s < v.s; ++s) {
                                const T xhat = (px[s] - mean) * inv_std;
                                pgx[s] = gamma * inv_std * inv_m *
                                         (static_cast<T>(m) * pg[s] - sum_gy - xhat * sum_gy_xhat);
                            }
                        }
                    } else {
                        const T k = gamma * inv_std;
                        for (size_t b = 0; b < v.n; ++b) {
                            const T* pg = g.data.data() + (b * v.c + c) * v.s;
                            T* pgx = gx.data.data() + (b * v.c + c) * v.s;
                            for (size_t s = 0; s < v.s; ++s) pgx[s] = k * pg[s];
                        }
                    }
                }
                g = std::move(gx);
                break;
            }
            case LayerKind::maxpool2x2: {
                TensorT<T> gx(cache.input.shape);
                for (size_t i = 0; i < g.numel(); ++i) gx.data[cache.argmax[i]] += g.data[i];
                g = std::move(gx);
                break;
            }
            case LayerKind::flatten: {
                g.shape = cache.input.shape;
                break;
            }
            case LayerKind::dense: {
                const size_t n = cache.input.shape[0], in_n = spec.in, out_n = spec.out;
                gl.weight = TensorT<T>({out_n, in_n});
                gl.bias = TensorT<T>({out_n});
                TensorT<T> gx({n, in_n});
                for (size_t b = 0; b < n; ++b) {
                    const T* xin = cache.input.data.data() + b * in_n;
                    const T* gout = g.data.data() + b * out_n;
                    T* gxin = gx.data.data() + b * in_n;
                    for (size_t o = 0; o < out_n; ++o) {
                        const T go = gout[o];
                        gl.bias.data[o] += go;
                        T* gw = gl.weight.data.data() + o * in_n;
                        const T* wrow = p.weight.data.data() + o * in_n;
                        for (size_t i = 0; i < in_n; ++i) {
                            gw[i] += go * xin[i];
                            gxin[i] += go * wrow[i];
                        }
                    }
                }
                g = std::move(gx);
                break;
            }
            case LayerKind::dropout: {
                if (!cache.mask.empty())
                    for (size_t i = 0; i < g.numel(); ++i) g.data[i] *= cache.mask.data[i];
                break;
            }
            case LayerKind::sigmoid: {
                for (size_t i = 0; i < g.numel(); ++i) {
                    const T y = cache.output.data[i];
                    g.data[i] *= y * (T(1) - y);
                }
                break;
            }
        }
    }
    grads.input = std::move(g);
    return grads;
}

template <typename T>
double weighted_bce(const TensorT<T>& pred, const std::vector<int>& targets, double w1,
                    double w0) {
    if (pred.numel() != targets.size() || targets.empty())
        throw Error(Errc::shape_mismatch, "prediction/target size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < targets.size(); ++i) {
        const double p = std::clamp(static_cast<double>(pred.data[i]), 1e-7, 1.0 - 1e-7);
        acc += targets[i] ? -w1 * std::log(p) : -w0 * std::log(1.0 - p);
    }
    return acc / static_cast<double>(targets.size());
}

template <typename T>
TensorT<T> weighted_bce_grad(const TensorT<T>& pred, const std::vector<int>& targets, double w1,
                             double w0) {
    if (pred.numel() != targets.size() || targets.empty())
        throw Error(Errc::shape_mismatch, "prediction/target size mismatch");
    TensorT<T> g(pred.shape);
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
        const double p = std::clamp(static_cast<double>(pred.data[i]), 1e-7, 1.0 - 1e-7);
        const double d = targets[i] ? -w1 / p : w0 / (1.0 - p);
        g.data[i] = static_cast<T>(d * inv_n);
    }
    return g;
}

template <typename T>
AdamState<T> make_adam(double lr, const std::vector<TensorT<T>*>& params) {
    AdamState<T> state;
    state.lr = lr;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto* p : params) {
        state.m.emplace_back(p->shape);
        state.v.emplace_back(p->shape);
    }
    return state;
}

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<TensorT<T>*>& params,
               const std::vector<const TensorT<T>*>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw Error(Errc::shape_mismatch, "adam state not aligned with parameters");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        const auto& g = *grads[i];
        if (p.shape != g.shape || p.shape != state.m[i].shape)
            throw Error(Errc::shape_mismatch, "adam tensor " + std::to_string(i) + " shape");
        for (size_t j = 0; j < p.numel(); ++j) {
            const T gj = g.data[j];
            state.m[i].data[j] = b1 * state.m[i].data[j] + (T(1) - b1) * gj;
            state.v[i].data[j] = b2 * state.v[i].data[j] + (T(1) - b2) * gj * gj;
            const double mhat = static_cast<double>(state.m[i].data[j]) / bc1;
            const double vhat = static_cast<double>(state.v[i].data[j]) / bc2;
            p.data[j] -= static_cast<T>(state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
    }
}

// The training path runs in float32; gradient-check tests use the float64
// instantiation.
#define NONWORD_NN_INSTANTIATE(T)                                                              \
    template std::vector<LayerParams<T>> init_params<T>(const std::vector<LayerSpec>&,         \
                                                        uint64_t);                             \
    template ForwardResult<T> forward<T>(const std::vector<LayerSpec>&,                        \
                                         const std::vector<LayerParams<T>>&, const TensorT<T>&, \
                                         const ForwardOptions&);                               \
    template void update_running_stats<T>(const std::vector<LayerSpec>&,                       \
                                          std::vector<LayerParams<T>>&, const ForwardResult<T>&, \
                                          const std::unordered_set<std::string>*);             \
    template Gradients<T> backward<T>(const std::vector<LayerSpec>&,                           \
                                      const std::vector<LayerParams<T>>&,                      \
                                      const ForwardResult<T>&, const TensorT<T>&);             \
    template double weighted_bce<T>(const TensorT<T>&, const std::vector<int>&, double,        \
                                    double);                                                   \
    template TensorT<T> weighted_bce_grad<T>(const TensorT<T>&, const std::vector<int>&,       \
                                             double, double);                                  \
    template AdamState<T> make_adam<T>(double, const std::vector<TensorT<T>*>&);               \
    template void adam_step<T>(AdamState<T>&, const std::vector<TensorT<T>*>&,                 \
                               const std::vector<const TensorT<T>*>&);

NONWORD_NN_INSTANTIATE(float)
NONWORD_NN_INSTANTIATE(double)

#undef NONWORD_NN_INSTANTIATE

} // namespace nonword::nn
