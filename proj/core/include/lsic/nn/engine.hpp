// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Layer kernels and the forward/backward executor. Templated on the scalar
// type: training runs in float, the gradient checker instantiates double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lsic/error.hpp"
#include "lsic/nn/model.hpp"

namespace lsic::nn {

template <class T>
using ParamMap = std::map<std::string, std::vector<T>>;

// NHWC activation batch.
template <class T>
struct Act {
    std::size_t n = 0, h = 0, w = 0, c = 0;
    std::vector<T> v;

    Act() = default;
    Act(std::size_t n_, std::size_t h_, std::size_t w_, std::size_t c_)
        : n(n_), h(h_), w(w_), c(c_), v(n_ * h_ * w_ * c_, T(0)) {}

    std::size_t sample_size() const { return h * w * c; }
    T* at(std::size_t i, std::size_t y, std::size_t x) { return v.data() + ((i * h + y) * w + x) * c; }
    const T* at(std::size_t i, std::size_t y, std::size_t x) const {
        return v.data() + ((i * h + y) * w + x) * c;
    }
};

// Labels per head, one entry per sample.
using HeadLabels = std::vector<std::vector<int>>;

template <class T>
ParamMap<T> materialize(const ModelGraph& model) {
    ParamMap<T> out;
    for (const auto& [name, tensor] : model.weights) {
        auto vals = tensor.values();
        out.emplace(name, std::vector<T>(vals.begin(), vals.end()));
    }
    return out;
}

// Asymmetric uint8 affine parameters derived from a calibrated range.
struct AffineParams {
    double scale = 1.0;
    int zero_point = 0;
};

// A degenerate (constant) range maps to scale 1, zero point 0. Otherwise the
// range is widened to include 0 so that zero is exactly representable.
inline AffineParams affine_from_range(double lo, double hi) {
    if (!(hi > lo)) return {1.0, 0};
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    AffineParams p;
    p.scale = (hi - lo) / 255.0;
    p.zero_point = static_cast<int>(std::clamp(std::round(-lo / p.scale), 0.0, 255.0));
    return p;
}

template <class T>
void fake_quantize_uint8(std::span<T> values, const ActRange& range) {
    const AffineParams p = affine_from_range(range.min, range.max);
    for (T& v : values) {
        double q = std::clamp(std::round(static_cast<double>(v) / p.scale) + p.zero_point, 0.0, 255.0);
        v = static_cast<T>((q - p.zero_point) * p.scale);
    }
}

namespace detail {

template <class T>
void conv3x3_forward(const Act<T>& in, std::span<const T> kernel, std::span<const T> bias, Act<T>& out) {
    const std::size_t cin = in.c;
    const std::size_t cout = bias.size();
    out = Act<T>(in.n, in.h, in.w, cout);
    for (std::size_t i = 0; i < in.n; ++i) {
        for (std::size_t y = 0; y < in.h; ++y) {
            for (std::size_t x = 0; x < in.w; ++x) {
                T* o = out.at(i, y, x);
                for (std::size_t co = 0; co < cout; ++co) o[co] = bias[co];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                        const T* src = in.at(i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        const T* k = kernel.data() + (ky * 3 + kx) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const T s = src[ci];
                            if (s == T(0)) continue;
                            const T* kr = k + ci * cout;
                            for (std::size_t co = 0; co < cout; ++co) o[co] += s * kr[co];
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void conv3x3_backward(const Act<T>& in, std::span<const T> kernel, const Act<T>& dout, Act<T>& din,
                      std::span<T> dkernel, std::span<T> dbias) {
    const std::size_t cin = in.c;
    const std::size_t cout = dout.c;
    din = Act<T>(in.n, in.h, in.w, cin);
    for (std::size_t i = 0; i < in.n; ++i) {
        for (std::size_t y = 0; y < in.h; ++y) {
            for (std::size_t x = 0; x < in.w; ++x) {
                const T* g = dout.at(i, y, x);
                for (std::size_t co = 0; co < cout; ++co) dbias[co] += g[co];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                        const auto uy = static_cast<std::size_t>(iy);
                        const auto ux = static_cast<std::size_t>(ix);
                        const T* src = in.at(i, uy, ux);
                        T* dsrc = din.at(i, uy, ux);
                        const std::size_t off = (ky * 3 + kx) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const T* kr = kernel.data() + off + ci * cout;
                            T* dkr = dkernel.data() + off + ci * cout;
                            const T s = src[ci];
                            T acc = 0;
                            for (std::size_t co = 0; co < cout; ++co) {
                                acc += kr[co] * g[co];
                                dkr[co] += s * g[co];
                            }
                            dsrc[ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void dense_forward(const Act<T>& in, std::span<const T> kernel, std::span<const T> bias, Act<T>& out) {
    const std::size_t fin = in.sample_size();
    const std::size_t fout = bias.size();
    out = Act<T>(in.n, 1, 1, fout);
    for (std::size_t i = 0; i < in.n; ++i) {
        const T* x = in.v.data() + i * fin;
        T* o = out.v.data() + i * fout;
        for (std::size_t u = 0; u < fout; ++u) o[u] = bias[u];
        for (std::size_t f = 0; f < fin; ++f) {
            const T s = x[f];
            if (s == T(0)) continue;
            const T* kr = kernel.data() + f * fout;
            for (std::size_t u = 0; u < fout; ++u) o[u] += s * kr[u];
        }
    }
}

template <class T>
void dense_backward(const Act<T>& in, std::span<const T> kernel, const Act<T>& dout, Act<T>& din,
                    std::span<T> dkernel, std::span<T> dbias) {
    const std::size_t fin = in.sample_size();
    const std::size_t fout = dout.c;
    din = Act<T>(in.n, in.h, in.w, in.c);
    for (std::size_t i = 0; i < in.n; ++i) {
        const T* x = in.v.data() + i * fin;
        const T* g = dout.v.data() + i * fout;
        T* dx = din.v.data() + i * fin;
        for (std::size_t u = 0; u < fout; ++u) dbias[u] += g[u];
        for (std::size_t f = 0; f < fin; ++f) {
            const T* kr = kernel.data() + f * fout;
            T* dkr = dkernel.data() + f * fout;
            const T s = x[f];
            T acc = 0;
            for (std::size_t u = 0; u < fout; ++u) {
                acc += kr[u] * g[u];
                dkr[u] += s * g[u];
            }
            dx[f] = acc;
        }
    }
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Batch statistics observed by one batchnorm layer during a train-mode pass.
struct BnBatchStats {
    std::string layer;
    std::vector<double> mean;
    std::vector<double> var;
};

template <class T>
class Executor {
public:
    Executor(const ModelGraph& model, const ParamMap<T>& params) : model_(model), params_(params) {}

    // x: n samples of frames x n_mfcc, row-major. Throws ShapeMismatch.
    void forward(std::span<const T> x, std::size_t n, std::size_t frames, bool train,
                 std::uint64_t dropout_seed = 0) {
        if (n == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
        if (x.size() != n * frames * model_.n_mfcc) {
            throw Error(ErrorCode::ShapeMismatch, "input size does not match batch of " +
                                                      std::to_string(n) + " x " + std::to_string(frames) +
                                                      " x " + std::to_string(model_.n_mfcc));
        }
        if (model_.arch == ArchVariant::Flatten && frames != model_.input_frames) {
            throw Error(ErrorCode::ShapeMismatch, "flatten model expects " + std::to_string(model_.input_frames) +
                                                      " frames, got " + std::to_string(frames));
        }
        if (frames < min_input_frames(model_)) {
            throw Error(ErrorCode::ShapeMismatch, "too few frames: " + std::to_string(frames));
        }

        train_ = train;
        const bool fq = !train && model_.quant == QuantMode::Int8Full;
        const auto& layers = model_.layers;
        acts_.assign(layers.size() + 1, Act<T>());
        caches_.assign(layers.size(), Cache{});
        bn_stats_.clear();

        Act<T>& in = acts_[0];
        in = Act<T>(n, frames, model_.n_mfcc, 1);
        std::copy(x.begin(), x.end(), in.v.begin());
        if (fq) fake_quant_point("input", in);

        std::uint64_t rng_state = dropout_seed;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const LayerSpec& spec = layers[l];
            const Act<T>& a = acts_[l];
            Act<T>& out = acts_[l + 1];
            Cache& cache = caches_[l];
            switch (spec.kind) {
                case LayerKind::Conv2d:
                    detail::conv3x3_forward<T>(a, param(spec.name + "/kernel"), param(spec.name + "/bias"), out);
                    break;
                case LayerKind::BatchNorm:
                    batchnorm_forward(spec, a, out, cache);
                    break;
                case LayerKind::Relu:
                    out = a;
                    for (T& v : out.v) v = v > T(0) ? v : T(0);
                    if (fq) fake_quant_point(spec.name, out);
                    break;
                case LayerKind::MaxPool2x2:
                    maxpool_forward(a, out, cache);
                    break;
                case LayerKind::GlobalMaxPool:
                    gmp_forward(a, out, cache);
                    break;
                case LayerKind::Flatten:
                    out = a;
                    out.c = a.sample_size();
                    out.h = out.w = 1;
                    break;
                case LayerKind::Dropout:
                    out = a;
                    if (train && spec.rate > 0.0f) {
                        const T keep_scale = T(1) / (T(1) - static_cast<T>(spec.rate));
                        cache.mask.resize(out.v.size());
                        for (std::size_t i = 0; i < out.v.size(); ++i) {
                            const double u = static_cast<double>(detail::splitmix64(rng_state) >> 11) * 0x1.0p-53;
                            cache.mask[i] = u >= spec.rate ? keep_scale : T(0);
                            out.v[i] *= cache.mask[i];
                        }
                    }
                    break;
                case LayerKind::Dense:
                    detail::dense_forward<T>(a, param(spec.name + "/kernel"), param(spec.name + "/bias"), out);
                    break;
                case LayerKind::Softmax:
                    throw Error(ErrorCode::ConfigInvalid, "softmax belongs to heads, not the trunk");
            }
        }

        const Act<T>& features = acts_.back();
        logits_.assign(model_.heads.size(), Act<T>());
        probs_.assign(model_.heads.size(), Act<T>());
        for (std::size_t h = 0; h < model_.heads.size(); ++h) {
            const auto& head = model_.heads[h];
            detail::dense_forward<T>(features, param(head.name + "/kernel"), param(head.name + "/bias"), logits_[h]);
            if (fq) fake_quant_point(head.name, logits_[h]);
            probs_[h] = logits_[h];
            softmax_rows(probs_[h]);
        }
    }

    std::size_t batch_size() const { return acts_.empty() ? 0 : acts_[0].n; }
    const std::vector<Act<T>>& probs() const { return probs_; }
    const std::vector<Act<T>>& logits() const { return logits_; }
    const std::vector<Act<T>>& activations() const { return acts_; }
    const std::vector<BnBatchStats>& bn_stats() const { return bn_stats_; }

    // Mean categorical cross-entropy, summed over heads.
    double loss(const HeadLabels& labels) const {
        check_labels(labels);
        double total = 0.0;
        for (std::size_t h = 0; h < logits_.size(); ++h) {
            const Act<T>& z = logits_[h];
            double sum = 0.0;
            for (std::size_t i = 0; i < z.n; ++i) {
                const T* row = z.v.data() + i * z.c;
                double m = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < z.c; ++k) m = std::max(m, static_cast<double>(row[k]));
                double s = 0.0;
                for (std::size_t k = 0; k < z.c; ++k) s += std::exp(static_cast<double>(row[k]) - m);
                sum += -(static_cast<double>(row[static_cast<std::size_t>(labels[h][i])]) - m - std::log(s));
            }
            total += sum / static_cast<double>(z.n);
        }
        return total;
    }

    // Gradients of loss(labels) w.r.t. every trainable tensor, accumulated into grads.
    void backward(const HeadLabels& labels, ParamMap<T>& grads) {
        check_labels(labels);
        const std::size_t n = batch_size();
        const Act<T>& features = acts_.back();
        Act<T> dfeat(features.n, features.h, features.w, features.c);
        for (std::size_t h = 0; h < model_.heads.size(); ++h) {
            const auto& head = model_.heads[h];
            Act<T> dlogits = probs_[h];
            for (std::size_t i = 0; i < n; ++i) {
                dlogits.v[i * dlogits.c + static_cast<std::size_t>(labels[h][i])] -= T(1);
            }
            for (T& g : dlogits.v) g /= static_cast<T>(n);
            Act<T> dx;
            detail::dense_backward<T>(features, param(head.name + "/kernel"), dlogits, dx,
                                      grad(grads, head.name + "/kernel"), grad(grads, head.name + "/bias"));
            for (std::size_t i = 0; i < dfeat.v.size(); ++i) dfeat.v[i] += dx.v[i];
        }

        Act<T> dcur = std::move(dfeat);
        for (std::size_t l = model_.layers.size(); l-- > 0;) {
            const LayerSpec& spec = model_.layers[l];
            const Act<T>& a = acts_[l];
            const Cache& cache = caches_[l];
            Act<T> dprev;
            switch (spec.kind) {
                case LayerKind::Conv2d:
                    detail::conv3x3_backward<T>(a, param(spec.name + "/kernel"), dcur, dprev,
                                                grad(grads, spec.name + "/kernel"), grad(grads, spec.name + "/bias"));
                    break;
                case LayerKind::BatchNorm:
                    batchnorm_backward(spec, dcur, dprev, cache, grads);
                    break;
                case LayerKind::Relu:
                    dprev = std::move(dcur);
                    for (std::size_t i = 0; i < dprev.v.size(); ++i) {
                        if (!(a.v[i] > T(0))) dprev.v[i] = T(0);
                    }
                    break;
                case LayerKind::MaxPool2x2:
                case LayerKind::GlobalMaxPool:
                    dprev = Act<T>(a.n, a.h, a.w, a.c);
                    for (std::size_t i = 0; i < dcur.v.size(); ++i) dprev.v[cache.argmax[i]] += dcur.v[i];
                    break;
                case LayerKind::Flatten:
                    dprev = std::move(dcur);
                    dprev.h = a.h;
                    dprev.w = a.w;
                    dprev.c = a.c;
                    break;
                case LayerKind::Dropout:
                    dprev = std::move(dcur);
                    if (!cache.mask.empty()) {
                        for (std::size_t i = 0; i < dprev.v.size(); ++i) dprev.v[i] *= cache.mask[i];
                    }
                    break;
                case LayerKind::Dense:
                    detail::dense_backward<T>(a, param(spec.name + "/kernel"), dcur, dprev,
                                              grad(grads, spec.name + "/kernel"), grad(grads, spec.name + "/bias"));
                    break;
                case LayerKind::Softmax:
                    break;
            }
            dcur = std::move(dprev);
        }
    }

private:
    struct Cache {
        std::vector<std::size_t> argmax;
        std::vector<T> mask;
        std::vector<T> xhat;
        std::vector<T> inv_std;
    };

    std::span<const T> param(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw Error(ErrorCode::ShapeMismatch, "missing weight " + name);
        return it->second;
    }

    std::span<T> grad(ParamMap<T>& grads, const std::string& name) const {
        auto& g = grads[name];
        if (g.empty()) g.assign(params_.at(name).size(), T(0));
        return g;
    }

    void check_labels(const HeadLabels& labels) const {
        if (labels.size() != model_.heads.size()) throw Error(ErrorCode::ShapeMismatch, "label heads mismatch");
        for (std::size_t h = 0; h < labels.size(); ++h) {
            if (labels[h].size() != batch_size()) throw Error(ErrorCode::ShapeMismatch, "label count mismatch");
            for (int y : labels[h]) {
                if (y < 0 || static_cast<std::size_t>(y) >= model_.heads[h].labels.size()) {
                    throw Error(ErrorCode::ShapeMismatch, "label index out of range");
                }
            }
        }
    }

    void fake_quant_point(const std::string& key, Act<T>& a) const {
        auto it = model_.activation_ranges.find(key);
        if (it == model_.activation_ranges.end()) return;
        fake_quantize_uint8<T>(a.v, it->second);
    }

    static void softmax_rows(Act<T>& a) {
        for (std::size_t i = 0; i < a.n; ++i) {
            T* row = a.v.data() + i * a.c;
            T m = *std::max_element(row, row + a.c);
            T s = 0;
            for (std::size_t k = 0; k < a.c; ++k) {
                row[k] = std::exp(row[k] - m);
                s += row[k];
            }
            for (std::size_t k = 0; k < a.c; ++k) row[k] /= s;
        }
    }

    void batchnorm_forward(const LayerSpec& spec, const Act<T>& a, Act<T>& out, Cache& cache) {
        const std::size_t c = a.c;
        const std::size_t count = a.n * a.h * a.w;
        auto gamma = param(spec.name + "/gamma");
        auto beta = param(spec.name + "/beta");
        const double eps = model_.bn_epsilon;
        out = Act<T>(a.n, a.h, a.w, c);
        std::vector<double> mean(c, 0.0), var(c, 0.0);
        if (train_) {
            for (std::size_t p = 0; p < count; ++p) {
                for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += static_cast<double>(a.v[p * c + ch]);
            }
            for (double& m : mean) m /= static_cast<double>(count);
            for (std::size_t p = 0; p < count; ++p) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double d = static_cast<double>(a.v[p * c + ch]) - mean[ch];
                    var[ch] += d * d;
                }
            }
            for (double& v : var) v /= static_cast<double>(count);
            bn_stats_.push_back({spec.name, mean, var});
        } else {
            auto mm = param(spec.name + "/moving_mean");
            auto mv = param(spec.name + "/moving_var");
            for (std::size_t ch = 0; ch < c; ++ch) {
                mean[ch] = static_cast<double>(mm[ch]);
                var[ch] = static_cast<double>(mv[ch]);
            }
        }
        cache.inv_std.resize(c);
        for (std::size_t ch = 0; ch < c; ++ch) cache.inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + eps));
        if (train_) cache.xhat.resize(a.v.size());
        for (std::size_t p = 0; p < count; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t i = p * c + ch;
                const T xh = (a.v[i] - static_cast<T>(mean[ch])) * cache.inv_std[ch];
                if (train_) cache.xhat[i] = xh;
                out.v[i] = gamma[ch] * xh + beta[ch];
            }
        }
    }

    void batchnorm_backward(const LayerSpec& spec, const Act<T>& dy, Act<T>& dx, const Cache& cache,
                            ParamMap<T>& grads) {
        const std::size_t c = dy.c;
        const std::size_t count = dy.n * dy.h * dy.w;
        auto gamma = param(spec.name + "/gamma");
        auto dgamma = grad(grads, spec.name + "/gamma");
        auto dbeta = grad(grads, spec.name + "/beta");
        dx = Act<T>(dy.n, dy.h, dy.w, c);
        if (!train_) {
            // Eval-mode statistics are constants.
            for (std::size_t p = 0; p < count; ++p) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t i = p * c + ch;
                    dx.v[i] = dy.v[i] * gamma[ch] * cache.inv_std[ch];
                }
            }
            return;
        }
        std::vector<T> sum_dy(c, T(0)), sum_dy_xhat(c, T(0));
        for (std::size_t p = 0; p < count; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t i = p * c + ch;
                sum_dy[ch] += dy.v[i];
                sum_dy_xhat[ch] += dy.v[i] * cache.xhat[i];
            }
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
            dgamma[ch] += sum_dy_xhat[ch];
            dbeta[ch] += sum_dy[ch];
        }
        const T m = static_cast<T>(count);
        for (std::size_t p = 0; p < count; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t i = p * c + ch;
                dx.v[i] = gamma[ch] * cache.inv_std[ch] / m *
                          (m * dy.v[i] - sum_dy[ch] - cache.xhat[i] * sum_dy_xhat[ch]);
            }
        }
    }

    static void maxpool_forward(const Act<T>& a, Act<T>& out, Cache& cache) {
        out = Act<T>(a.n, a.h / 2, a.w / 2, a.c);
        cache.argmax.resize(out.v.size());
        std::size_t o = 0;
        for (std::size_t i = 0; i < out.n; ++i) {
            for (std::size_t y = 0; y < out.h; ++y) {
                for (std::size_t x = 0; x < out.w; ++x) {
                    for (std::size_t ch = 0; ch < a.c; ++ch, ++o) {
                        std::size_t best = ((i * a.h + 2 * y) * a.w + 2 * x) * a.c + ch;
                        for (std::size_t dy = 0; dy < 2; ++dy) {
                            for (std::size_t dx = 0; dx < 2; ++dx) {
                                const std::size_t idx = ((i * a.h + 2 * y + dy) * a.w + 2 * x + dx) * a.c + ch;
                                if (a.v[idx] > a.v[best]) best = idx;
                            }
                        }
                        cache.argmax[o] = best;
                        out.v[o] = a.v[best];
                    }
                }
            }
        }
    }

    static void gmp_forward(const Act<T>& a, Act<T>& out, Cache& cache) {
        out = Act<T>(a.n, 1, 1, a.c);
        cache.argmax.resize(out.v.size());
        for (std::size_t i = 0; i < a.n; ++i) {
            for (std::size_t ch = 0; ch < a.c; ++ch) {
                std::size_t best = i * a.sample_size() + ch;
                for (std::size_t p = 1; p < a.h * a.w; ++p) {
                    const std::size_t idx = i * a.sample_size() + p * a.c + ch;
                    if (a.v[idx] > a.v[best]) best = idx;
                }
                cache.argmax[i * a.c + ch] = best;
                out.v[i * a.c + ch] = a.v[best];
            }
        }
    }

    const ModelGraph& model_;
    const ParamMap<T>& params_;
    bool train_ = false;
    std::vector<Act<T>> acts_;
    std::vector<Cache> caches_;
    std::vector<Act<T>> logits_;
    std::vector<Act<T>> probs_;
    std::vector<BnBatchStats> bn_stats_;
};

}  // namespace lsic::nn
