// Copyright 2026-present the meshboost authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cassert>
#include <cmath>

#include "feature_map.hpp"
#include "meshboost/common.hpp"
#include "meshboost/loss.hpp"
#include "meshboost/model.hpp"

namespace meshboost::model {

using detail::copy_channels;
using detail::FeatureMap;

template <typename T>
struct Network<T>::Impl {
    ModelConfig cfg;
    int pad = 1;
    int height = -1;
    int width = -1;

    // Forward activations, kept for the backward pass.
    FeatureMap<T> x, f1, cat, sum, up;
    std::vector<FeatureMap<T>> dense;  // per block: [input, F_1, ..., F_C]

    // Gradients w.r.t. activations.
    FeatureMap<T> g_up, g_sum, g_f1, g_cat, g_dense, g_next;
    std::vector<T> flipped;

    explicit Impl(const ModelConfig& c) : cfg(c), pad(c.kernel / 2), dense(static_cast<std::size_t>(c.blocks)) {
        cfg.validate();
    }

    int
    dense_channels() const {
        return cfg.filters * (cfg.layers + 1);
    }

    void
    ensure(int h, int w) {
        if (h == height && w == width) {
            return;
        }
        const int f = cfg.filters;
        const int r2 = cfg.scale * cfg.scale;
        x.reset(h, w, 1, pad);
        f1.reset(h, w, f, pad);
        cat.reset(h, w, f * cfg.blocks, pad);
        sum.reset(h, w, f, pad);
        up.reset(h, w, r2, pad);
        for (auto& m : dense) {
            m.reset(h, w, dense_channels(), pad);
        }
        g_up.reset(h, w, r2, pad);
        g_sum.reset(h, w, f, pad);
        g_f1.reset(h, w, f, pad);
        g_cat.reset(h, w, f * cfg.blocks, pad);
        g_dense.reset(h, w, dense_channels(), pad);
        g_next.reset(h, w, f, pad);
        height = h;
        width = w;
    }

    kernels::ConvShape
    shape_of(const Parameter<T>& weight) const {
        return {height, width, weight.shape[2], weight.shape[3], weight.shape[0]};
    }

    // out[out_offset ...] (+)= conv(in[in_offset ...]) (+ bias).
    void
    conv(const BasicWeights<T>& w, int layer, const FeatureMap<T>& in, int in_offset, FeatureMap<T>& out,
         int out_offset) {
        const auto& weight = w.parameters()[layer];
        const auto& bias = w.parameters()[layer + 1];
        kernels::active_table<T>().conv_forward(shape_of(weight), in.view(in_offset), weight.values.data(),
                                                bias.values.data(), out.view(out_offset), false);
    }

    // Weight and bias gradients of `layer` given its input and output gradient.
    void
    weight_grad(BasicWeights<T>& grads, int layer, const FeatureMap<T>& in, int in_offset, const FeatureMap<T>& g_out,
                int g_offset) {
        auto& gw = grads.parameters()[layer];
        auto& gb = grads.parameters()[layer + 1];
        kernels::active_table<T>().conv_weight_grad(shape_of(gw), in.view(in_offset), g_out.view(g_offset),
                                                    gw.values.data(), gb.values.data());
    }

    // g_in[in_offset ...] (+)= d(conv)/d(in) applied to g_out: a convolution of
    // g_out with the spatially flipped, in/out-transposed kernel.
    void
    input_grad(const BasicWeights<T>& w, int layer, const FeatureMap<T>& g_out, int g_offset, FeatureMap<T>& g_in,
               int in_offset, bool accumulate) {
        const auto& weight = w.parameters()[layer];
        const int k = weight.shape[0];
        const int cin = weight.shape[2];
        const int cout = weight.shape[3];
        flipped.resize(weight.values.size());
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = weight.values.data() + static_cast<std::ptrdiff_t>((k - 1 - ky) * k + (k - 1 - kx)) *
                                                          cin * cout;
                T* dst = flipped.data() + static_cast<std::ptrdiff_t>(ky * k + kx) * cin * cout;
                for (int ci = 0; ci < cin; ++ci) {
                    for (int co = 0; co < cout; ++co) {
                        dst[static_cast<std::ptrdiff_t>(co) * cin + ci] = src[static_cast<std::ptrdiff_t>(ci) * cout + co];
                    }
                }
            }
        }
        const kernels::ConvShape shape{height, width, cout, cin, k};
        kernels::active_table<T>().conv_forward(shape, g_out.view(g_offset), flipped.data(), nullptr,
                                                g_in.view(in_offset), accumulate);
    }

    void
    relu(FeatureMap<T>& m, int offset, int count) {
        for (int y = 0; y < height; ++y) {
            for (int xx = 0; xx < width; ++xx) {
                T* p = m.pixel(y, xx, offset);
                for (int c = 0; c < count; ++c) {
                    p[c] = p[c] > T(0) ? p[c] : T(0);
                }
            }
        }
    }

    void
    check_finite([[maybe_unused]] const FeatureMap<T>& m, [[maybe_unused]] const char* where) const {
#ifndef NDEBUG
        for (int y = 0; y < height; ++y) {
            for (int xx = 0; xx < width; ++xx) {
                const T* p = m.pixel(y, xx);
                for (int c = 0; c < m.channels(); ++c) {
                    assert(std::isfinite(static_cast<double>(p[c])) && where);
                }
            }
        }
#endif
    }

    // Runs block `d` on dense[d] whose slot 0 already holds the block input.
    // Writes the block output to cat slot d.
    void
    block_forward(const BasicWeights<T>& w, int d) {
        const int f = cfg.filters;
        auto& m = dense[static_cast<std::size_t>(d)];
        for (int c = 1; c <= cfg.layers; ++c) {
            conv(w, ParameterLayout::rdb_conv(cfg, d, c), m, 0, m, c * f);
            relu(m, c * f, f);
        }
        conv(w, ParameterLayout::rdb_fusion(cfg, d), m, 0, cat, d * f);
        copy_channels(m, 0, cat, d * f, f, true);
        check_finite(m, "rdb");
    }

    void
    run_forward(const BasicWeights<T>& w, const BasicTensor<T>& low) {
        if (!(w.config() == cfg)) {
            throw InvalidArgument("Network: weights were built for a different ModelConfig");
        }
        if (low.channels() != 1 || low.height() < 1 || low.width() < 1) {
            throw InvalidArgument("Network: expected a (h, w, 1) input, got " + low.shape_string());
        }
        ensure(low.height(), low.width());
        const int f = cfg.filters;
        x.load(low);
        conv(w, ParameterLayout::c1(), x, 0, f1, 0);
        conv(w, ParameterLayout::c2(), f1, 0, dense[0], 0);
        for (int d = 0; d < cfg.blocks; ++d) {
            if (d > 0) {
                copy_channels(cat, (d - 1) * f, dense[static_cast<std::size_t>(d)], 0, f, false);
            }
            block_forward(w, d);
        }
        conv(w, ParameterLayout::c3(cfg), cat, 0, sum, 0);
        copy_channels(f1, 0, sum, 0, f, true);
        conv(w, ParameterLayout::up(cfg), sum, 0, up, 0);
        check_finite(up, "up");
    }

    BasicTensor<T>
    output() const {
        return pixel_shuffle(up.store(), cfg.scale);
    }

    // grads += d(loss)/d(weights) given d(loss)/d(output), shape (r h, r w, 1).
    void
    run_backward(const BasicWeights<T>& w, const BasicTensor<T>& g_output, BasicWeights<T>& grads) {
        const int f = cfg.filters;
        const int layers = cfg.layers;
        g_up.load(pixel_unshuffle(g_output, cfg.scale));

        const int up_layer = ParameterLayout::up(cfg);
        weight_grad(grads, up_layer, sum, 0, g_up, 0);
        input_grad(w, up_layer, g_up, 0, g_sum, 0, false);

        // Global residual: the skip receives g_sum unchanged.
        copy_channels(g_sum, 0, g_f1, 0, f, false);

        const int c3_layer = ParameterLayout::c3(cfg);
        weight_grad(grads, c3_layer, cat, 0, g_sum, 0);
        input_grad(w, c3_layer, g_sum, 0, g_cat, 0, false);

        g_next.fill_interior(T(0));
        for (int d = cfg.blocks - 1; d >= 0; --d) {
            auto& m = dense[static_cast<std::size_t>(d)];
            // Gradient at the block output: from C3 via the concat, plus from the next block.
            copy_channels(g_cat, d * f, g_next, 0, f, true);

            g_dense.fill_interior(T(0));
            copy_channels(g_next, 0, g_dense, 0, f, false);  // local residual

            const int lff = ParameterLayout::rdb_fusion(cfg, d);
            weight_grad(grads, lff, m, 0, g_next, 0);
            input_grad(w, lff, g_next, 0, g_dense, 0, true);

            for (int c = layers; c >= 1; --c) {
                // ReLU: pass gradient where the stored activation is positive.
                for (int y = 0; y < height; ++y) {
                    for (int xx = 0; xx < width; ++xx) {
                        const T* a = m.pixel(y, xx, c * f);
                        T* g = g_dense.pixel(y, xx, c * f);
                        for (int k = 0; k < f; ++k) {
                            if (!(a[k] > T(0))) {
                                g[k] = T(0);
                            }
                        }
                    }
                }
                const int layer = ParameterLayout::rdb_conv(cfg, d, c);
                weight_grad(grads, layer, m, 0, g_dense, c * f);
                input_grad(w, layer, g_dense, c * f, g_dense, 0, true);
            }
            copy_channels(g_dense, 0, g_next, 0, f, false);
        }

        weight_grad(grads, ParameterLayout::c2(), f1, 0, g_next, 0);
        input_grad(w, ParameterLayout::c2(), g_next, 0, g_f1, 0, true);
        weight_grad(grads, ParameterLayout::c1(), x, 0, g_f1, 0);
    }
};

template <typename T>
Network<T>::Network(const ModelConfig& config) : impl_(std::make_unique<Impl>(config)) {}

template <typename T>
Network<T>::~Network() = default;

template <typename T>
Network<T>::Network(Network&&) noexcept = default;

template <typename T>
Network<T>&
Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
const ModelConfig&
Network<T>::config() const {
    return impl_->cfg;
}

template <typename T>
BasicTensor<T>
Network<T>::forward(const BasicWeights<T>& weights, const BasicTensor<T>& low) {
    impl_->run_forward(weights, low);
    return impl_->output();
}

template <typename T>
double
Network<T>::loss_and_gradient(const BasicWeights<T>& weights, std::span<const BasicTensor<T>> lows,
                              std::span<const BasicTensor<T>> highs, BasicWeights<T>& grads, double loss_scale) {
    if (lows.size() != highs.size() || lows.empty()) {
        throw InvalidArgument("loss_and_gradient: need a non-empty batch of matching low/high pairs");
    }
    if (!(grads.config() == impl_->cfg)) {
        grads = BasicWeights<T>::zeros(impl_->cfg);
    } else {
        grads.fill(T(0));
    }
    const double batch = static_cast<double>(lows.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < lows.size(); ++i) {
        impl_->run_forward(weights, lows[i]);
        const BasicTensor<T> pred = impl_->output();
        const auto& target = highs[i];
        if (pred.height() != target.height() || pred.width() != target.width() || target.channels() != 1) {
            throw InvalidArgument("loss_and_gradient: prediction " + pred.shape_string() + " vs target " +
                                  target.shape_string());
        }
        loss += training::mae_loss(pred.values(), target.values()) / batch;
        const double step = loss_scale / (static_cast<double>(pred.size()) * batch);
        BasicTensor<T> g(pred.height(), pred.width(), 1);
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const T diff = pred.values()[k] - target.values()[k];
            g.values()[k] = diff > T(0) ? T(step) : (diff < T(0) ? T(-step) : T(0));
        }
        impl_->run_backward(weights, g, grads);
    }
    return loss * loss_scale;
}

template <typename T>
BasicTensor<T>
forward(const BasicWeights<T>& weights, const BasicTensor<T>& low) {
    Network<T> net(weights.config());
    return net.forward(weights, low);
}

template <typename T>
BasicTensor<T>
rdb_forward(const BasicTensor<T>& input, const BasicWeights<T>& weights, int block) {
    const auto& cfg = weights.config();
    if (block < 0 || block >= cfg.blocks) {
        throw InvalidArgument("rdb_forward: block " + std::to_string(block) + " out of range");
    }
    if (input.channels() != cfg.filters) {
        throw InvalidArgument("rdb_forward: input " + input.shape_string() + " must have " +
                              std::to_string(cfg.filters) + " channels");
    }
    typename Network<T>::Impl impl(cfg);
    impl.ensure(input.height(), input.width());
    impl.dense[static_cast<std::size_t>(block)].load(input);
    impl.block_forward(weights, block);
    return impl.cat.store(block * cfg.filters, cfg.filters);
}

template class Network<float>;
template class Network<double>;
template BasicTensor<float> forward(const BasicWeights<float>&, const BasicTensor<float>&);
template BasicTensor<double> forward(const BasicWeights<double>&, const BasicTensor<double>&);
template BasicTensor<float> rdb_forward(const BasicTensor<float>&, const BasicWeights<float>&, int);
template BasicTensor<double> rdb_forward(const BasicTensor<double>&, const BasicWeights<double>&, int);

}  // namespace meshboost::model
