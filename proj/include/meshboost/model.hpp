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

// Residual-dense super-resolution network for single-channel stress fields.
//
//   x -> C1 -+-> C2 -> RDB_1 -> ... -> RDB_D
//            |           |               |
//            |           +--- concat ----+-> C3 (1x1) -> (+) -> up conv -> pixel shuffle
//            +------------------------------------------>-^
//
// Each RDB holds `layers` densely connected 3x3 conv + ReLU layers, a 1x1
// local fusion layer and a local residual. Every layer emits `filters`
// channels; the up conv emits scale^2 channels and is linear.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "meshboost/kernels.hpp"
#include "meshboost/rng.hpp"
#include "meshboost/tensor.hpp"

namespace meshboost::model {

struct ModelConfig {
    int blocks = 8;    // D, residual dense blocks
    int layers = 8;    // C, conv layers per block
    int filters = 64;
    int kernel = 3;
    int scale = 8;     // r

    void
    validate() const;

    bool
    operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Parameter {
    std::string name;
    std::vector<int> shape;  // conv weights: [kernel, kernel, in, out]; biases: [out]
    std::vector<T> values;

    bool
    operator==(const Parameter&) const = default;
};

/// All learnable parameters, in a fixed order determined by the config:
/// c1, c2, rdb{d}.conv{c} for c = 1..C then rdb{d}.lff, c3, up; weight before
/// bias for each layer.
template <typename T>
class BasicWeights {
 public:
    BasicWeights() = default;

    /// Zero-filled parameters with shapes fully determined by `config`.
    static BasicWeights
    zeros(const ModelConfig& config);

    const ModelConfig&
    config() const {
        return config_;
    }
    std::vector<Parameter<T>>&
    parameters() {
        return params_;
    }
    const std::vector<Parameter<T>>&
    parameters() const {
        return params_;
    }

    /// Total scalar count.
    std::size_t
    size() const;

    Parameter<T>&
    get(const std::string& name);
    const Parameter<T>&
    get(const std::string& name) const;

    void
    fill(T value);

    template <typename U>
    BasicWeights<U>
    cast() const {
        BasicWeights<U> out = BasicWeights<U>::zeros(config_);
        for (std::size_t p = 0; p < params_.size(); ++p) {
            for (std::size_t i = 0; i < params_[p].values.size(); ++i) {
                out.parameters()[p].values[i] = static_cast<U>(params_[p].values[i]);
            }
        }
        return out;
    }

    bool
    operator==(const BasicWeights&) const = default;

 private:
    ModelConfig config_;
    std::vector<Parameter<T>> params_;
};

using ModelWeights = BasicWeights<float>;

/// Layer indices into the parameter list. Weight at `index`, bias at index + 1.
struct ParameterLayout {
    static int
    c1() {
        return 0;
    }
    static int
    c2() {
        return 2;
    }
    static int
    rdb_conv(const ModelConfig& c, int block, int layer);  // layer in 1..C
    static int
    rdb_fusion(const ModelConfig& c, int block);
    static int
    c3(const ModelConfig& c);
    static int
    up(const ModelConfig& c);
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
ModelWeights
init_weights(Rng& rng, const ModelConfig& config);

/// "Same" zero-padded convolution. weights are [k, k, in, out] row-major and
/// out = bias.size().
template <typename T>
BasicTensor<T>
conv2d(const BasicTensor<T>& input, std::span<const T> weights, std::span<const T> bias, int kernel);

/// Depth-to-space: (h, w, r^2 c) -> (r h, r w, c) with
/// out(y, x, k) = in(y / r, x / r, k r^2 + (y mod r) r + (x mod r)).
template <typename T>
BasicTensor<T>
pixel_shuffle(const BasicTensor<T>& input, int r);

/// Exact inverse of pixel_shuffle.
template <typename T>
BasicTensor<T>
pixel_unshuffle(const BasicTensor<T>& input, int r);

/// One residual dense block applied to `input` (filters channels).
template <typename T>
BasicTensor<T>
rdb_forward(const BasicTensor<T>& input, const BasicWeights<T>& weights, int block);

/// Forward/backward engine. Owns scratch buffers sized for the last input
/// resolution, so one instance must not be shared between threads; weights
/// are only read.
template <typename T>
class Network {
 public:
    explicit Network(const ModelConfig& config);
    ~Network();
    Network(Network&&) noexcept;
    Network&
    operator=(Network&&) noexcept;

    const ModelConfig&
    config() const;

    /// low: (h, w, 1) normalized field. Returns (r h, r w, 1).
    BasicTensor<T>
    forward(const BasicWeights<T>& weights, const BasicTensor<T>& low);

    /// Mean over the batch of per-sample MAE between forward(low) and high.
    /// grads is reset and receives loss_scale * d(loss)/d(weights).
    /// The MAE subgradient at zero difference is 0.
    double
    loss_and_gradient(const BasicWeights<T>& weights,
                      std::span<const BasicTensor<T>> lows,
                      std::span<const BasicTensor<T>> highs,
                      BasicWeights<T>& grads,
                      double loss_scale = 1.0);

 private:
    struct Impl;
    std::unique_ptr<Impl> impl_;

    template <typename U>
    friend BasicTensor<U>
    rdb_forward(const BasicTensor<U>& input, const BasicWeights<U>& weights, int block);
};

/// Convenience: forward with a throwaway Network.
template <typename T>
BasicTensor<T>
forward(const BasicWeights<T>& weights, const BasicTensor<T>& low);

}  // namespace meshboost::model
