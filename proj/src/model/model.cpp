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

#include "meshboost/model.hpp"

#include <algorithm>
#include <cmath>

#include "feature_map.hpp"
#include "meshboost/common.hpp"

namespace meshboost::model {

void
ModelConfig::validate() const {
    if (scale != 2 && scale != 4 && scale != 8) {
        throw InvalidArgument("ModelConfig: scale must be 2, 4 or 8, got " + std::to_string(scale));
    }
    if (blocks < 1 || layers < 1 || filters < 1) {
        throw InvalidArgument("ModelConfig: blocks, layers and filters must be >= 1 (got D=" + std::to_string(blocks) +
                              ", C=" + std::to_string(layers) + ", filters=" + std::to_string(filters) + ")");
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw InvalidArgument("ModelConfig: kernel must be odd and >= 1, got " + std::to_string(kernel));
    }
}

int
ParameterLayout::rdb_conv(const ModelConfig& c, int block, int layer) {
    return 4 + block * (2 * c.layers + 2) + 2 * (layer - 1);
}

int
ParameterLayout::rdb_fusion(const ModelConfig& c, int block) {
    return 4 + block * (2 * c.layers + 2) + 2 * c.layers;
}

int
ParameterLayout::c3(const ModelConfig& c) {
    return 4 + c.blocks * (2 * c.layers + 2);
}

int
ParameterLayout::up(const ModelConfig& c) {
    return c3(c) + 2;
}

namespace {

template <typename T>
void
add_layer(std::vector<Parameter<T>>& params, const std::string& name, int kernel, int in, int out) {
    params.push_back({name + ".weight", {kernel, kernel, in, out},
                      std::vector<T>(static_cast<std::size_t>(kernel) * kernel * in * out, T(0))});
    params.push_back({name + ".bias", {out}, std::vector<T>(static_cast<std::size_t>(out), T(0))});
}

}  // namespace

template <typename T>
BasicWeights<T>
BasicWeights<T>::zeros(const ModelConfig& config) {
    config.validate();
    BasicWeights<T> w;
    w.config_ = config;
    const int f = config.filters;
    const int k = config.kernel;
    add_layer(w.params_, "c1", k, 1, f);
    add_layer(w.params_, "c2", k, f, f);
    for (int d = 0; d < config.blocks; ++d) {
        const std::string prefix = "rdb" + std::to_string(d);
        for (int c = 1; c <= config.layers; ++c) {
            add_layer(w.params_, prefix + ".conv" + std::to_string(c), k, f * c, f);
        }
        add_layer(w.params_, prefix + ".lff", 1, f * (config.layers + 1), f);
    }
    add_layer(w.params_, "c3", 1, f * config.blocks, f);
    add_layer(w.params_, "up", k, f, config.scale * config.scale);
    return w;
}

template <typename T>
std::size_t
BasicWeights<T>::size() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.values.size();
    }
    return n;
}

template <typename T>
Parameter<T>&
BasicWeights<T>::get(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) {
            return p;
        }
    }
    throw InvalidArgument("no parameter named '" + name + "'");
}

template <typename T>
const Parameter<T>&
BasicWeights<T>::get(const std::string& name) const {
    return const_cast<BasicWeights<T>*>(this)->get(name);
}

template <typename T>
void
BasicWeights<T>::fill(T value) {
    for (auto& p : params_) {
        std::fill(p.values.begin(), p.values.end(), value);
    }
}

template class BasicWeights<float>;
template class BasicWeights<double>;

ModelWeights
init_weights(Rng& rng, const ModelConfig& config) {
    ModelWeights w = ModelWeights::zeros(config);
    for (auto& p : w.parameters()) {
        if (p.shape.size() != 4) {
            continue;
        }
        const double fan_in = static_cast<double>(p.shape[0]) * p.shape[1] * p.shape[2];
        const double stddev = std::sqrt(2.0 / fan_in);
        for (auto& v : p.values) {
            v = static_cast<float>(stddev * rng.normal());
        }
    }
    return w;
}

template <typename T>
BasicTensor<T>
conv2d(const BasicTensor<T>& input, std::span<const T> weights, std::span<const T> bias, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw InvalidArgument("conv2d: kernel must be odd, got " + std::to_string(kernel));
    }
    const int cin = input.channels();
    const int cout = static_cast<int>(bias.size());
    const std::size_t expected = static_cast<std::size_t>(kernel) * kernel * cin * cout;
    if (cout < 1 || weights.size() != expected) {
        throw InvalidArgument("conv2d: input " + input.shape_string() + " needs " + std::to_string(expected) +
                              " weights for kernel (" + std::to_string(kernel) + ", " + std::to_string(kernel) +
                              ", " + std::to_string(cin) + ", " + std::to_string(cout) + "), got " +
                              std::to_string(weights.size()));
    }
    const int pad = kernel / 2;
    detail::FeatureMap<T> in(input.height(), input.width(), cin, pad);
    in.load(input);
    detail::FeatureMap<T> out(input.height(), input.width(), cout, pad);
    const kernels::ConvShape shape{input.height(), input.width(), cin, cout, kernel};
    kernels::active_table<T>().conv_forward(shape, in.view(), weights.data(), bias.data(), out.view(), false);
    return out.store();
}

template <typename T>
BasicTensor<T>
pixel_shuffle(const BasicTensor<T>& input, int r) {
    if (r < 1 || input.channels() % (r * r) != 0) {
        throw InvalidArgument("pixel_shuffle: " + std::to_string(input.channels()) +
                              " channels not divisible by r^2 = " + std::to_string(r * r));
    }
    const int c = input.channels() / (r * r);
    BasicTensor<T> out(input.height() * r, input.width() * r, c);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int k = 0; k < c; ++k) {
                out.at(y, x, k) = input.at(y / r, x / r, k * r * r + (y % r) * r + (x % r));
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T>
pixel_unshuffle(const BasicTensor<T>& input, int r) {
    if (r < 1 || input.height() % r != 0 || input.width() % r != 0) {
        throw InvalidArgument("pixel_unshuffle: spatial size " + input.shape_string() + " not divisible by " +
                              std::to_string(r));
    }
    const int c = input.channels();
    BasicTensor<T> out(input.height() / r, input.width() / r, c * r * r);
    for (int y = 0; y < input.height(); ++y) {
        for (int x = 0; x < input.width(); ++x) {
            for (int k = 0; k < c; ++k) {
                out.at(y / r, x / r, k * r * r + (y % r) * r + (x % r)) = input.at(y, x, k);
            }
        }
    }
    return out;
}

template BasicTensor<float> conv2d(const BasicTensor<float>&, std::span<const float>, std::span<const float>, int);
template BasicTensor<double> conv2d(const BasicTensor<double>&, std::span<const double>, std::span<const double>, int);
template BasicTensor<float> pixel_shuffle(const BasicTensor<float>&, int);
template BasicTensor<double> pixel_shuffle(const BasicTensor<double>&, int);
template BasicTensor<float> pixel_unshuffle(const BasicTensor<float>&, int);
template BasicTensor<double> pixel_unshuffle(const BasicTensor<double>&, int);

}  // namespace meshboost::model
