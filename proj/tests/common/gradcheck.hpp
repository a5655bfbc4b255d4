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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "meshboost/model.hpp"
#include "meshboost/rng.hpp"

namespace meshboost::testing {

struct GradientMismatch {
    std::string parameter;
    std::size_t index;
    double analytic;
    double numeric;
};

struct GradientCheckResult {
    std::size_t checked = 0;
    std::vector<GradientMismatch> mismatches;
    double max_abs_error = 0.0;
};

/// Central differences of the batch loss against the analytic gradient for
/// every parameter, in double precision. An entry passes when the absolute
/// error is at most abs_tol or the relative error is below rel_tol.
inline GradientCheckResult
check_gradients(const model::ModelConfig& cfg,
                const model::BasicWeights<double>& weights,
                std::span<const model::BasicTensor<double>> lows,
                std::span<const model::BasicTensor<double>> highs,
                double eps = 1e-3,
                double abs_tol = 1e-6,
                double rel_tol = 1e-3) {
    model::Network<double> net(cfg);
    auto grads = model::BasicWeights<double>::zeros(cfg);
    net.loss_and_gradient(weights, lows, highs, grads);
    auto probe = weights;
    auto scratch = model::BasicWeights<double>::zeros(cfg);
    GradientCheckResult result;
    for (std::size_t p = 0; p < probe.parameters().size(); ++p) {
        auto& values = probe.parameters()[p].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = net.loss_and_gradient(probe, lows, highs, scratch);
            values[i] = saved - eps;
            const double down = net.loss_and_gradient(probe, lows, highs, scratch);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = grads.parameters()[p].values[i];
            const double err = std::abs(analytic - numeric);
            const double scale = std::max(std::abs(analytic), std::abs(numeric));
            result.max_abs_error = std::max(result.max_abs_error, err);
            ++result.checked;
            if (!(err <= abs_tol || err < rel_tol * scale)) {
                result.mismatches.push_back({probe.parameters()[p].name, i, analytic, numeric});
            }
        }
    }
    return result;
}

/// Targets offset from the current prediction by at least min_offset in
/// either direction, so the absolute-error kink stays out of reach of the
/// finite-difference step.
inline std::vector<model::BasicTensor<double>>
offset_targets(const model::ModelConfig& cfg,
               const model::BasicWeights<double>& weights,
               std::span<const model::BasicTensor<double>> lows,
               Rng& rng,
               double min_offset = 0.05) {
    model::Network<double> net(cfg);
    std::vector<model::BasicTensor<double>> out;
    for (const auto& low : lows) {
        auto t = net.forward(weights, low);
        for (auto& v : t.values()) {
            const double mag = rng.uniform(min_offset, 2.0 * min_offset + 0.1);
            v += rng.uniform() < 0.5 ? -mag : mag;
        }
        out.push_back(std::move(t));
    }
    return out;
}

/// Smallest |pre-activation| over every ReLU in the network for one input,
/// computed layer by layer from the public building blocks.
inline double
relu_margin(const model::BasicWeights<double>& w, const model::BasicTensor<double>& low) {
    using model::BasicTensor;
    const auto& cfg = w.config();
    auto apply = [&](int layer, const BasicTensor<double>& in) {
        const auto& wt = w.parameters()[static_cast<std::size_t>(layer)];
        const auto& b = w.parameters()[static_cast<std::size_t>(layer) + 1];
        return model::conv2d<double>(in, wt.values, b.values, wt.shape[0]);
    };
    auto append = [](const BasicTensor<double>& a, const BasicTensor<double>& b) {
        BasicTensor<double> out(a.height(), a.width(), a.channels() + b.channels());
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                for (int c = 0; c < a.channels(); ++c) out.at(y, x, c) = a.at(y, x, c);
                for (int c = 0; c < b.channels(); ++c) out.at(y, x, a.channels() + c) = b.at(y, x, c);
            }
        }
        return out;
    };
    double margin = std::numeric_limits<double>::infinity();
    BasicTensor<double> h = apply(model::ParameterLayout::c2(), apply(model::ParameterLayout::c1(), low));
    for (int d = 0; d < cfg.blocks; ++d) {
        BasicTensor<double> stack = h;
        for (int c = 1; c <= cfg.layers; ++c) {
            BasicTensor<double> pre = apply(model::ParameterLayout::rdb_conv(cfg, d, c), stack);
            for (auto& v : pre.values()) {
                margin = std::min(margin, std::abs(v));
                v = std::max(v, 0.0);
            }
            stack = append(stack, pre);
        }
        BasicTensor<double> out = apply(model::ParameterLayout::rdb_fusion(cfg, d), stack);
        for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += h.values()[i];
        h = std::move(out);
    }
    return margin;
}

struct GradientFixture {
    std::uint64_t seed = 0;
    model::BasicWeights<double> weights;
    std::vector<model::BasicTensor<double>> lows;
    std::vector<model::BasicTensor<double>> highs;
    double margin = 0.0;
};

/// Deterministic fixture for the tiny configuration: He-initialised weights
/// with small random biases, inputs in [0, 1), targets offset from the
/// prediction. Seeds are tried in order until every ReLU pre-activation is
/// at least min_margin from zero, so a step of eps cannot flip a unit.
inline GradientFixture
gradient_fixture(const model::ModelConfig& cfg, int height, int width, std::uint64_t first_seed,
                 double min_margin = 0.02, int batch = 1, int max_tries = 10000) {
    for (std::uint64_t seed = first_seed; seed < first_seed + static_cast<std::uint64_t>(max_tries); ++seed) {
        Rng rng(seed);
        auto w = model::init_weights(rng, cfg).cast<double>();
        for (auto& p : w.parameters()) {
            if (p.shape.size() == 1) {
                for (auto& v : p.values) v = rng.uniform(-0.1, 0.1);
            }
        }
        std::vector<model::BasicTensor<double>> lows;
        double margin = std::numeric_limits<double>::infinity();
        for (int b = 0; b < batch; ++b) {
            lows.emplace_back(height, width, 1);
            for (auto& v : lows.back().values()) v = rng.uniform();
            margin = std::min(margin, relu_margin(w, lows.back()));
        }
        if (margin < min_margin) {
            continue;
        }
        auto highs = offset_targets(cfg, w, lows, rng);
        return {seed, std::move(w), std::move(lows), std::move(highs), margin};
    }
    throw std::runtime_error("gradient_fixture: no seed satisfied the ReLU margin");
}

}  // namespace meshboost::testing
