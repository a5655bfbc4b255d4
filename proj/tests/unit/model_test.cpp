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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meshboost/common.hpp"
#include "meshboost/model.hpp"
#include "test_support.hpp"

using namespace meshboost;
using namespace meshboost::model;
using meshboost::testing::naive_conv;
using meshboost::testing::random_tensor;

namespace {

template <typename T>
BasicTensor<T>
concat(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    BasicTensor<T> out(a.height(), a.width(), a.channels() + b.channels());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            for (int c = 0; c < a.channels(); ++c) {
                out.at(y, x, c) = a.at(y, x, c);
            }
            for (int c = 0; c < b.channels(); ++c) {
                out.at(y, x, a.channels() + c) = b.at(y, x, c);
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T>
relu(BasicTensor<T> t) {
    for (auto& v : t.values()) {
        v = std::max(v, T(0));
    }
    return t;
}

template <typename T>
BasicTensor<T>
add(BasicTensor<T> a, const BasicTensor<T>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.values()[i] += b.values()[i];
    }
    return a;
}

template <typename T>
BasicTensor<T>
layer(const BasicWeights<T>& w, const std::string& name, const BasicTensor<T>& in) {
    const auto& wt = w.get(name + ".weight");
    const auto& b = w.get(name + ".bias");
    return conv2d<T>(in, wt.values, b.values, wt.shape[0]);
}

void
randomize(ModelWeights& w, Rng& rng, double scale = 0.3) {
    for (auto& p : w.parameters()) {
        for (auto& v : p.values) {
            v = static_cast<float>(rng.uniform(-scale, scale));
        }
    }
}

// Closed-form parameter count, layer by layer.
std::size_t
expected_parameter_count(const ModelConfig& c) {
    const std::size_t k2 = static_cast<std::size_t>(c.kernel) * c.kernel;
    const std::size_t f = c.filters;
    std::size_t n = (k2 * 1 * f + f) + (k2 * f * f + f);
    for (int d = 0; d < c.blocks; ++d) {
        for (int l = 1; l <= c.layers; ++l) {
            n += k2 * (f * l) * f + f;
        }
        n += f * (c.layers + 1) * f + f;
    }
    n += f * c.blocks * f + f;
    n += k2 * f * c.scale * c.scale + static_cast<std::size_t>(c.scale) * c.scale;
    return n;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
    Rng rng(1);
    const Tensor in = random_tensor<float>(rng, 5, 6, 1);
    std::vector<float> w(9, 0.0f);
    w[4] = 1.0f;
    const std::vector<float> b{0.0f};
    EXPECT_EQ(conv2d<float>(in, w, b, 3), in);
}

TEST(Conv2d, OnesKernelPaddingArithmetic) {
    const Tensor in(5, 5, 1, 1.0f);
    const std::vector<float> w(9, 1.0f), b{0.0f};
    const Tensor out = conv2d<float>(in, w, b, 3);
    EXPECT_EQ(out.at(2, 2, 0), 9.0f);
    EXPECT_EQ(out.at(0, 0, 0), 4.0f);
    EXPECT_EQ(out.at(4, 4, 0), 4.0f);
    EXPECT_EQ(out.at(0, 2, 0), 6.0f);
}

TEST(Conv2d, MatchesNaiveLoops) {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor in = random_tensor<float>(rng, 4, 4, 2);
        const int cout = 3;
        std::vector<float> w(9 * 2 * cout), b(cout);
        for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
        const Tensor fast = conv2d<float>(in, w, b, 3);
        const Tensor slow = naive_conv<float>(in, w, b, 3, cout);
        for (std::size_t i = 0; i < fast.size(); ++i) {
            EXPECT_LT(std::abs(fast.values()[i] - slow.values()[i]), 1e-5f);
        }
    }
}

TEST(Conv2d, ShapeMismatchNamesBothShapes) {
    const Tensor in(4, 4, 2);
    const std::vector<float> w(9 * 3 * 4), b(4);
    try {
        conv2d<float>(in, w, b, 3);
        FAIL();
    } catch (const InvalidArgument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(4, 4, 2)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(3, 3, 2, 4)"), std::string::npos) << msg;
    }
    EXPECT_THROW(conv2d<float>(in, std::vector<float>(8), std::vector<float>(1), 2), InvalidArgument);
}

TEST(PixelShuffle, IdentityAtScaleOne) {
    Rng rng(4);
    const Tensor t = random_tensor<float>(rng, 3, 5, 2);
    EXPECT_EQ(pixel_shuffle(t, 1), t);
}

TEST(PixelShuffle, TwoByTwoPlacement) {
    Tensor t(1, 1, 4);
    t.at(0, 0, 0) = 1.0f;  // a
    t.at(0, 0, 1) = 2.0f;  // b
    t.at(0, 0, 2) = 3.0f;  // c
    t.at(0, 0, 3) = 4.0f;  // d
    const Tensor out = pixel_shuffle(t, 2);
    ASSERT_EQ(out.height(), 2);
    ASSERT_EQ(out.channels(), 1);
    // Enumerated map: channel (y mod 2) * 2 + (x mod 2).
    EXPECT_EQ(out.at(0, 0, 0), 1.0f);
    EXPECT_EQ(out.at(0, 1, 0), 2.0f);
    EXPECT_EQ(out.at(1, 0, 0), 3.0f);
    EXPECT_EQ(out.at(1, 1, 0), 4.0f);
}

TEST(PixelShuffle, PreservesMultisetAtScaleEight) {
    Rng rng(5);
    const Tensor t = random_tensor<float>(rng, 8, 8, 64);
    const Tensor out = pixel_shuffle(t, 8);
    EXPECT_EQ(out.height(), 64);
    EXPECT_EQ(out.width(), 64);
    EXPECT_EQ(out.channels(), 1);
    std::vector<float> a(t.values().begin(), t.values().end()), b(out.values().begin(), out.values().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    EXPECT_EQ(pixel_unshuffle(out, 8), t);
}

TEST(PixelShuffle, RejectsIndivisibleChannels) {
    EXPECT_THROW(pixel_shuffle(Tensor(2, 2, 6), 2), InvalidArgument);
    EXPECT_THROW(pixel_unshuffle(Tensor(3, 2, 1), 2), InvalidArgument);
}

TEST(Rdb, ZeroWeightsIsIdentity) {
    const ModelConfig cfg{2, 3, 4, 3, 2};
    const ModelWeights w = ModelWeights::zeros(cfg);
    Rng rng(6);
    const Tensor in = random_tensor<float>(rng, 5, 4, 4);
    EXPECT_EQ(rdb_forward(in, w, 0), in);
    EXPECT_EQ(rdb_forward(in, w, 1), in);
}

TEST(Rdb, SingleLayerUnrolling) {
    const ModelConfig cfg{1, 1, 4, 3, 2};
    ModelWeights w = ModelWeights::zeros(cfg);
    Rng rng(7);
    randomize(w, rng);
    const Tensor in = random_tensor<float>(rng, 4, 4, 4);
    const Tensor f1 = relu(layer(w, "rdb0.conv1", in));
    const Tensor expected = add(layer(w, "rdb0.lff", concat(in, f1)), in);
    EXPECT_EQ(rdb_forward(in, w, 0), expected);
}

TEST(Rdb, TwoLayerConcatenationOracle) {
    const ModelConfig cfg{1, 2, 4, 3, 2};
    ModelWeights w = ModelWeights::zeros(cfg);
    Rng rng(8);
    randomize(w, rng);
    const Tensor in = random_tensor<float>(rng, 4, 4, 4);
    const Tensor f1 = relu(layer(w, "rdb0.conv1", in));
    const Tensor f2 = relu(layer(w, "rdb0.conv2", concat(in, f1)));
    const Tensor expected = add(layer(w, "rdb0.lff", concat(concat(in, f1), f2)), in);
    EXPECT_EQ(rdb_forward(in, w, 0), expected);
    EXPECT_THROW(rdb_forward(Tensor(4, 4, 3), w, 0), InvalidArgument);
    EXPECT_THROW(rdb_forward(in, w, 1), InvalidArgument);
}

TEST(Forward, MatchesLayerByLayerComposition) {
    const ModelConfig cfg{2, 2, 4, 3, 2};
    ModelWeights w = ModelWeights::zeros(cfg);
    Rng rng(9);
    randomize(w, rng);
    const Tensor x = random_tensor<float>(rng, 5, 3, 1);
    const Tensor s = layer(w, "c1", x);
    const Tensor r0 = rdb_forward(layer(w, "c2", s), w, 0);
    const Tensor r1 = rdb_forward(r0, w, 1);
    const Tensor fused = add(layer(w, "c3", concat(r0, r1)), s);
    const Tensor expected = pixel_shuffle(layer(w, "up", fused), 2);
    EXPECT_EQ(forward(w, x), expected);
}

TEST(Forward, ThirtyTwoToTwoFiftySixAtScaleEight) {
    const ModelConfig cfg{1, 1, 8, 3, 8};
    Rng rng(10);
    const ModelWeights w = init_weights(rng, cfg);
    const Tensor out = forward(w, random_tensor<float>(rng, 32, 32, 1, 0.0, 1.0));
    EXPECT_EQ(out.height(), 256);
    EXPECT_EQ(out.width(), 256);
    EXPECT_EQ(out.channels(), 1);
}

TEST(Forward, ZeroWeightsGiveZeroField) {
    const ModelConfig cfg{2, 2, 4, 3, 4};
    const ModelWeights w = ModelWeights::zeros(cfg);
    Rng rng(11);
    const Tensor out = forward(w, random_tensor<float>(rng, 6, 6, 1, 0.0, 1.0));
    for (float v : out.values()) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(Forward, DeterministicAcrossRuns) {
    const ModelConfig cfg{2, 2, 8, 3, 2};
    Rng a(12), b(12);
    const ModelWeights wa = init_weights(a, cfg), wb = init_weights(b, cfg);
    EXPECT_EQ(wa, wb);
    Rng rng(13);
    const Tensor x = random_tensor<float>(rng, 8, 8, 1, 0.0, 1.0);
    Network<float> net(cfg);
    const Tensor first = net.forward(wa, x);
    EXPECT_EQ(first, net.forward(wb, x));
    EXPECT_EQ(first, forward(wa, x));
}

TEST(Forward, GlobalResidualWiring) {
    // Everything after C1 zero except an up conv that lifts channel k of the
    // fused features to output channel k: the output is a fixed rearrangement
    // of the shallow features.
    const ModelConfig cfg{2, 2, 4, 3, 2};
    ModelWeights w = ModelWeights::zeros(cfg);
    Rng rng(14);
    for (auto* name : {"c1.weight", "c1.bias", "c2.weight", "c2.bias"}) {
        for (auto& v : w.get(name).values) {
            v = static_cast<float>(rng.uniform(-1, 1));
        }
    }
    auto& up = w.get("up.weight");
    for (int k = 0; k < 4; ++k) {
        up.values[(4 * 4 + k) * 4 + k] = 1.0f;  // center tap, in k -> out k
    }
    const Tensor x = random_tensor<float>(rng, 5, 5, 1);
    const Tensor shallow = layer(w, "c1", x);
    EXPECT_EQ(forward(w, x), pixel_shuffle(shallow, 2));
}

TEST(Forward, ShapeContract) {
    Rng rng(15);
    for (int r : {2, 4, 8}) {
        const ModelConfig cfg{1, 1, 2, 3, r};
        const ModelWeights w = init_weights(rng, cfg);
        Network<float> net(cfg);
        for (auto [h, wd] : {std::pair{1, 1}, std::pair{3, 5}, std::pair{8, 2}}) {
            const Tensor out = net.forward(w, random_tensor<float>(rng, h, wd, 1));
            EXPECT_EQ(out.height(), r * h);
            EXPECT_EQ(out.width(), r * wd);
            EXPECT_EQ(out.channels(), 1);
        }
    }
}

TEST(Forward, RejectsBadInputs) {
    const ModelConfig cfg{1, 1, 2, 3, 2};
    Rng rng(16);
    const ModelWeights w = init_weights(rng, cfg);
    Network<float> net(cfg);
    EXPECT_THROW(net.forward(w, Tensor(4, 4, 2)), InvalidArgument);
    const ModelWeights other = init_weights(rng, ModelConfig{1, 1, 2, 3, 4});
    EXPECT_THROW(net.forward(other, Tensor(4, 4, 1)), InvalidArgument);
}

TEST(ModelConfig, Validation) {
    EXPECT_THROW((ModelConfig{8, 8, 64, 3, 3}.validate()), InvalidArgument);
    EXPECT_THROW((ModelConfig{0, 8, 64, 3, 2}.validate()), InvalidArgument);
    EXPECT_THROW((ModelConfig{1, 1, 1, 2, 2}.validate()), InvalidArgument);
    EXPECT_NO_THROW(ModelConfig{}.validate());
    const ModelConfig defaults;
    EXPECT_EQ(defaults.blocks, 8);
    EXPECT_EQ(defaults.layers, 8);
    EXPECT_EQ(defaults.filters, 64);
    EXPECT_EQ(defaults.kernel, 3);
}

TEST(InitWeights, SeededAndCounted) {
    const ModelConfig cfg{8, 8, 64, 3, 8};
    Rng a(99), b(99), c(100);
    const ModelWeights wa = init_weights(a, cfg);
    EXPECT_EQ(wa, init_weights(b, cfg));
    EXPECT_NE(wa, init_weights(c, cfg));
    EXPECT_EQ(wa.size(), expected_parameter_count(cfg));
    for (const auto& p : wa.parameters()) {
        if (p.shape.size() == 1) {
            EXPECT_TRUE(std::all_of(p.values.begin(), p.values.end(), [](float v) { return v == 0.0f; }));
        }
    }
}

TEST(InitWeights, FanInVariance) {
    Rng rng(17);
    const ModelWeights w = init_weights(rng, ModelConfig{1, 2, 32, 3, 2});
    const auto& p = w.get("rdb0.conv2.weight");
    double sq = 0;
    for (float v : p.values) sq += static_cast<double>(v) * v;
    const double var = sq / static_cast<double>(p.values.size());
    EXPECT_NEAR(var, 2.0 / (9.0 * 64.0), 0.1 * 2.0 / (9.0 * 64.0));
}

TEST(InitWeights, ForwardIsFiniteWithVariance) {
    const ModelConfig cfg{2, 4, 16, 3, 2};
    Rng rng(18);
    const ModelWeights w = init_weights(rng, cfg);
    const Tensor out = forward(w, random_tensor<float>(rng, 16, 16, 1, 0.0, 1.0));
    double mean = 0;
    for (float v : out.values()) {
        ASSERT_TRUE(std::isfinite(v));
        mean += v;
    }
    mean /= static_cast<double>(out.size());
    double var = 0;
    for (float v : out.values()) var += (v - mean) * (v - mean);
    EXPECT_GT(var / static_cast<double>(out.size()), 1e-6);
}
