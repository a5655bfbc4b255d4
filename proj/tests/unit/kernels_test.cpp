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

#include <cmath>
#include <vector>

#include "meshboost/kernels.hpp"
#include "meshboost/rng.hpp"

using namespace meshboost;
using namespace meshboost::kernels;

namespace {

// Padded HWC buffer with extra unused channels so views are strided.
struct Buffer {
    int h, w, c, pad;
    std::vector<float> data;
    Buffer(int h_, int w_, int c_, int pad_) : h(h_), w(w_), c(c_), pad(pad_) {
        data.assign(static_cast<std::size_t>(h + 2 * pad) * (w + 2 * pad) * c, 0.0f);
    }
    Plane<float>
    view(int offset) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(w + 2 * pad) * c;
        return {data.data() + pad * row + pad * c + offset, c, row};
    }
    void
    randomize_interior(Rng& rng) {
        auto v = view(0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int k = 0; k < c; ++k) {
                    v.pixel(y, x)[k] = static_cast<float>(rng.uniform(-1, 1));
                }
            }
        }
    }
};

std::vector<float>
random_vector(Rng& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) {
        x = static_cast<float>(rng.uniform(-1, 1));
    }
    return v;
}

struct Case {
    int h, w, cin, cout, k;
};

const Case kCases[] = {
    {4, 4, 1, 4, 3},   {5, 7, 3, 8, 3},   {8, 8, 16, 16, 3}, {6, 13, 32, 32, 3}, {7, 5, 5, 19, 3},
    {9, 3, 12, 33, 1}, {4, 6, 7, 4, 5},   {3, 3, 64, 9, 3},  {1, 1, 2, 24, 3},   {11, 2, 13, 17, 1},
};

void
expect_close(const std::vector<float>& a, const std::vector<float>& b, float tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_NEAR(a[i], b[i], tol * (1.0f + std::abs(b[i]))) << "index " << i;
    }
}

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
    EXPECT_TRUE(isa_available(Isa::Scalar));
    EXPECT_NO_THROW(table(Isa::Scalar));
}

TEST(Kernels, ForwardVariantsAgree) {
    if (!isa_available(Isa::Avx2)) {
        GTEST_SKIP() << "AVX2 not available";
    }
    Rng rng(42);
    for (const auto& tc : kCases) {
        for (bool accumulate : {false, true}) {
            const int pad = tc.k / 2;
            Buffer in(tc.h, tc.w, tc.cin + 3, pad);
            in.randomize_interior(rng);
            const auto weights = random_vector(rng, static_cast<std::size_t>(tc.k) * tc.k * tc.cin * tc.cout);
            const auto bias = random_vector(rng, tc.cout);
            Buffer a(tc.h, tc.w, tc.cout + 2, pad), b(tc.h, tc.w, tc.cout + 2, pad);
            a.randomize_interior(rng);
            b.data = a.data;
            const ConvShape shape{tc.h, tc.w, tc.cin, tc.cout, tc.k};
            table(Isa::Scalar).conv_forward(shape, in.view(2), weights.data(), bias.data(), a.view(1), accumulate);
            table(Isa::Avx2).conv_forward(shape, in.view(2), weights.data(), bias.data(), b.view(1), accumulate);
            expect_close(b.data, a.data, 1e-5f);
        }
    }
}

TEST(Kernels, WeightGradVariantsAgree) {
    if (!isa_available(Isa::Avx2)) {
        GTEST_SKIP() << "AVX2 not available";
    }
    Rng rng(7);
    for (const auto& tc : kCases) {
        const int pad = tc.k / 2;
        Buffer in(tc.h, tc.w, tc.cin + 1, pad), g(tc.h, tc.w, tc.cout + 5, pad);
        in.randomize_interior(rng);
        g.randomize_interior(rng);
        const auto start = random_vector(rng, static_cast<std::size_t>(tc.k) * tc.k * tc.cin * tc.cout);
        const auto bias_start = random_vector(rng, tc.cout);
        auto gw_a = start, gw_b = start;
        auto gb_a = bias_start, gb_b = bias_start;
        const ConvShape shape{tc.h, tc.w, tc.cin, tc.cout, tc.k};
        table(Isa::Scalar).conv_weight_grad(shape, in.view(1), g.view(3), gw_a.data(), gb_a.data());
        table(Isa::Avx2).conv_weight_grad(shape, in.view(1), g.view(3), gw_b.data(), gb_b.data());
        expect_close(gw_b, gw_a, 1e-5f);
        expect_close(gb_b, gb_a, 1e-5f);
    }
}

TEST(Kernels, ForwardLeavesNeighbouringChannelsAlone) {
    Rng rng(3);
    for (Isa isa : {Isa::Scalar, Isa::Avx2}) {
        if (!isa_available(isa)) {
            continue;
        }
        Buffer in(5, 6, 8, 1), out(5, 6, 40, 1);
        in.randomize_interior(rng);
        out.randomize_interior(rng);
        const auto before = out.data;
        const auto weights = random_vector(rng, 9 * 8 * 24);
        table(isa).conv_forward({5, 6, 8, 24, 3}, in.view(0), weights.data(), nullptr, out.view(8), false);
        for (int y = 0; y < 5; ++y) {
            for (int x = 0; x < 6; ++x) {
                const std::size_t base = (static_cast<std::size_t>(y + 1) * 8 + (x + 1)) * 40;
                for (int c : {0, 7, 32, 39}) {
                    EXPECT_EQ(out.data[base + c], before[base + c]);
                }
            }
        }
        // Padding untouched.
        EXPECT_EQ(out.data[0], 0.0f);
        EXPECT_EQ(out.data.back(), 0.0f);
    }
}

TEST(Kernels, ActiveIsaCanBeSwitched) {
    const Isa original = active_isa();
    set_active_isa(Isa::Scalar);
    EXPECT_EQ(active_isa(), Isa::Scalar);
    EXPECT_EQ(active_table<float>().conv_forward, table(Isa::Scalar).conv_forward);
    set_active_isa(original);
    EXPECT_EQ(active_isa(), original);
}
