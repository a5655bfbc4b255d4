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

// Convolution inner loops. Every kernel has a scalar reference (templated on
// the element type) and, for float, optional SIMD variants picked at runtime.
//
// Feature maps are HWC. A plane view points at pixel (0, 0), channel 0 of a
// region; consecutive pixels are `pixel_stride` elements apart and rows
// `row_stride` elements apart. Inputs of a k x k convolution must be readable
// (and zero) for k / 2 pixels around the region.

#pragma once

#include <cstddef>
#include <string_view>

namespace meshboost::kernels {

template <typename T>
struct ConstPlane {
    const T* data = nullptr;
    std::ptrdiff_t pixel_stride = 0;
    std::ptrdiff_t row_stride = 0;

    const T*
    pixel(std::ptrdiff_t y, std::ptrdiff_t x) const {
        return data + y * row_stride + x * pixel_stride;
    }
};

template <typename T>
struct Plane {
    T* data = nullptr;
    std::ptrdiff_t pixel_stride = 0;
    std::ptrdiff_t row_stride = 0;

    T*
    pixel(std::ptrdiff_t y, std::ptrdiff_t x) const {
        return data + y * row_stride + x * pixel_stride;
    }
    operator ConstPlane<T>() const {
        return {data, pixel_stride, row_stride};
    }
};

struct ConvShape {
    int height = 0;
    int width = 0;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;  // odd
};

/// out = (accumulate ? out : bias or 0) + conv(in, weights).
/// weights are [kernel][kernel][in_channels][out_channels].
template <typename T>
using ConvForwardFn = void (*)(const ConvShape& shape,
                               ConstPlane<T> in,
                               const T* weights,
                               const T* bias,
                               Plane<T> out,
                               bool accumulate);

/// grad_weights += correlation of `in` with `grad_out`; grad_bias (if non-null)
/// += per-channel sum of grad_out.
template <typename T>
using ConvWeightGradFn = void (*)(const ConvShape& shape,
                                  ConstPlane<T> in,
                                  ConstPlane<T> grad_out,
                                  T* grad_weights,
                                  T* grad_bias);

template <typename T>
struct KernelTable {
    ConvForwardFn<T> conv_forward = nullptr;
    ConvWeightGradFn<T> conv_weight_grad = nullptr;
};

enum class Isa { Scalar, Avx2 };

std::string_view
to_string(Isa isa);

/// Whether the variant was compiled in and the CPU supports it.
bool
isa_available(Isa isa);

/// Best available variant unless overridden by MESHBOOST_ISA=scalar|avx2.
Isa
default_isa();

/// Process-wide kernel selection. Not thread-safe against concurrent calls.
Isa
active_isa();
void
set_active_isa(Isa isa);

const KernelTable<float>&
table(Isa isa);

template <typename T>
const KernelTable<T>&
active_table();

/// Scalar reference kernels.
template <typename T>
void
conv_forward_reference(const ConvShape& shape,
                       ConstPlane<T> in,
                       const T* weights,
                       const T* bias,
                       Plane<T> out,
                       bool accumulate);

template <typename T>
void
conv_weight_grad_reference(const ConvShape& shape,
                           ConstPlane<T> in,
                           ConstPlane<T> grad_out,
                           T* grad_weights,
                           T* grad_bias);

}  // namespace meshboost::kernels
