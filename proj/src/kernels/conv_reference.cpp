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

#include "meshboost/kernels.hpp"

namespace meshboost::kernels {

template <typename T>
void
conv_forward_reference(const ConvShape& s, ConstPlane<T> in, const T* weights, const T* bias, Plane<T> out,
                       bool accumulate) {
    const int pad = s.kernel / 2;
    const int cin = s.in_channels;
    const int cout = s.out_channels;
    for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
            T* o = out.pixel(y, x);
            if (!accumulate) {
                for (int co = 0; co < cout; ++co) {
                    o[co] = bias ? bias[co] : T(0);
                }
            }
            for (int ky = 0; ky < s.kernel; ++ky) {
                for (int kx = 0; kx < s.kernel; ++kx) {
                    const T* src = in.pixel(y + ky - pad, x + kx - pad);
                    const T* w = weights + static_cast<std::ptrdiff_t>(ky * s.kernel + kx) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const T a = src[ci];
                        const T* wr = w + static_cast<std::ptrdiff_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) {
                            o[co] += a * wr[co];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void
conv_weight_grad_reference(const ConvShape& s, ConstPlane<T> in, ConstPlane<T> grad_out, T* grad_weights,
                           T* grad_bias) {
    const int pad = s.kernel / 2;
    const int cin = s.in_channels;
    const int cout = s.out_channels;
    for (int ky = 0; ky < s.kernel; ++ky) {
        for (int kx = 0; kx < s.kernel; ++kx) {
            T* gw = grad_weights + static_cast<std::ptrdiff_t>(ky * s.kernel + kx) * cin * cout;
            for (int y = 0; y < s.height; ++y) {
                for (int x = 0; x < s.width; ++x) {
                    const T* src = in.pixel(y + ky - pad, x + kx - pad);
                    const T* g = grad_out.pixel(y, x);
                    for (int ci = 0; ci < cin; ++ci) {
                        const T a = src[ci];
                        T* row = gw + static_cast<std::ptrdiff_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) {
                            row[co] += a * g[co];
                        }
                    }
                }
            }
        }
    }
    if (grad_bias) {
        for (int y = 0; y < s.height; ++y) {
            for (int x = 0; x < s.width; ++x) {
                const T* g = grad_out.pixel(y, x);
                for (int co = 0; co < cout; ++co) {
                    grad_bias[co] += g[co];
                }
            }
        }
    }
}

template void conv_forward_reference<float>(const ConvShape&, ConstPlane<float>, const float*, const float*,
                                             Plane<float>, bool);
template void conv_forward_reference<double>(const ConvShape&, ConstPlane<double>, const double*, const double*,
                                              Plane<double>, bool);
template void conv_weight_grad_reference<float>(const ConvShape&, ConstPlane<float>, ConstPlane<float>, float*,
                                                 float*);
template void conv_weight_grad_reference<double>(const ConvShape&, ConstPlane<double>, ConstPlane<double>, double*,
                                                  double*);

}  // namespace meshboost::kernels
