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

// AVX2 + FMA convolution kernels. This translation unit is compiled with
// -mavx2 -mfma and must only be entered after a runtime CPU check.

#include "kernels_internal.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace meshboost::kernels::avx2 {

namespace {

// Register tile: kPx output pixels x (8 * NV) output channels.
constexpr int kPx = 6;
constexpr int kCi = 6;

template <int NPX, int NV>
inline void
forward_tile(const ConvShape& s, ConstPlane<float> in, const float* weights, const float* bias, Plane<float> out,
             bool accumulate, int y, int x0, int co0) {
    const int pad = s.kernel / 2;
    const int cin = s.in_channels;
    const int cout = s.out_channels;
    __m256 acc[NPX][NV];
    for (int p = 0; p < NPX; ++p) {
        for (int v = 0; v < NV; ++v) {
            if (accumulate) {
                acc[p][v] = _mm256_loadu_ps(out.pixel(y, x0 + p) + co0 + 8 * v);
            } else if (bias) {
                acc[p][v] = _mm256_loadu_ps(bias + co0 + 8 * v);
            } else {
                acc[p][v] = _mm256_setzero_ps();
            }
        }
    }
    for (int ky = 0; ky < s.kernel; ++ky) {
        for (int kx = 0; kx < s.kernel; ++kx) {
            const float* src[NPX];
            for (int p = 0; p < NPX; ++p) {
                src[p] = in.pixel(y + ky - pad, x0 + p + kx - pad);
            }
            const float* w = weights + static_cast<std::ptrdiff_t>(ky * s.kernel + kx) * cin * cout + co0;
            for (int ci = 0; ci < cin; ++ci, w += cout) {
                __m256 wv[NV];
                for (int v = 0; v < NV; ++v) {
                    wv[v] = _mm256_loadu_ps(w + 8 * v);
                }
                for (int p = 0; p < NPX; ++p) {
                    const __m256 a = _mm256_broadcast_ss(src[p] + ci);
                    for (int v = 0; v < NV; ++v) {
                        acc[p][v] = _mm256_fmadd_ps(a, wv[v], acc[p][v]);
                    }
                }
            }
        }
    }
    for (int p = 0; p < NPX; ++p) {
        for (int v = 0; v < NV; ++v) {
            _mm256_storeu_ps(out.pixel(y, x0 + p) + co0 + 8 * v, acc[p][v]);
        }
    }
}

template <int NV>
inline void
forward_row_chunk(const ConvShape& s, ConstPlane<float> in, const float* weights, const float* bias, Plane<float> out,
                  bool accumulate, int y, int co0) {
    int x = 0;
    for (; x + kPx <= s.width; x += kPx) {
        forward_tile<kPx, NV>(s, in, weights, bias, out, accumulate, y, x, co0);
    }
    switch (s.width - x) {
        case 5: forward_tile<5, NV>(s, in, weights, bias, out, accumulate, y, x, co0); break;
        case 4: forward_tile<4, NV>(s, in, weights, bias, out, accumulate, y, x, co0); break;
        case 3: forward_tile<3, NV>(s, in, weights, bias, out, accumulate, y, x, co0); break;
        case 2: forward_tile<2, NV>(s, in, weights, bias, out, accumulate, y, x, co0); break;
        case 1: forward_tile<1, NV>(s, in, weights, bias, out, accumulate, y, x, co0); break;
        default: break;
    }
}

// Output channels [co0, cout) with cout - co0 < 8.
void
forward_channel_tail(const ConvShape& s, ConstPlane<float> in, const float* weights, const float* bias,
                     Plane<float> out, bool accumulate, int co0) {
    const int pad = s.kernel / 2;
    const int cin = s.in_channels;
    const int cout = s.out_channels;
    for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
            float* o = out.pixel(y, x);
            for (int co = co0; co < cout; ++co) {
                float acc = accumulate ? o[co] : (bias ? bias[co] : 0.0f);
                for (int ky = 0; ky < s.kernel; ++ky) {
                    for (int kx = 0; kx < s.kernel; ++kx) {
                        const float* src = in.pixel(y + ky - pad, x + kx - pad);
                        const float* w =
                            weights + static_cast<std::ptrdiff_t>(ky * s.kernel + kx) * cin * cout + co;
                        for (int ci = 0; ci < cin; ++ci) {
                            acc += src[ci] * w[static_cast<std::ptrdiff_t>(ci) * cout];
                        }
                    }
                }
                o[co] = acc;
            }
        }
    }
}

template <int NCI, int NV>
inline void
weight_grad_tile(const ConvShape& s, ConstPlane<float> in, ConstPlane<float> grad_out, float* gw, int ky, int kx,
                 int ci0, int co0) {
    const int pad = s.kernel / 2;
    const int cout = s.out_channels;
    __m256 acc[NCI][NV];
    for (int i = 0; i < NCI; ++i) {
        for (int v = 0; v < NV; ++v) {
            acc[i][v] = _mm256_loadu_ps(gw + static_cast<std::ptrdiff_t>(ci0 + i) * cout + co0 + 8 * v);
        }
    }
    for (int y = 0; y < s.height; ++y) {
        const float* src = in.pixel(y + ky - pad, kx - pad) + ci0;
        const float* g = grad_out.pixel(y, 0) + co0;
        for (int x = 0; x < s.width; ++x, src += in.pixel_stride, g += grad_out.pixel_stride) {
            __m256 gv[NV];
            for (int v = 0; v < NV; ++v) {
                gv[v] = _mm256_loadu_ps(g + 8 * v);
            }
            for (int i = 0; i < NCI; ++i) {
                const __m256 a = _mm256_broadcast_ss(src + i);
                for (int v = 0; v < NV; ++v) {
                    acc[i][v] = _mm256_fmadd_ps(a, gv[v], acc[i][v]);
                }
            }
        }
    }
    for (int i = 0; i < NCI; ++i) {
        for (int v = 0; v < NV; ++v) {
            _mm256_storeu_ps(gw + static_cast<std::ptrdiff_t>(ci0 + i) * cout + co0 + 8 * v, acc[i][v]);
        }
    }
}

template <int NV>
inline void
weight_grad_chunk(const ConvShape& s, ConstPlane<float> in, ConstPlane<float> grad_out, float* gw, int ky, int kx,
                  int co0) {
    const int cin = s.in_channels;
    int ci = 0;
    for (; ci + kCi <= cin; ci += kCi) {
        weight_grad_tile<kCi, NV>(s, in, grad_out, gw, ky, kx, ci, co0);
    }
    switch (cin - ci) {
        case 5: weight_grad_tile<5, NV>(s, in, grad_out, gw, ky, kx, ci, co0); break;
        case 4: weight_grad_tile<4, NV>(s, in, grad_out, gw, ky, kx, ci, co0); break;
        case 3: weight_grad_tile<3, NV>(s, in, grad_out, gw, ky, kx, ci, co0); break;
        case 2: weight_grad_tile<2, NV>(s, in, grad_out, gw, ky, kx, ci, co0); break;
        case 1: weight_grad_tile<1, NV>(s, in, grad_out, gw, ky, kx, ci, co0); break;
        default: break;
    }
}

}  // namespace

void
conv_forward(const ConvShape& s, ConstPlane<float> in, const float* weights, const float* bias, Plane<float> out,
             bool accumulate) {
    const int cout = s.out_channels;
    int co = 0;
    for (; co + 16 <= cout; co += 16) {
        for (int y = 0; y < s.height; ++y) {
            forward_row_chunk<2>(s, in, weights, bias, out, accumulate, y, co);
        }
    }
    if (co + 8 <= cout) {
        for (int y = 0; y < s.height; ++y) {
            forward_row_chunk<1>(s, in, weights, bias, out, accumulate, y, co);
        }
        co += 8;
    }
    if (co < cout) {
        forward_channel_tail(s, in, weights, bias, out, accumulate, co);
    }
}

void
conv_weight_grad(const ConvShape& s, ConstPlane<float> in, ConstPlane<float> grad_out, float* grad_weights,
                 float* grad_bias) {
    const int pad = s.kernel / 2;
    const int cin = s.in_channels;
    const int cout = s.out_channels;
    for (int ky = 0; ky < s.kernel; ++ky) {
        for (int kx = 0; kx < s.kernel; ++kx) {
            float* gw = grad_weights + static_cast<std::ptrdiff_t>(ky * s.kernel + kx) * cin * cout;
            int co = 0;
            for (; co + 16 <= cout; co += 16) {
                weight_grad_chunk<2>(s, in, grad_out, gw, ky, kx, co);
            }
            if (co + 8 <= cout) {
                weight_grad_chunk<1>(s, in, grad_out, gw, ky, kx, co);
                co += 8;
            }
            if (co < cout) {
                for (int y = 0; y < s.height; ++y) {
                    for (int x = 0; x < s.width; ++x) {
                        const float* src = in.pixel(y + ky - pad, x + kx - pad);
                        const float* g = grad_out.pixel(y, x);
                        for (int ci = 0; ci < cin; ++ci) {
                            for (int c = co; c < cout; ++c) {
                                gw[static_cast<std::ptrdiff_t>(ci) * cout + c] += src[ci] * g[c];
                            }
                        }
                    }
                }
            }
        }
    }
    if (grad_bias) {
        int co = 0;
        for (; co + 8 <= cout; co += 8) {
            __m256 acc = _mm256_loadu_ps(grad_bias + co);
            for (int y = 0; y < s.height; ++y) {
                for (int x = 0; x < s.width; ++x) {
                    acc = _mm256_add_ps(acc, _mm256_loadu_ps(grad_out.pixel(y, x) + co));
                }
            }
            _mm256_storeu_ps(grad_bias + co, acc);
        }
        for (; co < cout; ++co) {
            float acc = grad_bias[co];
            for (int y = 0; y < s.height; ++y) {
                for (int x = 0; x < s.width; ++x) {
                    acc += grad_out.pixel(y, x)[co];
                }
            }
            grad_bias[co] = acc;
        }
    }
}

const bool kCompiled = true;

}  // namespace meshboost::kernels::avx2

#else

namespace meshboost::kernels::avx2 {

void
conv_forward(const ConvShape&, ConstPlane<float>, const float*, const float*, Plane<float>, bool) {}

void
conv_weight_grad(const ConvShape&, ConstPlane<float>, ConstPlane<float>, float*, float*) {}

const bool kCompiled = false;

}  // namespace meshboost::kernels::avx2

#endif
