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

#include "meshboost/kernels.hpp"

namespace meshboost::kernels::avx2 {

extern const bool kCompiled;

void
conv_forward(const ConvShape& shape, ConstPlane<float> in, const float* weights, const float* bias, Plane<float> out,
             bool accumulate);

void
conv_weight_grad(const ConvShape& shape, ConstPlane<float> in, ConstPlane<float> grad_out, float* grad_weights,
                 float* grad_bias);

}  // namespace meshboost::kernels::avx2
