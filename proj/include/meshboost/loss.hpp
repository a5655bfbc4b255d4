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

#include <cmath>
#include <span>
#include <string>

#include "meshboost/common.hpp"

namespace meshboost::training {

/// Mean absolute error over flattened fields, accumulated in double.
template <typename T>
double
mae_loss(std::span<const T> prediction, std::span<const T> target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        throw InvalidArgument("mae_loss: length mismatch or empty input (" + std::to_string(prediction.size()) +
                              " vs " + std::to_string(target.size()) + ")");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        sum += std::abs(static_cast<double>(prediction[i]) - static_cast<double>(target[i]));
    }
    return sum / static_cast<double>(prediction.size());
}

}  // namespace meshboost::training
