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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace meshboost::model {

/// Dense height x width x channels array, channels fastest.
template <typename T>
class BasicTensor {
 public:
    BasicTensor() = default;
    BasicTensor(int height, int width, int channels, T fill = T(0))
        : height_(height),
          width_(width),
          channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {}

    int
    height() const {
        return height_;
    }
    int
    width() const {
        return width_;
    }
    int
    channels() const {
        return channels_;
    }
    std::size_t
    size() const {
        return data_.size();
    }

    T&
    at(int y, int x, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    const T&
    at(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<T>
    values() {
        return data_;
    }
    std::span<const T>
    values() const {
        return data_;
    }
    T*
    data() {
        return data_.data();
    }
    const T*
    data() const {
        return data_.data();
    }

    std::string
    shape_string() const {
        return "(" + std::to_string(height_) + ", " + std::to_string(width_) + ", " + std::to_string(channels_) + ")";
    }

    template <typename U>
    BasicTensor<U>
    cast() const {
        BasicTensor<U> out(height_, width_, channels_);
        for (std::size_t i = 0; i < data_.size(); ++i) {
            out.values()[i] = static_cast<U>(data_[i]);
        }
        return out;
    }

    bool
    operator==(const BasicTensor&) const = default;

 private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

}  // namespace meshboost::model
