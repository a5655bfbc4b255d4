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
#include <vector>

#include "meshboost/kernels.hpp"
#include "meshboost/tensor.hpp"

namespace meshboost::model::detail {

/// HWC buffer with a zero border of `pad` pixels. Kernels only ever write the
/// interior, so the border stays zero for the lifetime of the allocation.
template <typename T>
class FeatureMap {
 public:
    FeatureMap() = default;
    FeatureMap(int height, int width, int channels, int pad) {
        reset(height, width, channels, pad);
    }

    void
    reset(int height, int width, int channels, int pad) {
        if (height == height_ && width == width_ && channels == channels_ && pad == pad_) {
            return;
        }
        height_ = height;
        width_ = width;
        channels_ = channels;
        pad_ = pad;
        data_.assign(static_cast<std::size_t>(height + 2 * pad) * (width + 2 * pad) * channels, T(0));
    }

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

    kernels::Plane<T>
    view(int channel_offset = 0) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(width_ + 2 * pad_) * channels_;
        T* origin = data_.data() + pad_ * row + static_cast<std::ptrdiff_t>(pad_) * channels_ + channel_offset;
        return {origin, channels_, row};
    }
    kernels::ConstPlane<T>
    view(int channel_offset = 0) const {
        return const_cast<FeatureMap*>(this)->view(channel_offset);
    }

    T*
    pixel(int y, int x, int channel_offset = 0) {
        return view(channel_offset).pixel(y, x);
    }
    const T*
    pixel(int y, int x, int channel_offset = 0) const {
        return view(channel_offset).pixel(y, x);
    }

    void
    load(const BasicTensor<T>& t, int channel_offset = 0) {
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                std::copy_n(&t.at(y, x, 0), t.channels(), pixel(y, x, channel_offset));
            }
        }
    }

    BasicTensor<T>
    store(int channel_offset = 0, int count = -1) const {
        if (count < 0) {
            count = channels_ - channel_offset;
        }
        BasicTensor<T> t(height_, width_, count);
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                std::copy_n(pixel(y, x, channel_offset), count, &t.at(y, x, 0));
            }
        }
        return t;
    }

    void
    fill_interior(T value, int channel_offset = 0, int count = -1) {
        if (count < 0) {
            count = channels_ - channel_offset;
        }
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                std::fill_n(pixel(y, x, channel_offset), count, value);
            }
        }
    }

 private:
    int height_ = -1;
    int width_ = -1;
    int channels_ = -1;
    int pad_ = -1;
    std::vector<T> data_;
};

/// dst[c] (+)= src[c] over the interior, `count` channels.
template <typename T>
void
copy_channels(const FeatureMap<T>& src, int src_offset, FeatureMap<T>& dst, int dst_offset, int count,
              bool accumulate) {
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const T* s = src.pixel(y, x, src_offset);
            T* d = dst.pixel(y, x, dst_offset);
            if (accumulate) {
                for (int c = 0; c < count; ++c) {
                    d[c] += s[c];
                }
            } else {
                std::copy_n(s, count, d);
            }
        }
    }
}

}  // namespace meshboost::model::detail
