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
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace meshboost {

/// Square grid of von Mises stress values in MPa, one value per element.
/// Row-major, row 0 is the top of the domain.
class StressField {
 public:
    StressField() = default;
    explicit StressField(int resolution, double fill = 0.0);
    StressField(int resolution, std::vector<double> values);

    int
    resolution() const {
        return resolution_;
    }
    std::size_t
    size() const {
        return values_.size();
    }

    double&
    at(int row, int col) {
        return values_[static_cast<std::size_t>(row) * resolution_ + col];
    }
    double
    at(int row, int col) const {
        return values_[static_cast<std::size_t>(row) * resolution_ + col];
    }

    std::span<double>
    values() {
        return values_;
    }
    std::span<const double>
    values() const {
        return values_;
    }

    double
    max() const;
    double
    mean() const;

    /// Throws InvalidArgument unless every value is finite and >= 0.
    void
    validate() const;

    /// Values rounded through float32, as they are stored on disk.
    StressField
    quantized() const;

    bool
    operator==(const StressField&) const = default;

 private:
    int resolution_ = 0;
    std::vector<double> values_;
};

/// Counter-clockwise rotation by k quarter turns (k taken mod 4).
/// For k = 1, [[a, b], [c, d]] becomes [[b, d], [a, c]].
StressField
rotate90(const StressField& field, int k);

/// Mean over non-overlapping factor x factor blocks.
StressField
block_average(const StressField& field, int factor);

// SMF1 container: "SMF1", u32 resolution, u32 reserved, then row-major
// little-endian float32 values.
inline constexpr std::size_t kSmfHeaderSize = 16;

std::vector<std::uint8_t>
encode_smf(const StressField& field);

StressField
decode_smf(std::span<const std::uint8_t> bytes);

void
write_smf(const std::filesystem::path& path, const StressField& field);

StressField
read_smf(const std::filesystem::path& path);

}  // namespace meshboost
