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

#include "meshboost/stress_field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "meshboost/common.hpp"

namespace meshboost {

namespace {

static_assert(std::endian::native == std::endian::little, "SMF1 I/O assumes a little-endian host");

void
put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t
get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::uint32_t kMaxResolution = 1u << 14;

}  // namespace

StressField::StressField(int resolution, double fill)
    : resolution_(resolution), values_(static_cast<std::size_t>(resolution) * resolution, fill) {
    if (resolution < 1) {
        throw InvalidArgument("StressField: resolution must be >= 1, got " + std::to_string(resolution));
    }
}

StressField::StressField(int resolution, std::vector<double> values)
    : resolution_(resolution), values_(std::move(values)) {
    if (resolution < 1 || values_.size() != static_cast<std::size_t>(resolution) * resolution) {
        throw InvalidArgument("StressField: " + std::to_string(values_.size()) + " values do not form a " +
                              std::to_string(resolution) + "x" + std::to_string(resolution) + " grid");
    }
}

double
StressField::max() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double
StressField::mean() const {
    if (values_.empty()) {
        return 0.0;
    }
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

void
StressField::validate() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
            throw InvalidArgument("StressField: value " + std::to_string(values_[i]) + " at index " +
                                  std::to_string(i) + " is negative or not finite");
        }
    }
}

StressField
StressField::quantized() const {
    StressField out = *this;
    for (auto& v : out.values_) {
        v = static_cast<double>(static_cast<float>(v));
    }
    return out;
}

StressField
rotate90(const StressField& field, int k) {
    k = ((k % 4) + 4) % 4;
    const int n = field.resolution();
    StressField out(n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            switch (k) {
                case 0: out.at(r, c) = field.at(r, c); break;
                case 1: out.at(r, c) = field.at(c, n - 1 - r); break;
                case 2: out.at(r, c) = field.at(n - 1 - r, n - 1 - c); break;
                default: out.at(r, c) = field.at(n - 1 - c, r); break;
            }
        }
    }
    return out;
}

StressField
block_average(const StressField& field, int factor) {
    const int n = field.resolution();
    if (factor < 1 || n % factor != 0) {
        throw InvalidArgument("block_average: factor " + std::to_string(factor) + " does not divide resolution " +
                              std::to_string(n));
    }
    const int m = n / factor;
    StressField out(m);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
            double sum = 0.0;
            for (int dr = 0; dr < factor; ++dr) {
                for (int dc = 0; dc < factor; ++dc) {
                    sum += field.at(r * factor + dr, c * factor + dc);
                }
            }
            out.at(r, c) = sum * inv;
        }
    }
    return out;
}

std::vector<std::uint8_t>
encode_smf(const StressField& field) {
    std::vector<std::uint8_t> out;
    out.reserve(kSmfHeaderSize + 4 * field.size());
    for (char ch : {'S', 'M', 'F', '1'}) {
        out.push_back(static_cast<std::uint8_t>(ch));
    }
    put_u32(out, static_cast<std::uint32_t>(field.resolution()));
    put_u32(out, 0);
    put_u32(out, 0);
    for (double v : field.values()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

StressField
decode_smf(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kSmfHeaderSize) {
        throw FormatError("SMF1: truncated header (" + std::to_string(bytes.size()) + " bytes)");
    }
    if (std::memcmp(bytes.data(), "SMF1", 4) != 0) {
        throw FormatError("SMF1: bad magic");
    }
    const std::uint32_t n = get_u32(bytes.data() + 4);
    if (n == 0 || n > kMaxResolution) {
        throw FormatError("SMF1: implausible resolution " + std::to_string(n));
    }
    const std::size_t count = static_cast<std::size_t>(n) * n;
    if (bytes.size() != kSmfHeaderSize + 4 * count) {
        throw FormatError("SMF1: expected " + std::to_string(kSmfHeaderSize + 4 * count) + " bytes for resolution " +
                          std::to_string(n) + ", got " + std::to_string(bytes.size()));
    }
    std::vector<double> values(count);
    const std::uint8_t* p = bytes.data() + kSmfHeaderSize;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        values[i] = static_cast<double>(std::bit_cast<float>(get_u32(p)));
    }
    return StressField(static_cast<int>(n), std::move(values));
}

void
write_smf(const std::filesystem::path& path, const StressField& field) {
    const auto bytes = encode_smf(field);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

StressField
read_smf(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_smf(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace meshboost
