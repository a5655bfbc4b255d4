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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "meshboost/model.hpp"

namespace meshboost::model {

/// Named float32 array stored in a checkpoint.
struct Blob {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;

    bool
    operator==(const Blob&) const = default;
};

/// Container layout:
///   "MBCKPT01" | u64 LE header length | JSON header | blob bytes
/// The header carries the model config, caller metadata (a JSON object), and
/// per-blob {name, shape, offset, count, fnv1a64}. Blob bytes are row-major
/// little-endian float32.
struct Checkpoint {
    ModelConfig config;
    std::string metadata = "{}";  // JSON object text
    std::vector<Blob> blobs;

    const Blob*
    find(const std::string& name) const;
};

void
write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws FormatError on bad magic, truncation, or a blob whose digest does
/// not match; IoError when the file cannot be read.
Checkpoint
read_checkpoint(const std::filesystem::path& path);

/// One blob per parameter, named prefix + parameter name.
std::vector<Blob>
weight_blobs(const ModelWeights& weights, const std::string& prefix = "");

/// Inverse of weight_blobs. Throws FormatError on a missing blob or shape mismatch.
ModelWeights
weights_from_blobs(const ModelConfig& config, std::span<const Blob> blobs, const std::string& prefix = "");

/// FNV-1a of the file bytes, as 16 hex digits.
std::string
file_digest(const std::filesystem::path& path);

}  // namespace meshboost::model
