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

#include "meshboost/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "meshboost/common.hpp"

namespace meshboost::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'M', 'B', 'C', 'K', 'P', 'T', '0', '1'};

std::string
read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t
element_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) {
            throw FormatError("negative blob dimension");
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

const Blob*
Checkpoint::find(const std::string& name) const {
    for (const auto& b : blobs) {
        if (b.name == name) {
            return &b;
        }
    }
    return nullptr;
}

void
write_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
    json meta = json::parse(checkpoint.metadata, nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) {
        throw InvalidArgument("write_checkpoint: metadata must be a JSON object");
    }
    const auto& c = checkpoint.config;
    json blobs = json::array();
    std::size_t offset = 0;
    for (const auto& b : checkpoint.blobs) {
        if (element_count(b.shape) != b.values.size()) {
            throw InvalidArgument("write_checkpoint: blob " + b.name + " has " + std::to_string(b.values.size()) +
                                  " values for its shape");
        }
        const std::size_t bytes = b.values.size() * sizeof(float);
        blobs.push_back({{"name", b.name},
                         {"shape", b.shape},
                         {"offset", offset},
                         {"count", b.values.size()},
                         {"fnv1a64", hex64(fnv1a64(b.values.data(), bytes))}});
        offset += bytes;
    }
    const json header = {{"format", "meshboost-checkpoint"},
                         {"version", 1},
                         {"model",
                          {{"blocks", c.blocks},
                           {"layers", c.layers},
                           {"filters", c.filters},
                           {"kernel", c.kernel},
                           {"scale", c.scale}}},
                         {"meta", meta},
                         {"blobs", blobs}};
    const std::string text = header.dump();
    const std::uint64_t length = text.size();

    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(kMagic, sizeof kMagic);
        out.write(reinterpret_cast<const char*>(&length), sizeof length);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& b : checkpoint.blobs) {
            out.write(reinterpret_cast<const char*>(b.values.data()),
                      static_cast<std::streamsize>(b.values.size() * sizeof(float)));
        }
        if (!out.flush()) {
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

Checkpoint
read_checkpoint(const fs::path& path) {
    const std::string bytes = read_all(path);
    const std::string where = path.string() + ": ";
    if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw FormatError(where + "not a meshboost checkpoint (bad magic)");
    }
    std::uint64_t length = 0;
    std::memcpy(&length, bytes.data() + sizeof kMagic, sizeof length);
    const std::size_t data_start = sizeof kMagic + 8 + length;
    if (length > bytes.size() || data_start > bytes.size()) {
        throw FormatError(where + "truncated header");
    }
    Checkpoint cp;
    try {
        const json header = json::parse(bytes.substr(sizeof kMagic + 8, length));
        if (header.at("format") != "meshboost-checkpoint" || header.at("version") != 1) {
            throw FormatError(where + "unsupported checkpoint format or version");
        }
        const auto& m = header.at("model");
        cp.config = {m.at("blocks").get<int>(), m.at("layers").get<int>(), m.at("filters").get<int>(),
                     m.at("kernel").get<int>(), m.at("scale").get<int>()};
        cp.metadata = header.at("meta").dump();
        for (const auto& b : header.at("blobs")) {
            Blob blob;
            blob.name = b.at("name").get<std::string>();
            blob.shape = b.at("shape").get<std::vector<int>>();
            const auto offset = b.at("offset").get<std::size_t>();
            const auto count = b.at("count").get<std::size_t>();
            if (count != element_count(blob.shape)) {
                throw FormatError(where + "blob " + blob.name + " count disagrees with its shape");
            }
            const std::size_t nbytes = count * sizeof(float);
            if (offset > bytes.size() - data_start || nbytes > bytes.size() - data_start - offset) {
                throw FormatError(where + "blob " + blob.name + " is truncated");
            }
            blob.values.resize(count);
            std::memcpy(blob.values.data(), bytes.data() + data_start + offset, nbytes);
            if (hex64(fnv1a64(blob.values.data(), nbytes)) != b.at("fnv1a64").get<std::string>()) {
                throw FormatError(where + "integrity check failed for blob " + blob.name);
            }
            cp.blobs.push_back(std::move(blob));
        }
    } catch (const json::exception& e) {
        throw FormatError(where + "malformed header: " + e.what());
    }
    try {
        cp.config.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(where + e.what());
    }
    return cp;
}

std::vector<Blob>
weight_blobs(const ModelWeights& weights, const std::string& prefix) {
    std::vector<Blob> out;
    for (const auto& p : weights.parameters()) {
        out.push_back({prefix + p.name, p.shape, p.values});
    }
    return out;
}

ModelWeights
weights_from_blobs(const ModelConfig& config, std::span<const Blob> blobs, const std::string& prefix) {
    ModelWeights w = ModelWeights::zeros(config);
    for (auto& p : w.parameters()) {
        const std::string name = prefix + p.name;
        const Blob* found = nullptr;
        for (const auto& b : blobs) {
            if (b.name == name) {
                found = &b;
                break;
            }
        }
        if (found == nullptr) {
            throw FormatError("checkpoint is missing blob " + name);
        }
        if (found->shape != p.shape) {
            throw FormatError("checkpoint blob " + name + " has the wrong shape for this model config");
        }
        p.values = found->values;
    }
    return w;
}

std::string
file_digest(const fs::path& path) {
    const std::string bytes = read_all(path);
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace meshboost::model
