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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meshboost/fem.hpp"
#include "meshboost/rng.hpp"
#include "meshboost/stress_field.hpp"
#include "meshboost/tensor.hpp"

namespace meshboost::dataset {

/// Mesh densities stored for every sample.
inline constexpr std::array<int, 4> kResolutions{32, 64, 128, 256};

bool
is_dataset_resolution(int n);

struct LoadWindow {
    double lo = -10.0;  // MPa, per component
    double hi = 10.0;
    double min_magnitude = 0.5;  // |q| below this is redrawn

    void
    validate() const;
    bool
    operator==(const LoadWindow&) const = default;
};

/// Supports for the three non-loaded edges.
struct ConstraintPattern {
    fem::EdgeCondition bottom;
    fem::EdgeCondition left;
    fem::EdgeCondition right;
    std::optional<fem::Corner> pinned_corner;

    std::string
    name() const;
    bool
    operator==(const ConstraintPattern&) const = default;
};

/// bottom ∈ {fixed, rollers + pinned bottom-left corner} × left, right ∈ {free, horizontal}.
std::vector<ConstraintPattern>
default_patterns();

struct GeneratorConfig {
    int count = 4;
    std::uint64_t seed = 0;
    LoadWindow window;
    std::vector<ConstraintPattern> patterns = default_patterns();
    fem::Material material = fem::kSteel;
    int jobs = 1;

    void
    validate() const;
};

struct CaseSpec {
    std::uint64_t seed = 0;
    ConstraintPattern pattern;
    double qx = 0.0;
    double qy = 0.0;

    std::array<fem::EdgeCondition, 4>
    edges() const;
    fem::PlaneStrainCase
    to_case(int n_elements, const fem::Material& material) const;
    bool
    operator==(const CaseSpec&) const = default;
};

/// Draws a pattern and a load from the window. Deterministic in the rng state.
CaseSpec
sample_case(Rng& rng, const GeneratorConfig& config);

enum class Split { None, Train, Test };

const char*
to_string(Split split);
Split
split_from_string(const std::string& s);

struct SampleRecord {
    std::string id;
    CaseSpec spec;
    double max_stress = 0.0;   // MPa, from the finest field
    double mean_stress = 0.0;  // MPa, from the finest field
    Split split = Split::None;

    bool
    operator==(const SampleRecord&) const = default;
};

/// Log-scale map g = log(1 + s / ref) / log(1 + max / ref).
struct Normalization {
    double sigma_ref = 1.0;
    double sigma_max = 1.0;

    double
    forward(double stress) const;
    double
    inverse(double g) const;
    bool
    operator==(const Normalization&) const = default;
};

struct Manifest {
    int version = 1;
    std::uint64_t master_seed = 0;
    fem::Material material = fem::kSteel;
    LoadWindow window;
    Normalization normalization;
    std::vector<SampleRecord> samples;

    /// Directory holding the manifest and the field files.
    std::filesystem::path root;

    std::filesystem::path
    field_path(const std::string& id, int resolution) const;
    StressField
    load_field(const std::string& id, int resolution) const;
    std::vector<const SampleRecord*>
    with_split(Split split) const;
    /// Mean of the per-sample mean stresses: the dataset mean used by metric floors.
    double
    mean_stress() const;

    std::string
    to_json() const;
    static Manifest
    from_json(const std::string& text, const std::filesystem::path& root);
    void
    save() const;
    static Manifest
    load(const std::filesystem::path& dir);

    bool
    operator==(const Manifest& o) const {
        return version == o.version && master_seed == o.master_seed && material.young_modulus == o.material.young_modulus &&
               material.poisson_ratio == o.material.poisson_ratio && window == o.window &&
               normalization == o.normalization && samples == o.samples;
    }
};

inline constexpr const char* kManifestName = "manifest.json";

/// Stable id of sample `index` ("s00042").
std::string
sample_id(int index);

/// Fields at every dataset resolution for one case, quantized to storage precision.
std::map<int, StressField>
solve_sample(const CaseSpec& spec, const fem::Material& material);

using Logger = std::function<void(const std::string&)>;

/// Solves `config.count` cases at all four densities into `out_dir` and writes
/// the manifest. Samples whose four field files already decode are reused.
/// Any case the solver rejects is logged and redrawn from the same stream.
Manifest
generate_dataset(const GeneratorConfig& config, const std::filesystem::path& out_dir, const Logger& log = {});

/// FNV-1a over the manifest sample table and every field file, in order.
std::string
dataset_digest(const Manifest& manifest);

/// Grid in [0, 1] for σ in [0, σ_max]. Throws on negative stress.
model::BasicTensor<double>
normalize(const StressField& field, const Normalization& norm);

StressField
denormalize(const model::BasicTensor<double>& grid, const Normalization& norm);
StressField
denormalize(const model::Tensor& grid, const Normalization& norm);

/// Seeded disjoint assignment of train_count + test_count samples; the rest get Split::None.
Manifest
split(const Manifest& manifest, int train_count, int test_count, std::uint64_t seed);

template <typename T>
model::BasicTensor<T>
rotate90(const model::BasicTensor<T>& t, int k);

template <typename T>
struct FieldPair {
    model::BasicTensor<T> low;
    model::BasicTensor<T> high;
};

/// Both fields turned counter-clockwise by k quarter turns.
template <typename T>
FieldPair<T>
augment_rotate(const FieldPair<T>& pair, int k);

}  // namespace meshboost::dataset
