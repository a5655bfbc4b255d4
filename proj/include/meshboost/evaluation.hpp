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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshboost/dataset.hpp"
#include "meshboost/stress_field.hpp"
#include "meshboost/training.hpp"

namespace meshboost::evaluation {

/// ARSE denominators are clamped at this fraction of the dataset mean stress.
inline constexpr double kFloorFraction = 1e-3;

/// Mean over cases and pixels of |pred - truth| / max(truth, floor).
double
arse(std::span<const StressField> predictions, std::span<const StressField> truths, double floor);

/// Same metric for one case.
double
arse_case(const StressField& prediction, const StressField& truth, double floor);

struct MaxStressError {
    double error = 0.0;  // |max pred - max truth| / max truth
    double pred_max = 0.0;
    double true_max = 0.0;
    int pred_row = 0;
    int pred_col = 0;
    int true_row = 0;
    int true_col = 0;
};

MaxStressError
max_stress_error(const StressField& prediction, const StressField& truth);

/// Keys cubic convolution (a = -1/2) on cell centers, linear extrapolation
/// past the border, result clamped at 0.
StressField
bicubic_baseline(const StressField& low, int r);

struct TimingRow {
    int scale = 0;
    int resolution = 0;
    double coarse_fem_s = 0.0;
    double inference_s = 0.0;
    double pipeline_s = 0.0;  // coarse FEM + inference, timed together
    double fem_s = 0.0;       // direct fine-mesh solve
    double speedup = 0.0;     // fem_s / pipeline_s
};

struct TimingTable {
    int repetitions = 0;
    std::string hardware;
    std::vector<TimingRow> rows;
};

/// Free-form CPU/ISA description of this machine.
std::string
hardware_descriptor();

/// For each model (one per scale): per case, the median over `repetitions`
/// timed runs after one warm-up of (i) coarse solve + normalize + forward +
/// denormalize and (ii) the direct solve at 32·r. Rows report the mean over
/// cases of those medians.
TimingTable
timing_benchmark(std::span<const dataset::CaseSpec> cases,
                 const fem::Material& material,
                 std::span<const training::InferenceModel> models,
                 int repetitions);

/// Prediction at 32·r for a 32² coarse field.
StressField
infer(const training::InferenceModel& model, const StressField& low);

struct CaseResult {
    std::string id;
    StressField low;
    StressField truth;
    StressField prediction;
    StressField baseline;
    double arse = 0.0;
    double baseline_arse = 0.0;
    MaxStressError max_error;
    MaxStressError baseline_max_error;
};

struct EvalReport {
    int scale = 0;
    double arse = 0.0;
    double baseline_arse = 0.0;
    double floor = 0.0;
    std::vector<double> max_stress_errors;
    std::vector<double> baseline_max_stress_errors;
    std::optional<TimingRow> timing;
    std::string hardware;
    std::string dataset_digest;
    std::vector<CaseResult> cases;

    double
    median_max_stress_error() const;
    double
    median_baseline_max_stress_error() const;
    std::string
    to_json() const;
};

struct EvalOptions {
    dataset::Split split = dataset::Split::Test;
    /// Debug: score the ground truth against itself.
    bool truth_as_prediction = false;
};

EvalReport
evaluate(const training::InferenceModel& model, const dataset::Manifest& manifest, const EvalOptions& options = {});

/// RGB raster of the four panels (input, truth, prediction, signed
/// difference) side by side. The first three share one color scale; the
/// difference uses a symmetric diverging scale centered at 0.
struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
    double stress_min = 0.0;
    double stress_max = 0.0;
    double diff_limit = 0.0;
};

Heatmap
render_panels(const StressField& low, const StressField& truth, const StressField& prediction);

void
write_png(const std::filesystem::path& path, const Heatmap& image);

/// Single-field heatmap on its own scale.
void
write_field_png(const std::filesystem::path& path, const StressField& field);

inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportCsv = "cases.csv";

/// report.json, cases.csv, and one <id>.png per case. Throws on an empty case list.
void
emit_report(const EvalReport& report, const std::filesystem::path& out_dir, bool heatmaps = true);

}  // namespace meshboost::evaluation
