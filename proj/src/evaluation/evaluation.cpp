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

#include "meshboost/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "meshboost/common.hpp"
#include "meshboost/kernels.hpp"

namespace meshboost::evaluation {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void
require_same_shape(const StressField& a, const StressField& b, const char* who) {
    if (a.resolution() != b.resolution()) {
        throw InvalidArgument(std::string(who) + ": resolution " + std::to_string(a.resolution()) + " vs " +
                              std::to_string(b.resolution()));
    }
}

double
median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double
arse_case(const StressField& prediction, const StressField& truth, double floor) {
    require_same_shape(prediction, truth, "arse");
    if (!(floor > 0.0)) {
        throw InvalidArgument("arse: floor must be > 0");
    }
    double sum = 0.0;
    const auto& p = prediction.values();
    const auto& t = truth.values();
    for (std::size_t i = 0; i < t.size(); ++i) {
        sum += std::abs(p[i] - t[i]) / std::max(t[i], floor);
    }
    return sum / static_cast<double>(t.size());
}

double
arse(std::span<const StressField> predictions, std::span<const StressField> truths, double floor) {
    if (predictions.empty() || predictions.size() != truths.size()) {
        throw InvalidArgument("arse: need equal, non-zero numbers of predictions and truths (" +
                              std::to_string(predictions.size()) + " vs " + std::to_string(truths.size()) + ")");
    }
    double sum = 0.0;
    std::size_t pixels = 0;
    for (std::size_t c = 0; c < truths.size(); ++c) {
        const std::size_t n = truths[c].values().size();
        sum += arse_case(predictions[c], truths[c], floor) * static_cast<double>(n);
        pixels += n;
    }
    return sum / static_cast<double>(pixels);
}

MaxStressError
max_stress_error(const StressField& prediction, const StressField& truth) {
    require_same_shape(prediction, truth, "max_stress_error");
    const int n = truth.resolution();
    auto argmax = [n](const StressField& f) {
        const auto& v = f.values();
        const auto idx = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
        return std::pair{idx / n, idx % n};
    };
    MaxStressError e;
    std::tie(e.pred_row, e.pred_col) = argmax(prediction);
    std::tie(e.true_row, e.true_col) = argmax(truth);
    e.pred_max = prediction.at(e.pred_row, e.pred_col);
    e.true_max = truth.at(e.true_row, e.true_col);
    if (!(e.true_max > 0.0)) {
        throw InvalidArgument("max_stress_error: ground truth is all zero");
    }
    e.error = std::abs(e.pred_max - e.true_max) / e.true_max;
    return e;
}

namespace {

double
keys_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) {
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    }
    if (t < 2.0) {
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    }
    return 0.0;
}

// Sample i of a 1-D row, extended linearly past either end.
template <typename Get>
double
extended(const Get& get, int n, int i) {
    if (n == 1) {
        return get(0);
    }
    if (i < 0) {
        return get(0) + static_cast<double>(i) * (get(1) - get(0));
    }
    if (i >= n) {
        return get(n - 1) + static_cast<double>(i - n + 1) * (get(n - 1) - get(n - 2));
    }
    return get(i);
}

struct Tap {
    int base = 0;
    std::array<double, 4> w{};
};

std::vector<Tap>
taps(int n, int r) {
    std::vector<Tap> out(static_cast<std::size_t>(n * r));
    for (int d = 0; d < n * r; ++d) {
        const double src = (d + 0.5) / r - 0.5;
        const int i = static_cast<int>(std::floor(src));
        const double f = src - i;
        Tap t;
        t.base = i - 1;
        for (int k = 0; k < 4; ++k) {
            t.w[static_cast<std::size_t>(k)] = keys_weight(f - (k - 1));
        }
        out[static_cast<std::size_t>(d)] = t;
    }
    return out;
}

}  // namespace

StressField
bicubic_baseline(const StressField& low, int r) {
    if (r < 1) {
        throw InvalidArgument("bicubic_baseline: scale must be >= 1, got " + std::to_string(r));
    }
    const int n = low.resolution();
    if (r == 1) {
        return low;
    }
    const int m = n * r;
    const auto t = taps(n, r);
    // Separable: rows first into an (n x m) buffer, then columns.
    std::vector<double> horiz(static_cast<std::size_t>(n) * m);
    for (int row = 0; row < n; ++row) {
        auto get = [&](int c) { return low.at(row, c); };
        for (int x = 0; x < m; ++x) {
            const Tap& tp = t[static_cast<std::size_t>(x)];
            double s = 0.0;
            for (int k = 0; k < 4; ++k) {
                s += tp.w[static_cast<std::size_t>(k)] * extended(get, n, tp.base + k);
            }
            horiz[static_cast<std::size_t>(row) * m + x] = s;
        }
    }
    StressField out(m);
    for (int x = 0; x < m; ++x) {
        auto get = [&](int rr) { return horiz[static_cast<std::size_t>(rr) * m + x]; };
        for (int y = 0; y < m; ++y) {
            const Tap& tp = t[static_cast<std::size_t>(y)];
            double s = 0.0;
            for (int k = 0; k < 4; ++k) {
                s += tp.w[static_cast<std::size_t>(k)] * extended(get, n, tp.base + k);
            }
            out.at(y, x) = std::max(0.0, s);
        }
    }
    return out;
}

std::string
hardware_descriptor() {
    std::string cpu = "unknown cpu";
    std::ifstream info("/proc/cpuinfo");
    for (std::string line; std::getline(info, line);) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                cpu = line.substr(colon + 2);
            }
            break;
        }
    }
    return cpu + "; " + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " hw threads; conv kernels " +
           std::string(kernels::to_string(kernels::active_isa()));
}

StressField
infer(const training::InferenceModel& model, const StressField& low) {
    if (low.resolution() != training::kLowResolution) {
        throw InvalidArgument("infer: input is " + std::to_string(low.resolution()) + "x" +
                              std::to_string(low.resolution()) + ", expected " +
                              std::to_string(training::kLowResolution) + "x" +
                              std::to_string(training::kLowResolution) + " for an output of " +
                              std::to_string(training::kLowResolution * model.scale) + "x" +
                              std::to_string(training::kLowResolution * model.scale));
    }
    model::Network<float> net(model.weights.config());
    const model::Tensor x = dataset::normalize(low, model.normalization).cast<float>();
    return dataset::denormalize(net.forward(model.weights, x), model.normalization);
}

TimingTable
timing_benchmark(std::span<const dataset::CaseSpec> cases,
                 const fem::Material& material,
                 std::span<const training::InferenceModel> models,
                 int repetitions) {
    if (repetitions < 3) {
        throw InvalidArgument("timing_benchmark: need at least 3 repetitions, got " + std::to_string(repetitions));
    }
    if (cases.empty() || models.empty()) {
        throw InvalidArgument("timing_benchmark: need at least one case and one model");
    }
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

    TimingTable table;
    table.repetitions = repetitions;
    table.hardware = hardware_descriptor();
    for (const auto& model : models) {
        TimingRow row;
        row.scale = model.scale;
        row.resolution = training::kLowResolution * model.scale;
        for (const auto& spec : cases) {
            const auto coarse_case = spec.to_case(training::kLowResolution, material);
            const auto fine_case = spec.to_case(row.resolution, material);
            std::vector<double> coarse, inference, pipeline, fine;
            for (int rep = 0; rep <= repetitions; ++rep) {
                const auto t0 = clock::now();
                const StressField low = fem::solve_case(coarse_case);
                const auto t1 = clock::now();
                const StressField pred = infer(model, low);
                const auto t2 = clock::now();
                const StressField direct = fem::solve_case(fine_case);
                const auto t3 = clock::now();
                if (rep == 0) {
                    continue;  // warm-up
                }
                coarse.push_back(seconds(t0, t1));
                inference.push_back(seconds(t1, t2));
                pipeline.push_back(seconds(t0, t2));
                fine.push_back(seconds(t2, t3));
                (void)pred;
                (void)direct;
            }
            row.coarse_fem_s += median(coarse);
            row.inference_s += median(inference);
            row.pipeline_s += median(pipeline);
            row.fem_s += median(fine);
        }
        const double n = static_cast<double>(cases.size());
        row.coarse_fem_s /= n;
        row.inference_s /= n;
        row.pipeline_s /= n;
        row.fem_s /= n;
        row.speedup = row.fem_s / row.pipeline_s;
        table.rows.push_back(row);
    }
    return table;
}

double
EvalReport::median_max_stress_error() const {
    return median(max_stress_errors);
}

double
EvalReport::median_baseline_max_stress_error() const {
    return median(baseline_max_stress_errors);
}

std::string
EvalReport::to_json() const {
    json j = {{"scale", scale},
              {"arse", arse},
              {"baseline_arse", baseline_arse},
              {"arse_floor_mpa", floor},
              {"max_stress_errors", max_stress_errors},
              {"baseline_max_stress_errors", baseline_max_stress_errors},
              {"median_max_stress_error", median_max_stress_error()},
              {"median_baseline_max_stress_error", median_baseline_max_stress_error()},
              {"cases", cases.size()},
              {"hardware", hardware},
              {"dataset_digest", dataset_digest}};
    if (timing) {
        j["timing"] = {{"pipeline_s", timing->pipeline_s},
                       {"fem_s", timing->fem_s},
                       {"speedup", timing->speedup},
                       {"coarse_fem_s", timing->coarse_fem_s},
                       {"inference_s", timing->inference_s}};
    } else {
        j["timing"] = nullptr;
    }
    return j.dump(2) + "\n";
}

EvalReport
evaluate(const training::InferenceModel& model, const dataset::Manifest& manifest, const EvalOptions& options) {
    const auto records = manifest.with_split(options.split);
    if (records.empty()) {
        throw InvalidArgument(std::string("evaluate: split '") + dataset::to_string(options.split) + "' is empty");
    }
    const int high = training::kLowResolution * model.scale;
    if (!dataset::is_dataset_resolution(high)) {
        throw InvalidArgument("evaluate: scale " + std::to_string(model.scale) + " is not available in the dataset");
    }
    EvalReport report;
    report.scale = model.scale;
    report.floor = kFloorFraction * manifest.mean_stress();
    report.hardware = hardware_descriptor();
    report.dataset_digest = dataset::dataset_digest(manifest);

    std::vector<StressField> preds, truths, baselines;
    for (const auto* r : records) {
        CaseResult c;
        c.id = r->id;
        c.low = manifest.load_field(r->id, training::kLowResolution);
        c.truth = manifest.load_field(r->id, high);
        c.prediction = options.truth_as_prediction ? c.truth : infer(model, c.low);
        c.baseline = bicubic_baseline(c.low, model.scale);
        c.arse = arse_case(c.prediction, c.truth, report.floor);
        c.baseline_arse = arse_case(c.baseline, c.truth, report.floor);
        c.max_error = max_stress_error(c.prediction, c.truth);
        c.baseline_max_error = max_stress_error(c.baseline, c.truth);
        report.max_stress_errors.push_back(c.max_error.error);
        report.baseline_max_stress_errors.push_back(c.baseline_max_error.error);
        preds.push_back(c.prediction);
        truths.push_back(c.truth);
        baselines.push_back(c.baseline);
        report.cases.push_back(std::move(c));
    }
    report.arse = arse(preds, truths, report.floor);
    report.baseline_arse = arse(baselines, truths, report.floor);
    return report;
}

namespace {

using Rgb = std::array<std::uint8_t, 3>;

Rgb
lerp_stops(const std::array<std::array<double, 3>, 5>& stops, double t) {
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int i = std::min(3, static_cast<int>(t));
    const double f = t - i;
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
        const double v = stops[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] * (1.0 - f) +
                         stops[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(c)] * f;
        out[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(v));
    }
    return out;
}

Rgb
sequential(double t) {
    static constexpr std::array<std::array<double, 3>, 5> kStops{
        {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    return lerp_stops(kStops, t);
}

Rgb
diverging(double t) {  // t in [-1, 1]
    static constexpr std::array<std::array<double, 3>, 5> kStops{
        {{59, 76, 192}, {141, 176, 254}, {245, 245, 245}, {244, 154, 123}, {180, 4, 38}}};
    return lerp_stops(kStops, 0.5 * (t + 1.0));
}

}  // namespace

Heatmap
render_panels(const StressField& low, const StressField& truth, const StressField& prediction) {
    require_same_shape(truth, prediction, "render_panels");
    const int n = truth.resolution();
    if (low.resolution() < 1 || n % low.resolution() != 0) {
        throw InvalidArgument("render_panels: input resolution must divide the output resolution");
    }
    const int r = n / low.resolution();
    constexpr int kGap = 4;
    Heatmap h;
    h.width = 4 * n + 3 * kGap;
    h.height = n;
    h.rgb.assign(static_cast<std::size_t>(h.width) * h.height * 3, 255);

    h.stress_min = std::min({*std::min_element(low.values().begin(), low.values().end()),
                             *std::min_element(truth.values().begin(), truth.values().end()),
                             *std::min_element(prediction.values().begin(), prediction.values().end())});
    h.stress_max = std::max({low.max(), truth.max(), prediction.max()});
    for (std::size_t i = 0; i < truth.values().size(); ++i) {
        h.diff_limit = std::max(h.diff_limit, std::abs(prediction.values()[i] - truth.values()[i]));
    }
    const double span = h.stress_max > h.stress_min ? h.stress_max - h.stress_min : 1.0;
    const double dlim = h.diff_limit > 0.0 ? h.diff_limit : 1.0;

    auto put = [&](int panel, int y, int x, Rgb c) {
        const std::size_t idx = (static_cast<std::size_t>(y) * h.width + panel * (n + kGap) + x) * 3;
        h.rgb[idx] = c[0];
        h.rgb[idx + 1] = c[1];
        h.rgb[idx + 2] = c[2];
    };
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            put(0, y, x, sequential((low.at(y / r, x / r) - h.stress_min) / span));
            put(1, y, x, sequential((truth.at(y, x) - h.stress_min) / span));
            put(2, y, x, sequential((prediction.at(y, x) - h.stress_min) / span));
            put(3, y, x, diverging((prediction.at(y, x) - truth.at(y, x)) / dlim));
        }
    }
    return h;
}

void
write_field_png(const fs::path& path, const StressField& field) {
    const int n = field.resolution();
    Heatmap h;
    h.width = n;
    h.height = n;
    h.rgb.resize(static_cast<std::size_t>(n) * n * 3);
    const double lo = *std::min_element(field.values().begin(), field.values().end());
    const double hi = field.max();
    const double span = hi > lo ? hi - lo : 1.0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const Rgb c = sequential((field.at(y, x) - lo) / span);
            std::copy(c.begin(), c.end(), h.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * n + x) * 3);
        }
    }
    write_png(path, h);
}

void
emit_report(const EvalReport& report, const fs::path& out_dir, bool heatmaps) {
    if (report.cases.empty()) {
        throw InvalidArgument("emit_report: no cases to report");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    auto write = [](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text) || !out.flush()) {
            throw IoError("cannot write " + path.string());
        }
    };
    write(out_dir / kReportJson, report.to_json());
    std::ostringstream csv;
    csv << "case_id,arse_case,max_stress_err,pred_max_mpa,true_max_mpa\n";
    char line[256];
    for (const auto& c : report.cases) {
        std::snprintf(line, sizeof line, "%s,%.9g,%.9g,%.9g,%.9g\n", c.id.c_str(), c.arse, c.max_error.error,
                      c.max_error.pred_max, c.max_error.true_max);
        csv << line;
    }
    write(out_dir / kReportCsv, csv.str());
    if (heatmaps) {
        for (const auto& c : report.cases) {
            write_png(out_dir / (c.id + ".png"), render_panels(c.low, c.truth, c.prediction));
        }
    }
}

}  // namespace meshboost::evaluation
