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


// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any fails. Usage: acceptance [work_dir]. The work dir keeps the generated
// datasets so a rerun resumes instead of solving them again.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "gradcheck.hpp"
#include "meshboost/checkpoint.hpp"
#include "meshboost/dataset.hpp"
#include "meshboost/evaluation.hpp"
#include "meshboost/fem.hpp"
#include "meshboost/training.hpp"

using namespace meshboost;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void
report(const char* name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

template <class... Args>
std::string
format(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

void
progress(const std::string& line) {
    std::printf("  %s\n", line.c_str());
    std::fflush(stdout);
}

double
seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- FEM patch test ----

void
fem_patch() {
    const double q = 5.0;
    const double expected = q * std::sqrt(1.0 - 0.3 + 0.09);
    double worst = 0.0;
    for (int n : dataset::kResolutions) {
        const auto c = fem::make_case(n,
                                      {fem::EdgeCondition::traction(0.0, -q), fem::EdgeCondition::fixed_vertical(),
                                       fem::EdgeCondition::free(), fem::EdgeCondition::free()},
                                      fem::kSteel, fem::Corner::BottomLeft);
        for (double v : fem::solve_case(c).values()) {
            worst = std::max(worst, std::abs(v - expected) / expected);
        }
    }
    report("fem_patch_test", worst < 1e-6,
           format("von Mises %.4f MPa at 32/64/128/256, max relative error %.3g (< 1e-6)", expected, worst));
}

// ---- stiffness invariants ----

double
max_abs(const Eigen::SparseMatrix<double>& m) {
    double r = 0;
    for (int c = 0; c < m.outerSize(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) r = std::max(r, std::abs(it.value()));
    }
    return r;
}

Eigen::VectorXd
rigid_mode(int n, int which) {
    Eigen::VectorXd v(2 * (n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            const int k = j * (n + 1) + i;
            const double x = static_cast<double>(i) / n, y = static_cast<double>(j) / n;
            v[2 * k] = which == 0 ? 1.0 : which == 1 ? 0.0 : -y;
            v[2 * k + 1] = which == 0 ? 0.0 : which == 1 ? 1.0 : x;
        }
    }
    return v;
}

void
stiffness_invariants() {
    Rng rng(50);
    const dataset::GeneratorConfig g;
    double sym = 0, null_mode = 0, balance = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 4 << rng.below(4);  // 4..32
        const auto c = dataset::sample_case(rng, g).to_case(n, g.material);
        const auto sys = fem::assemble(c);
        const Eigen::SparseMatrix<double> kt = sys.stiffness.transpose();
        sym = std::max(sym, max_abs(sys.stiffness - kt) / max_abs(sys.stiffness));
        const double knorm = sys.stiffness.norm();
        for (int m = 0; m < 3; ++m) {
            const Eigen::VectorXd v = rigid_mode(n, m);
            null_mode = std::max(null_mode, (sys.stiffness * v).norm() / (knorm * v.norm()));
        }
        const auto u = fem::solve_displacements(fem::apply_constraints(sys, c));
        const auto reaction = fem::reaction_forces(sys, u);
        double rx = 0, ry = 0, fx = 0, fy = 0;
        for (const auto& [dof, value] : sys.constraints) (dof % 2 ? ry : rx) += reaction[dof];
        for (int d = 0; d < sys.load.size(); ++d) (d % 2 ? fy : fx) += sys.load[d];
        balance = std::max(balance, std::hypot(rx + fx, ry + fy) / std::hypot(fx, fy));
    }
    report("stiffness_invariants", sym < 1e-10 && null_mode < 1e-8 && balance < 1e-8,
           format("50 cases: symmetry %.3g (< 1e-10), rigid-body modes %.3g (< 1e-8), reaction balance %.3g (< 1e-8)",
                  sym, null_mode, balance));
}

// ---- pixel shuffle ----

void
pixel_shuffle_oracle() {
    Rng rng(100);
    int bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 1 + static_cast<int>(rng.below(8));
        const int w = 1 + static_cast<int>(rng.below(8));
        const int r = 2 << rng.below(3);
        const int c = 1 + static_cast<int>(rng.below(2));
        model::Tensor in(h, w, c * r * r);
        for (auto& v : in.values()) v = static_cast<float>(rng.uniform(-1, 1));
        const model::Tensor out = model::pixel_shuffle(in, r);
        bool ok = out.height() == h * r && out.width() == w * r && out.channels() == c;
        for (int y = 0; ok && y < h * r; ++y) {
            for (int x = 0; ok && x < w * r; ++x) {
                for (int k = 0; k < c; ++k) {
                    ok = ok && out.at(y, x, k) == in.at(y / r, x / r, k * r * r + (y % r) * r + (x % r));
                }
            }
        }
        ok = ok && model::pixel_unshuffle(out, r) == in;
        bad += ok ? 0 : 1;
    }
    report("pixel_shuffle_oracle", bad == 0,
           format("100 tensors (h,w <= 8, r in {2,4,8}): %d mismatches against the index map and inverse", bad));
}

// ---- gradient check ----

void
gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    const model::ModelConfig cfg{1, 2, 4, 3, 2};
    const auto fx = testing::gradient_fixture(cfg, 4, 4, 1);
    const auto res = testing::check_gradients(cfg, fx.weights, fx.lows, fx.highs, 1e-3, 1e-6, 1e-3);
    std::string detail = format("%zu parameters, eps 1e-3, %zu outside rel 1e-3 / abs 1e-6, max abs error %.3g, "
                                "fixture seed %llu (ReLU margin %.3f), %.1f s",
                                res.checked, res.mismatches.size(), res.max_abs_error,
                                static_cast<unsigned long long>(fx.seed), fx.margin, seconds_since(t0));
    if (!res.mismatches.empty()) {
        const auto& m = res.mismatches.front();
        detail += format("; first: %s[%zu] analytic %.6g numeric %.6g", m.parameter.c_str(), m.index, m.analytic,
                         m.numeric);
    }
    report("gradient_check", res.mismatches.empty() && seconds_since(t0) < 60.0, detail);
}

// ---- overfit ----

void
overfit(const fs::path& work) {
    dataset::GeneratorConfig g;
    g.count = 1;
    g.seed = 11;
    auto m = dataset::generate_dataset(g, work / "overfit");
    m = dataset::split(m, 1, 0, 11);
    m.save();
    training::TrainConfig c;
    c.scale = 2;
    c.blocks = 2;
    c.layers = 4;
    c.filters = 16;
    c.batch_size = 1;
    c.augment = false;
    c.seed = 1;
    training::Trainer t(c, training::TrainData::load(m, 2));
    const auto pair = t.data().train;
    double first = 0.0, best = 0.0;
    int steps = 0;
    for (; steps < 2000; ++steps) {
        const double loss = t.step(pair);
        if (steps == 0) first = loss;
    }
    best = t.evaluate(pair);
    report("overfit_single_sample", best < 0.01 * first,
           format("D2 C4 F16 r2, lr %.0e, %d steps: normalized MAE %.4g -> %.4g (ratio %.4f, < 0.01)",
                  c.learning_rate, steps, first, best, best / first));
}

// ---- desk scale ----

struct DeskResult {
    evaluation::EvalReport report;
    training::InferenceModel model;
    dataset::Manifest manifest;
};

// Desk-scale settings; see the README for how they were chosen.
constexpr int kDeskEpochs = 100;
constexpr int kDeskBatch = 4;
constexpr double kDeskLearningRate = 1e-3;

DeskResult
desk_scale(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    dataset::GeneratorConfig g;
    g.count = 220;
    g.seed = 2024;
    auto m = dataset::generate_dataset(g, work / "desk", progress);
    m = dataset::split(m, 200, 20, 2024);
    m.save();
    progress(format("dataset ready in %.0f s, digest %s", seconds_since(t0), dataset::dataset_digest(m).c_str()));

    training::TrainConfig c;
    c.scale = 2;
    c.blocks = 2;
    c.layers = 4;
    c.filters = 32;
    c.epochs = kDeskEpochs;
    c.batch_size = kDeskBatch;
    c.learning_rate = kDeskLearningRate;
    c.seed = 2024;
    c.checkpoint_every = 0;
    const auto run = training::train(c, m, work / "desk_run", [](const std::string& line) {
        if (line.rfind("epoch ", 0) == 0 && line.find("0/") == std::string::npos) return;
        progress(line);
    });
    const auto model = training::InferenceModel::load(run.final_checkpoint);
    auto rep = evaluation::evaluate(model, m);
    evaluation::emit_report(rep, work / "desk_report");

    // Informational: 10-epoch moving average of train MAE over the second half.
    const auto& h = run.state.train_mae;
    int rises = 0;
    for (std::size_t e = std::max<std::size_t>(h.size() / 2, 10); e < h.size(); ++e) {
        double now = 0, before = 0;
        for (std::size_t k = 0; k < 10; ++k) {
            now += h[e - k];
            before += h[e - 1 - k];
        }
        rises += now > before ? 1 : 0;
    }
    progress(format("trained %d epochs in %.0f s; final train MAE %.4g, held-out MAE %.4g; "
                    "moving-average increases in second half: %d",
                    c.epochs, seconds_since(t0), h.back(), run.state.heldout_mae.back(), rises));

    report("desk_scale_arse", rep.arse < rep.baseline_arse && rep.arse <= 0.05,
           format("r=2, 200/20 split, %d epochs: model ARSE %.3f%%, bicubic %.3f%% (need model < bicubic and <= 5%%)",
                  c.epochs, 100 * rep.arse, 100 * rep.baseline_arse));
    report("desk_scale_max_stress", rep.median_max_stress_error() < rep.median_baseline_max_stress_error(),
           format("median max-stress error: model %.3f%%, bicubic %.3f%%", 100 * rep.median_max_stress_error(),
                  100 * rep.median_baseline_max_stress_error()));
    return {std::move(rep), model, std::move(m)};
}

// ---- timing ----

void
timing(const DeskResult& desk) {
    std::vector<training::InferenceModel> models{desk.model};
    // Inference cost depends on the architecture, not on trained values.
    for (int r : {4, 8}) {
        Rng rng(static_cast<std::uint64_t>(r));
        auto cfg = desk.model.weights.config();
        cfg.scale = r;
        models.push_back({model::init_weights(rng, cfg), desk.model.normalization, r});
    }
    std::vector<dataset::CaseSpec> cases;
    for (const auto* rec : desk.manifest.with_split(dataset::Split::Test)) {
        if (cases.size() < 3) cases.push_back(rec->spec);
    }
    const auto table = evaluation::timing_benchmark(cases, desk.manifest.material, models, 3);
    const auto& t = table.rows;
    for (const auto& row : t) {
        progress(format("%3dx%-3d coarse %.4f s + inference %.4f s = pipeline %.4f s | direct FEM %.4f s | speedup %.2fx",
                        row.resolution, row.resolution, row.coarse_fem_s, row.inference_s, row.pipeline_s, row.fem_s,
                        row.speedup));
    }
    double lo = t[0].pipeline_s, hi = t[0].pipeline_s;
    for (const auto& row : t) {
        lo = std::min(lo, row.pipeline_s);
        hi = std::max(hi, row.pipeline_s);
    }
    const bool increasing = t[0].fem_s < t[1].fem_s && t[1].fem_s < t[2].fem_s;
    report("timing_ordering", increasing && hi / lo < 2.0,
           format("direct FEM %.3f < %.3f < %.3f s: %s; pipeline spread %.2fx (< 2x); hardware: %s", t[0].fem_s,
                  t[1].fem_s, t[2].fem_s, increasing ? "yes" : "no", hi / lo, table.hardware.c_str()));
}

// ---- determinism ----

struct PipelineRun {
    int code = 0;
    std::string dataset_digest;
    std::string checkpoint_digest;
    double arse = 0.0;
};

int
cli(std::vector<std::string> args) {
    args.insert(args.begin(), "meshboost");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = meshboost::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) progress("meshboost " + args[1] + " failed: " + err.str());
    return code;
}

PipelineRun
pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    PipelineRun r;
    const std::string data = (dir / "data").string();
    r.code = cli({"generate", "--count", "6", "--seed", "99", "--train", "4", "--test", "2", "--out", data});
    if (r.code == 0) {
        r.code = cli({"train", "--manifest", data, "--scale", "2", "--epochs", "3", "--batch", "2", "--lr", "1e-3",
                      "--seed", "99", "--blocks", "1", "--layers", "2", "--filters", "8", "--out",
                      (dir / "run").string()});
    }
    if (r.code == 0) {
        r.code = cli({"eval", "--checkpoint", (dir / "run" / "final.ckpt").string(), "--manifest", data, "--out",
                      (dir / "eval").string()});
    }
    if (r.code == 0) {
        std::ifstream in(dir / "eval" / "report.json");
        const auto j = nlohmann::json::parse(in);
        r.arse = j.at("arse").get<double>();
        r.dataset_digest = j.at("dataset_digest").get<std::string>();
        r.checkpoint_digest = model::file_digest(dir / "run" / "final.ckpt");
    }
    return r;
}

void
determinism(const fs::path& work) {
    const PipelineRun a = pipeline(work / "determinism_a");
    const PipelineRun b = pipeline(work / "determinism_b");
    const bool ok = a.code == 0 && b.code == 0 && a.arse == b.arse && a.dataset_digest == b.dataset_digest &&
                    a.checkpoint_digest == b.checkpoint_digest;
    report("determinism", ok,
           format("generate -> train -> eval twice: ARSE %.17g vs %.17g, checkpoint %s vs %s, dataset %s vs %s", a.arse,
                  b.arse, a.checkpoint_digest.c_str(), b.checkpoint_digest.c_str(), a.dataset_digest.c_str(),
                  b.dataset_digest.c_str()));
}

}  // namespace

int
main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
    fs::create_directories(work);
    std::printf("acceptance work dir: %s\n", work.string().c_str());
    std::printf("hardware: %s\n", evaluation::hardware_descriptor().c_str());
    auto guarded = [](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(name, false, std::string("threw: ") + e.what());
        }
    };
    guarded("fem_patch_test", fem_patch);
    guarded("stiffness_invariants", stiffness_invariants);
    guarded("pixel_shuffle_oracle", pixel_shuffle_oracle);
    guarded("gradient_check", gradient_check);
    guarded("overfit_single_sample", [&] { overfit(work); });
    guarded("desk_scale", [&] {
        const DeskResult desk = desk_scale(work);
        guarded("timing_ordering", [&] { timing(desk); });
    });
    guarded("determinism", [&] { determinism(work); });
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
