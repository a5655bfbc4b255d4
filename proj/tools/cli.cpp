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


#include "cli.hpp"

#include <CLI11.hpp>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "meshboost/checkpoint.hpp"
#include "meshboost/dataset.hpp"
#include "meshboost/evaluation.hpp"
#include "meshboost/training.hpp"

namespace meshboost::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Bad flags or config values, detected before any work starts.
class UsageError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

constexpr const char* kSeedEnv = "MESHBOOST_SEED";

std::string
read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot read config file " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void
write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) {
        throw IoError("cannot write " + path.string());
    }
}

std::uint64_t
seed_from_env() {
    const char* env = std::getenv(kSeedEnv);
    if (env == nullptr || *env == '\0') {
        return 0;
    }
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || *env == '-') {
        throw UsageError(std::string(kSeedEnv) + " must be a non-negative integer, got '" + env + "'");
    }
    return v;
}

// Defaults, then the config file, then flags given on the command line.
class Resolver {
 public:
    explicit Resolver(json defaults) : values_(std::move(defaults)) {}

    void
    merge_file(const std::string& path) {
        if (path.empty()) {
            return;
        }
        json file;
        try {
            file = json::parse(read_text(path));
        } catch (const json::exception& e) {
            throw UsageError("config " + path + " is not valid JSON: " + e.what());
        }
        if (!file.is_object()) {
            throw UsageError("config " + path + " must be a JSON object");
        }
        for (const auto& [key, value] : file.items()) {
            if (!values_.contains(key)) {
                throw UsageError("config " + path + ": unknown key '" + key + "'");
            }
            values_[key] = value;
        }
        from_file_ = file;
    }

    template <class T>
    void
    flag(const CLI::Option* opt, const std::string& key, const T& value) {
        if (opt->count() > 0) {
            values_[key] = value;
        }
    }

    /// Seed precedence: flag, config file, environment, default 0.
    void
    seed(const CLI::Option* opt, std::uint64_t value) {
        if (opt->count() > 0) {
            values_["seed"] = value;
        } else if (!from_file_.contains("seed")) {
            values_["seed"] = seed_from_env();
        }
    }

    template <class T>
    T
    get(const std::string& key) const {
        try {
            return values_.at(key).get<T>();
        } catch (const json::exception&) {
            throw UsageError("config value '" + key + "' has the wrong type: " + values_.at(key).dump());
        }
    }

    const json&
    values() const {
        return values_;
    }

 private:
    json values_;
    json from_file_ = json::object();
};

void
require(bool ok, const std::string& message) {
    if (!ok) {
        throw UsageError(message);
    }
}

std::string
fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

// ---- generate ----

struct GenerateArgs {
    std::string config;
    int count = 0;
    std::uint64_t seed = 0;
    std::string out;
    int jobs = 1;
    int train = 0;
    int test = 0;
    CLI::Option* count_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
    CLI::Option* train_opt = nullptr;
    CLI::Option* test_opt = nullptr;
};

int
cmd_generate(const GenerateArgs& a, std::ostream& out) {
    Resolver r({{"count", 3240}, {"seed", 0}, {"out", ""}, {"jobs", 1}, {"train", nullptr}, {"test", nullptr}});
    r.merge_file(a.config);
    r.flag(a.count_opt, "count", a.count);
    r.seed(a.seed_opt, a.seed);
    r.flag(a.out_opt, "out", a.out);
    r.flag(a.jobs_opt, "jobs", a.jobs);
    r.flag(a.train_opt, "train", a.train);
    r.flag(a.test_opt, "test", a.test);

    dataset::GeneratorConfig g;
    g.count = r.get<int>("count");
    g.seed = r.get<std::uint64_t>("seed");
    g.jobs = r.get<int>("jobs");
    const std::string out_dir = r.get<std::string>("out");
    require(!out_dir.empty(), "generate: --out is required");
    try {
        g.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    // Unset split sizes follow the 3000/240 proportion of the full dataset.
    json resolved = r.values();
    const int test = resolved["test"].is_null() ? g.count * 240 / 3240 : r.get<int>("test");
    const int train = resolved["train"].is_null() ? g.count - test : r.get<int>("train");
    require(train >= 0 && test >= 0 && train + test <= g.count,
            "generate: train + test must not exceed count (" + std::to_string(train) + " + " + std::to_string(test) +
                " > " + std::to_string(g.count) + ")");
    resolved["train"] = train;
    resolved["test"] = test;

    auto log = [&out](const std::string& line) { out << line << std::endl; };
    dataset::Manifest m = dataset::generate_dataset(g, out_dir, log);
    m = dataset::split(m, train, test, g.seed);
    m.save();
    write_text(fs::path(out_dir) / "generate_config.json", resolved.dump(2) + "\n");
    out << "samples: " << m.samples.size() << " (train " << train << ", test " << test << ")\n";
    out << "manifest: " << (fs::path(out_dir) / dataset::kManifestName).string() << "\n";
    out << "digest: " << dataset::dataset_digest(m) << std::endl;
    return kOk;
}

// ---- train ----

struct TrainArgs {
    std::string config;
    std::string manifest;
    int scale = 0;
    int epochs = 0;
    double lr = 0;
    int batch = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string resume;
    int blocks = 0, layers = 0, filters = 0;
    int checkpoint_every = 0;
    bool no_augment = false;
    CLI::Option *manifest_opt = nullptr, *scale_opt = nullptr, *epochs_opt = nullptr, *lr_opt = nullptr,
                *batch_opt = nullptr, *seed_opt = nullptr, *blocks_opt = nullptr, *layers_opt = nullptr,
                *filters_opt = nullptr, *every_opt = nullptr, *no_augment_opt = nullptr;
};

int
cmd_train(const TrainArgs& a, std::ostream& out) {
    Resolver r(json::parse(training::TrainConfig{}.to_json()));
    r.merge_file(a.config);
    r.flag(a.manifest_opt, "manifest", a.manifest);
    r.flag(a.scale_opt, "scale", a.scale);
    r.flag(a.epochs_opt, "epochs", a.epochs);
    r.flag(a.lr_opt, "learning_rate", a.lr);
    r.flag(a.batch_opt, "batch_size", a.batch);
    r.seed(a.seed_opt, a.seed);
    r.flag(a.blocks_opt, "blocks", a.blocks);
    r.flag(a.layers_opt, "layers", a.layers);
    r.flag(a.filters_opt, "filters", a.filters);
    r.flag(a.every_opt, "checkpoint_every", a.checkpoint_every);
    r.flag(a.no_augment_opt, "augment", !a.no_augment);

    training::TrainConfig c;
    try {
        c = training::TrainConfig::from_json(r.values().dump());
        c.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    require(!c.manifest.empty(), "train: --manifest is required");

    const dataset::Manifest m = dataset::Manifest::load(c.manifest);
    std::optional<training::TrainState> initial;
    if (!a.resume.empty()) {
        initial = training::resume(a.resume, c);
        out << "resuming after epoch " << initial->epoch << "\n";
    }
    auto log = [&out](const std::string& line) { out << line << std::endl; };
    const auto result = training::train(c, m, a.out, log, std::move(initial));
    out << "checkpoint: " << result.final_checkpoint.string() << " (" << model::file_digest(result.final_checkpoint)
        << ")\n";
    out << "curve: " << result.curve.string() << "\n";
    out << "dataset digest: " << dataset::dataset_digest(m) << std::endl;
    return kOk;
}

// ---- infer ----

struct InferArgs {
    std::string checkpoint;
    std::string input;
    std::string out;
    std::string png;
};

int
cmd_infer(const InferArgs& a, std::ostream& out) {
    const auto model = training::InferenceModel::load(a.checkpoint);
    const StressField low = read_smf(a.input);
    const StressField high = evaluation::infer(model, low);
    write_smf(a.out, high);
    json resolved = {{"checkpoint", a.checkpoint}, {"input", a.input}, {"out", a.out}, {"png", a.png}};
    write_text(a.out + ".config.json", resolved.dump(2) + "\n");
    if (!a.png.empty()) {
        evaluation::write_field_png(a.png, high);
    }
    out << "wrote " << high.resolution() << "x" << high.resolution() << " field to " << a.out
        << " (max " << fmt(high.max()) << " MPa)" << std::endl;
    return kOk;
}

// ---- eval ----

struct EvalArgs {
    std::string config;
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
    std::string out;
    bool no_heatmaps = false;
    bool truth_as_prediction = false;
    CLI::Option *checkpoint_opt = nullptr, *manifest_opt = nullptr, *split_opt = nullptr, *out_opt = nullptr,
                *no_heatmaps_opt = nullptr, *truth_opt = nullptr;
};

int
cmd_eval(const EvalArgs& a, std::ostream& out) {
    Resolver r({{"checkpoint", ""},
                {"manifest", ""},
                {"split", "test"},
                {"out", ""},
                {"heatmaps", true},
                {"truth_as_prediction", false}});
    r.merge_file(a.config);
    r.flag(a.checkpoint_opt, "checkpoint", a.checkpoint);
    r.flag(a.manifest_opt, "manifest", a.manifest);
    r.flag(a.split_opt, "split", a.split);
    r.flag(a.out_opt, "out", a.out);
    r.flag(a.no_heatmaps_opt, "heatmaps", !a.no_heatmaps);
    r.flag(a.truth_opt, "truth_as_prediction", a.truth_as_prediction);
    for (const char* key : {"checkpoint", "manifest", "out"}) {
        require(!r.get<std::string>(key).empty(), std::string("eval: --") + key + " is required");
    }
    evaluation::EvalOptions opts;
    try {
        opts.split = dataset::split_from_string(r.get<std::string>("split"));
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    require(opts.split != dataset::Split::None, "eval: --split must be train or test");
    opts.truth_as_prediction = r.get<bool>("truth_as_prediction");

    const auto model = training::InferenceModel::load(r.get<std::string>("checkpoint"));
    const auto m = dataset::Manifest::load(r.get<std::string>("manifest"));
    const auto report = evaluation::evaluate(model, m, opts);
    const fs::path out_dir = r.get<std::string>("out");
    evaluation::emit_report(report, out_dir, r.get<bool>("heatmaps"));
    write_text(out_dir / "eval_config.json", r.values().dump(2) + "\n");
    out << "cases: " << report.cases.size() << " (r=" << report.scale << ")\n";
    out << "ARSE: " << fmt(report.arse * 100.0) << "% (bicubic " << fmt(report.baseline_arse * 100.0) << "%)\n";
    out << "median max-stress error: " << fmt(report.median_max_stress_error() * 100.0) << "% (bicubic "
        << fmt(report.median_baseline_max_stress_error() * 100.0) << "%)\n";
    out << "dataset digest: " << report.dataset_digest << "\n";
    out << "hardware: " << report.hardware << "\n";
    out << "report: " << (out_dir / evaluation::kReportJson).string() << std::endl;
    return kOk;
}

// ---- bench ----

struct BenchArgs {
    std::string config;
    std::vector<std::string> checkpoints;
    int count = 0;
    std::uint64_t seed = 0;
    int reps = 0;
    std::string out;
    CLI::Option *checkpoint_opt = nullptr, *count_opt = nullptr, *seed_opt = nullptr, *reps_opt = nullptr,
                *out_opt = nullptr;
};

int
cmd_bench(const BenchArgs& a, std::ostream& out) {
    Resolver r({{"checkpoints", json::array()}, {"count", 3}, {"seed", 0}, {"reps", 5}, {"out", ""}});
    r.merge_file(a.config);
    r.flag(a.checkpoint_opt, "checkpoints", a.checkpoints);
    r.flag(a.count_opt, "count", a.count);
    r.seed(a.seed_opt, a.seed);
    r.flag(a.reps_opt, "reps", a.reps);
    r.flag(a.out_opt, "out", a.out);
    const auto checkpoints = r.get<std::vector<std::string>>("checkpoints");
    const int reps = r.get<int>("reps");
    const int count = r.get<int>("count");
    require(!checkpoints.empty(), "bench: at least one --checkpoint is required");
    require(reps >= 3, "bench: --reps must be at least 3, got " + std::to_string(reps));
    require(count >= 1, "bench: --count must be at least 1");

    std::vector<training::InferenceModel> models;
    for (const auto& path : checkpoints) {
        models.push_back(training::InferenceModel::load(path));
    }
    // Load cases come from the generator's default distribution.
    dataset::GeneratorConfig g;
    Rng rng(r.get<std::uint64_t>("seed"));
    std::vector<dataset::CaseSpec> cases;
    for (int i = 0; i < count; ++i) {
        cases.push_back(dataset::sample_case(rng, g));
    }
    const auto table = evaluation::timing_benchmark(cases, g.material, models, reps);

    json rows = json::array();
    out << "hardware: " << table.hardware << "\n";
    out << "repetitions: " << table.repetitions << ", cases: " << count << "\n";
    out << "scale  resolution  coarse_fem_s  inference_s  pipeline_s  fem_s  speedup\n";
    for (const auto& row : table.rows) {
        out << row.scale << "  " << row.resolution << "  " << fmt(row.coarse_fem_s, 4) << "  "
            << fmt(row.inference_s, 4) << "  " << fmt(row.pipeline_s, 4) << "  " << fmt(row.fem_s, 4) << "  "
            << fmt(row.speedup, 4) << "\n";
        rows.push_back({{"scale", row.scale},
                        {"resolution", row.resolution},
                        {"coarse_fem_s", row.coarse_fem_s},
                        {"inference_s", row.inference_s},
                        {"pipeline_s", row.pipeline_s},
                        {"fem_s", row.fem_s},
                        {"speedup", row.speedup}});
    }
    out.flush();
    const std::string out_dir = r.get<std::string>("out");
    if (!out_dir.empty()) {
        const json doc = {{"hardware", table.hardware}, {"repetitions", table.repetitions}, {"rows", rows}};
        write_text(fs::path(out_dir) / "timing.json", doc.dump(2) + "\n");
        write_text(fs::path(out_dir) / "bench_config.json", r.values().dump(2) + "\n");
    }
    return kOk;
}

}  // namespace

int
run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coarse-to-fine stress field super-resolution toolkit", "meshboost"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Solve paired 32/64/128/256 stress fields and write a manifest");
    g->add_option("--config", gen.config, "JSON config file")->check(CLI::ExistingFile);
    gen.count_opt = g->add_option("--count", gen.count, "Number of samples");
    gen.seed_opt = g->add_option("--seed", gen.seed, "Master seed (default: $MESHBOOST_SEED or 0)");
    gen.out_opt = g->add_option("--out", gen.out, "Output directory");
    gen.jobs_opt = g->add_option("--jobs", gen.jobs, "Worker threads for the solver");
    gen.train_opt = g->add_option("--train", gen.train, "Training split size");
    gen.test_opt = g->add_option("--test", gen.test, "Held-out split size");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a super-resolution model for one scale");
    t->add_option("--config", tr.config, "JSON config file")->check(CLI::ExistingFile);
    tr.manifest_opt = t->add_option("--manifest", tr.manifest, "Dataset manifest or directory");
    tr.scale_opt = t->add_option("--scale", tr.scale, "Upscaling factor: 2, 4 or 8");
    tr.epochs_opt = t->add_option("--epochs", tr.epochs, "Total epochs");
    tr.lr_opt = t->add_option("--lr", tr.lr, "Learning rate");
    tr.batch_opt = t->add_option("--batch", tr.batch, "Batch size");
    tr.seed_opt = t->add_option("--seed", tr.seed, "Seed (default: $MESHBOOST_SEED or 0)");
    tr.blocks_opt = t->add_option("--blocks", tr.blocks, "Residual dense blocks");
    tr.layers_opt = t->add_option("--layers", tr.layers, "Conv layers per block");
    tr.filters_opt = t->add_option("--filters", tr.filters, "Feature channels");
    tr.every_opt = t->add_option("--checkpoint-every", tr.checkpoint_every, "Epochs between checkpoints");
    tr.no_augment_opt = t->add_flag("--no-augment", tr.no_augment, "Disable random quarter turns");
    t->add_option("--out", tr.out, "Run directory")->required();
    t->add_option("--resume", tr.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "Upscale one 32x32 field");
    i->add_option("--checkpoint", inf.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
    i->add_option("--input", inf.input, "32x32 field (.smf)")->required()->check(CLI::ExistingFile);
    i->add_option("--out", inf.out, "Output field (.smf)")->required();
    i->add_option("--png", inf.png, "Also write a heatmap");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
    e->add_option("--config", ev.config, "JSON config file")->check(CLI::ExistingFile);
    ev.checkpoint_opt = e->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint");
    ev.manifest_opt = e->add_option("--manifest", ev.manifest, "Dataset manifest or directory");
    ev.split_opt = e->add_option("--split", ev.split, "train or test");
    ev.out_opt = e->add_option("--out", ev.out, "Report directory");
    ev.no_heatmaps_opt = e->add_flag("--no-heatmaps", ev.no_heatmaps, "Skip PNG output");
    ev.truth_opt = e->add_flag("--truth-as-prediction", ev.truth_as_prediction, "Debug: score the truth itself");

    BenchArgs be;
    auto* b = app.add_subcommand("bench", "Time coarse solve + inference against direct fine solves");
    b->add_option("--config", be.config, "JSON config file")->check(CLI::ExistingFile);
    be.checkpoint_opt = b->add_option("--checkpoint", be.checkpoints, "Checkpoint, one per scale (repeatable)");
    be.count_opt = b->add_option("--count", be.count, "Number of load cases");
    be.seed_opt = b->add_option("--seed", be.seed, "Seed for the load cases");
    be.reps_opt = b->add_option("--reps", be.reps, "Timed repetitions per case (>= 3)");
    be.out_opt = b->add_option("--out", be.out, "Directory for timing.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*g) return cmd_generate(gen, out);
        if (*t) return cmd_train(tr, out);
        if (*i) return cmd_infer(inf, out);
        if (*e) return cmd_eval(ev, out);
        if (*b) return cmd_bench(be, out);
    } catch (const UsageError& ex) {
        err << "meshboost: usage error: " << ex.what() << "\n";
        return kUsage;
    } catch (const std::exception& ex) {
        err << "meshboost: error: " << ex.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

}  // namespace meshboost::cli
