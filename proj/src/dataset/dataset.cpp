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

#include "meshboost/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "meshboost/common.hpp"

namespace meshboost::dataset {

namespace fs = std::filesystem;
using json = nlohmann::json;
using fem::Corner;
using fem::EdgeCondition;
using Kind = fem::EdgeCondition::Kind;

bool
is_dataset_resolution(int n) {
    return std::find(kResolutions.begin(), kResolutions.end(), n) != kResolutions.end();
}

void
LoadWindow::validate() const {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
        throw InvalidArgument("LoadWindow: need finite lo < hi, got [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
    }
    if (!(min_magnitude >= 0.0)) {
        throw InvalidArgument("LoadWindow: min_magnitude must be >= 0");
    }
    const double reach = std::max(std::abs(lo), std::abs(hi));
    if (min_magnitude >= reach * std::sqrt(2.0)) {
        throw InvalidArgument("LoadWindow: min_magnitude " + std::to_string(min_magnitude) +
                              " excludes the whole window");
    }
}

namespace {

const char*
corner_name(Corner c) {
    switch (c) {
        case Corner::BottomLeft: return "bottom_left";
        case Corner::BottomRight: return "bottom_right";
        case Corner::TopRight: return "top_right";
        case Corner::TopLeft: return "top_left";
    }
    return "?";
}

Corner
corner_from_name(const std::string& s) {
    for (Corner c : {Corner::BottomLeft, Corner::BottomRight, Corner::TopRight, Corner::TopLeft}) {
        if (s == corner_name(c)) {
            return c;
        }
    }
    throw FormatError("unknown corner '" + s + "'");
}

Kind
kind_from_name(const std::string& s) {
    for (Kind k : {Kind::FixedBoth, Kind::FixedHorizontal, Kind::FixedVertical, Kind::Free, Kind::Traction}) {
        if (s == fem::to_string(k)) {
            return k;
        }
    }
    throw FormatError("unknown edge condition '" + s + "'");
}

}  // namespace

std::string
ConstraintPattern::name() const {
    std::string s = std::string("bottom=") + fem::to_string(bottom.kind);
    if (pinned_corner) {
        s += std::string("+pin_") + corner_name(*pinned_corner);
    }
    s += std::string(",left=") + fem::to_string(left.kind) + ",right=" + fem::to_string(right.kind);
    return s;
}

std::vector<ConstraintPattern>
default_patterns() {
    std::vector<ConstraintPattern> out;
    const std::array<ConstraintPattern, 2> bottoms{
        ConstraintPattern{EdgeCondition::fixed_both(), {}, {}, std::nullopt},
        ConstraintPattern{EdgeCondition::fixed_vertical(), {}, {}, Corner::BottomLeft},
    };
    const std::array<EdgeCondition, 2> sides{EdgeCondition::free(), EdgeCondition::fixed_horizontal()};
    for (const auto& b : bottoms) {
        for (const auto& l : sides) {
            for (const auto& r : sides) {
                ConstraintPattern p = b;
                p.left = l;
                p.right = r;
                out.push_back(p);
            }
        }
    }
    return out;
}

void
GeneratorConfig::validate() const {
    if (count < 1) {
        throw InvalidArgument("GeneratorConfig: count must be >= 1, got " + std::to_string(count));
    }
    if (jobs < 1) {
        throw InvalidArgument("GeneratorConfig: jobs must be >= 1, got " + std::to_string(jobs));
    }
    if (patterns.empty()) {
        throw InvalidArgument("GeneratorConfig: constraint pattern set is empty");
    }
    window.validate();
    material.validate();
    for (const auto& p : patterns) {
        CaseSpec probe{0, p, 1.0, 1.0};
        if (auto mode = fem::unconstrained_mode(probe.to_case(kResolutions[0], material))) {
            throw InvalidArgument("GeneratorConfig: pattern " + p.name() + " leaves " + *mode + " free");
        }
    }
}

std::array<EdgeCondition, 4>
CaseSpec::edges() const {
    std::array<EdgeCondition, 4> e{};
    e[static_cast<int>(fem::Edge::Top)] = EdgeCondition::traction(qx, qy);
    e[static_cast<int>(fem::Edge::Bottom)] = pattern.bottom;
    e[static_cast<int>(fem::Edge::Left)] = pattern.left;
    e[static_cast<int>(fem::Edge::Right)] = pattern.right;
    return e;
}

fem::PlaneStrainCase
CaseSpec::to_case(int n_elements, const fem::Material& material) const {
    return fem::make_case(n_elements, edges(), material, pattern.pinned_corner);
}

CaseSpec
sample_case(Rng& rng, const GeneratorConfig& config) {
    if (config.patterns.empty()) {
        throw InvalidArgument("sample_case: constraint pattern set is empty");
    }
    config.window.validate();
    CaseSpec spec;
    spec.pattern = config.patterns[static_cast<std::size_t>(rng.below(config.patterns.size()))];
    do {
        spec.qx = rng.uniform(config.window.lo, config.window.hi);
        spec.qy = rng.uniform(config.window.lo, config.window.hi);
    } while (std::hypot(spec.qx, spec.qy) < config.window.min_magnitude);
    return spec;
}

const char*
to_string(Split split) {
    switch (split) {
        case Split::None: return "none";
        case Split::Train: return "train";
        case Split::Test: return "test";
    }
    return "?";
}

Split
split_from_string(const std::string& s) {
    for (Split v : {Split::None, Split::Train, Split::Test}) {
        if (s == to_string(v)) {
            return v;
        }
    }
    throw InvalidArgument("unknown split '" + s + "' (expected none, train or test)");
}

double
Normalization::forward(double stress) const {
    return std::log1p(stress / sigma_ref) / std::log1p(sigma_max / sigma_ref);
}

double
Normalization::inverse(double g) const {
    return sigma_ref * std::expm1(g * std::log1p(sigma_max / sigma_ref));
}

fs::path
Manifest::field_path(const std::string& id, int resolution) const {
    return root / (id + "_" + std::to_string(resolution) + ".smf");
}

StressField
Manifest::load_field(const std::string& id, int resolution) const {
    StressField f = read_smf(field_path(id, resolution));
    if (f.resolution() != resolution) {
        throw FormatError(field_path(id, resolution).string() + ": resolution " + std::to_string(f.resolution()) +
                          ", expected " + std::to_string(resolution));
    }
    return f;
}

std::vector<const SampleRecord*>
Manifest::with_split(Split s) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : samples) {
        if (r.split == s) {
            out.push_back(&r);
        }
    }
    return out;
}

double
Manifest::mean_stress() const {
    if (samples.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& r : samples) {
        sum += r.mean_stress;
    }
    return sum / static_cast<double>(samples.size());
}

namespace {

json
edge_json(const EdgeCondition& e) {
    return fem::to_string(e.kind);
}

json
record_json(const SampleRecord& r) {
    json edges = {{"top", "traction"},
                  {"bottom", edge_json(r.spec.pattern.bottom)},
                  {"left", edge_json(r.spec.pattern.left)},
                  {"right", edge_json(r.spec.pattern.right)}};
    if (r.spec.pattern.pinned_corner) {
        edges["pinned_corner"] = corner_name(*r.spec.pattern.pinned_corner);
    }
    return {{"id", r.id},
            {"seed", r.spec.seed},
            {"edges", edges},
            {"qx", r.spec.qx},
            {"qy", r.spec.qy},
            {"max_stress", r.max_stress},
            {"mean_stress", r.mean_stress},
            {"split", to_string(r.split)}};
}

SampleRecord
record_from_json(const json& j) {
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.spec.seed = j.at("seed").get<std::uint64_t>();
    const auto& e = j.at("edges");
    if (e.at("top").get<std::string>() != "traction") {
        throw FormatError("manifest sample " + r.id + ": top edge must carry the traction");
    }
    r.spec.pattern.bottom = {kind_from_name(e.at("bottom").get<std::string>())};
    r.spec.pattern.left = {kind_from_name(e.at("left").get<std::string>())};
    r.spec.pattern.right = {kind_from_name(e.at("right").get<std::string>())};
    if (e.contains("pinned_corner")) {
        r.spec.pattern.pinned_corner = corner_from_name(e.at("pinned_corner").get<std::string>());
    }
    r.spec.qx = j.at("qx").get<double>();
    r.spec.qy = j.at("qy").get<double>();
    r.max_stress = j.at("max_stress").get<double>();
    r.mean_stress = j.at("mean_stress").get<double>();
    r.split = split_from_string(j.at("split").get<std::string>());
    return r;
}

void
write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out << text;
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

std::string
read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string
Manifest::to_json() const {
    json samples_json = json::array();
    for (const auto& r : samples) {
        samples_json.push_back(record_json(r));
    }
    json j = {{"version", version},
              {"master_seed", master_seed},
              {"material", {{"E", material.young_modulus}, {"nu", material.poisson_ratio}}},
              {"load_window", {{"lo", window.lo}, {"hi", window.hi}, {"min_magnitude", window.min_magnitude}}},
              {"normalization",
               {{"kind", "log1p"}, {"sigma_ref", normalization.sigma_ref}, {"sigma_max", normalization.sigma_max}}},
              {"resolutions", kResolutions},
              {"samples", samples_json}};
    return j.dump(2) + "\n";
}

Manifest
Manifest::from_json(const std::string& text, const fs::path& root) {
    Manifest m;
    m.root = root;
    try {
        const json j = json::parse(text);
        m.version = j.at("version").get<int>();
        if (m.version != 1) {
            throw FormatError("manifest version " + std::to_string(m.version) + " is not supported");
        }
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.material = {j.at("material").at("E").get<double>(), j.at("material").at("nu").get<double>()};
        const auto& w = j.at("load_window");
        m.window = {w.at("lo").get<double>(), w.at("hi").get<double>(), w.at("min_magnitude").get<double>()};
        const auto& n = j.at("normalization");
        if (n.at("kind").get<std::string>() != "log1p") {
            throw FormatError("manifest normalization kind must be log1p");
        }
        m.normalization = {n.at("sigma_ref").get<double>(), n.at("sigma_max").get<double>()};
        if (j.at("resolutions").get<std::vector<int>>() !=
            std::vector<int>(kResolutions.begin(), kResolutions.end())) {
            throw FormatError("manifest resolutions must be 32, 64, 128, 256");
        }
        for (const auto& s : j.at("samples")) {
            m.samples.push_back(record_from_json(s));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    if (!(m.normalization.sigma_ref > 0.0 && m.normalization.sigma_max > 0.0)) {
        throw FormatError("manifest normalization record must have positive sigma_ref and sigma_max");
    }
    return m;
}

void
Manifest::save() const {
    fs::create_directories(root);
    write_text_atomic(root / kManifestName, to_json());
}

Manifest
Manifest::load(const fs::path& dir) {
    const fs::path file = fs::is_directory(dir) ? dir / kManifestName : dir;
    return from_json(read_text(file), file.parent_path());
}

std::string
sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%05d", index);
    return buf;
}

std::map<int, StressField>
solve_sample(const CaseSpec& spec, const fem::Material& material) {
    std::map<int, StressField> out;
    for (int n : kResolutions) {
        out.emplace(n, fem::solve_case(spec.to_case(n, material)).quantized());
    }
    return out;
}

namespace {

struct Solved {
    SampleRecord record;
    double field_max = 0.0;  // over every stored resolution
    bool reused = false;
};

std::optional<double>
reusable(const Manifest& layout, const std::string& id) {
    double peak = 0.0;
    for (int n : kResolutions) {
        const fs::path p = layout.field_path(id, n);
        if (!fs::exists(p)) {
            return std::nullopt;
        }
        try {
            const StressField f = layout.load_field(id, n);
            f.validate();
            peak = std::max(peak, f.max());
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    return peak;
}

Solved
produce(const GeneratorConfig& config, const Manifest& layout, int index, const Logger& log) {
    Solved s;
    s.record.id = sample_id(index);
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
    Rng rng(seed);
    const auto existing = reusable(layout, s.record.id);
    for (int attempt = 0;; ++attempt) {
        CaseSpec spec = sample_case(rng, config);
        spec.seed = seed;
        if (existing) {
            // Earlier draws of this stream were accepted unless the solver rejected them,
            // and a rejected draw leaves no files behind.
            s.record.spec = spec;
            const StressField finest = layout.load_field(s.record.id, kResolutions.back());
            s.record.max_stress = finest.max();
            s.record.mean_stress = finest.mean();
            s.field_max = *existing;
            s.reused = true;
            return s;
        }
        try {
            const auto fields = solve_sample(spec, config.material);
            for (const auto& [n, f] : fields) {
                f.validate();
                s.field_max = std::max(s.field_max, f.max());
                write_smf(layout.field_path(s.record.id, n), f);
            }
            const StressField& finest = fields.at(kResolutions.back());
            s.record.spec = spec;
            s.record.max_stress = finest.max();
            s.record.mean_stress = finest.mean();
            return s;
        } catch (const SolverError& e) {
            if (log) {
                log("sample " + s.record.id + ": draw " + std::to_string(attempt) + " rejected (" + e.what() +
                    "), resampling");
            }
            if (attempt > 1000) {
                throw SolverError("sample " + s.record.id + ": no solvable case after 1000 draws");
            }
        }
    }
}

}  // namespace

Manifest
generate_dataset(const GeneratorConfig& config, const fs::path& out_dir, const Logger& log) {
    config.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    Manifest m;
    m.root = out_dir;
    m.master_seed = config.seed;
    m.material = config.material;
    m.window = config.window;

    std::vector<std::optional<Solved>> results(static_cast<std::size_t>(config.count));
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex log_mutex;
    std::exception_ptr failure;
    const Logger safe_log = [&](const std::string& msg) {
        if (log) {
            std::lock_guard<std::mutex> lock(log_mutex);
            log(msg);
        }
    };
    auto worker = [&] {
        for (int i = next++; i < config.count; i = next++) {
            try {
                results[static_cast<std::size_t>(i)] = produce(config, m, i, safe_log);
                const int finished = ++done;
                if (finished % 10 == 0 || finished == config.count) {
                    safe_log("ready " + std::to_string(finished) + "/" + std::to_string(config.count));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(log_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = config.count;
                return;
            }
        }
    };
    const int jobs = std::min(config.jobs, config.count);
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        const int completed = done.load();
        try {
            std::rethrow_exception(failure);
        } catch (const Error& e) {
            throw IoError(std::string(e.what()) + " (" + std::to_string(completed) + "/" +
                          std::to_string(config.count) + " samples complete; rerun to resume)");
        }
    }

    double field_max = 0.0;
    int reused = 0;
    for (auto& r : results) {
        field_max = std::max(field_max, r->field_max);
        reused += r->reused ? 1 : 0;
        m.samples.push_back(std::move(r->record));
    }
    if (reused > 0) {
        safe_log("reused " + std::to_string(reused) + " previously solved samples");
    }
    const double mean = m.mean_stress();
    if (!(mean > 0.0 && field_max > 0.0)) {
        throw SolverError("generate_dataset: all stress fields are zero; cannot normalize");
    }
    m.normalization = {mean, field_max};
    m.save();
    return m;
}

std::string
dataset_digest(const Manifest& manifest) {
    Manifest table = manifest;
    for (auto& r : table.samples) {
        r.split = Split::None;
    }
    const std::string text = table.to_json();
    std::uint64_t h = fnv1a64(text.data(), text.size());
    for (const auto& r : manifest.samples) {
        for (int n : kResolutions) {
            const std::string bytes = read_text(manifest.field_path(r.id, n));
            h = fnv1a64(bytes.data(), bytes.size(), h);
        }
    }
    return hex64(h);
}

model::BasicTensor<double>
normalize(const StressField& field, const Normalization& norm) {
    const int n = field.resolution();
    model::BasicTensor<double> out(n, n, 1);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double s = field.at(r, c);
            if (!(s >= 0.0) || !std::isfinite(s)) {
                throw InvalidArgument("normalize: stress at (" + std::to_string(r) + ", " + std::to_string(c) +
                                      ") is " + std::to_string(s) + "; fields must be finite and >= 0");
            }
            out.at(r, c, 0) = norm.forward(s);
        }
    }
    return out;
}

namespace {

template <typename T>
StressField
denormalize_impl(const model::BasicTensor<T>& grid, const Normalization& norm) {
    if (grid.height() != grid.width() || grid.channels() != 1) {
        throw InvalidArgument("denormalize: expected a square single-channel grid, got " + grid.shape_string());
    }
    const int n = grid.height();
    StressField out(n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double g = static_cast<double>(grid.at(r, c, 0));
            if (!std::isfinite(g)) {
                throw InvalidArgument("denormalize: non-finite value at (" + std::to_string(r) + ", " +
                                      std::to_string(c) + ")");
            }
            // Network output may dip below zero; stress cannot.
            out.at(r, c) = std::max(0.0, norm.inverse(g));
        }
    }
    return out;
}

}  // namespace

StressField
denormalize(const model::BasicTensor<double>& grid, const Normalization& norm) {
    return denormalize_impl(grid, norm);
}

StressField
denormalize(const model::Tensor& grid, const Normalization& norm) {
    return denormalize_impl(grid, norm);
}

Manifest
split(const Manifest& manifest, int train_count, int test_count, std::uint64_t seed) {
    const int total = static_cast<int>(manifest.samples.size());
    if (train_count < 0 || test_count < 0 || train_count + test_count > total) {
        throw InvalidArgument("split: " + std::to_string(train_count) + " train + " + std::to_string(test_count) +
                              " test exceeds " + std::to_string(total) + " samples");
    }
    std::vector<int> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    Manifest out = manifest;
    for (int i = 0; i < total; ++i) {
        auto& r = out.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        r.split = i < train_count ? Split::Train : (i < train_count + test_count ? Split::Test : Split::None);
    }
    return out;
}

template <typename T>
model::BasicTensor<T>
rotate90(const model::BasicTensor<T>& t, int k) {
    if (t.height() != t.width()) {
        throw InvalidArgument("rotate90: tensor " + t.shape_string() + " is not square");
    }
    k = ((k % 4) + 4) % 4;
    const int n = t.height();
    model::BasicTensor<T> out(n, n, t.channels());
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            int sr = r, sc = c;
            switch (k) {
                case 0: break;
                case 1: sr = c; sc = n - 1 - r; break;
                case 2: sr = n - 1 - r; sc = n - 1 - c; break;
                default: sr = n - 1 - c; sc = r; break;
            }
            for (int ch = 0; ch < t.channels(); ++ch) {
                out.at(r, c, ch) = t.at(sr, sc, ch);
            }
        }
    }
    return out;
}

template <typename T>
FieldPair<T>
augment_rotate(const FieldPair<T>& pair, int k) {
    return {rotate90(pair.low, k), rotate90(pair.high, k)};
}

template model::BasicTensor<float> rotate90(const model::BasicTensor<float>&, int);
template model::BasicTensor<double> rotate90(const model::BasicTensor<double>&, int);
template FieldPair<float> augment_rotate(const FieldPair<float>&, int);
template FieldPair<double> augment_rotate(const FieldPair<double>&, int);

}  // namespace meshboost::dataset
