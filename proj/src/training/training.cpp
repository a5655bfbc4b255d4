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

#include "meshboost/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "meshboost/checkpoint.hpp"

namespace meshboost::training {

namespace fs = std::filesystem;
using json = nlohmann::json;
using dataset::FieldPair;

namespace {

// Independent random streams under the master seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

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
        throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

json
history_json(const std::vector<double>& values) {
    json out = json::array();
    for (double v : values) {
        out.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    return out;
}

std::vector<double>
history_from_json(const json& j) {
    std::vector<double> out;
    for (const auto& v : j) {
        out.push_back(v.is_null() ? kNaN : v.get<double>());
    }
    return out;
}

std::string
history_digest(const std::vector<double>& train, const std::vector<double>& heldout) {
    std::uint64_t h = fnv1a64(train.data(), train.size() * sizeof(double));
    h = fnv1a64(heldout.data(), heldout.size() * sizeof(double), h);
    return hex64(h);
}

std::string
format_mae(double v) {
    if (!std::isfinite(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void
TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("TrainConfig: learning_rate must be finite and >= 0, got " +
                              std::to_string(learning_rate));
    }
    if (batch_size < 1) {
        throw InvalidArgument("TrainConfig: batch_size must be >= 1, got " + std::to_string(batch_size));
    }
    if (epochs < 1) {
        throw InvalidArgument("TrainConfig: epochs must be >= 1, got " + std::to_string(epochs));
    }
    if (checkpoint_every < 0) {
        throw InvalidArgument("TrainConfig: checkpoint_every must be >= 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
        throw InvalidArgument("TrainConfig: need 0 <= beta1, beta2 < 1 and epsilon > 0");
    }
    model_config().validate();
}

model::ModelConfig
TrainConfig::model_config() const {
    return {blocks, layers, filters, kernel, scale};
}

std::string
TrainConfig::to_json() const {
    const json j = {{"learning_rate", learning_rate},
                    {"batch_size", batch_size},
                    {"epochs", epochs},
                    {"seed", seed},
                    {"scale", scale},
                    {"manifest", manifest},
                    {"checkpoint_every", checkpoint_every},
                    {"augment", augment},
                    {"blocks", blocks},
                    {"layers", layers},
                    {"filters", filters},
                    {"kernel", kernel},
                    {"beta1", beta1},
                    {"beta2", beta2},
                    {"epsilon", epsilon}};
    return j.dump(2) + "\n";
}

TrainConfig
TrainConfig::from_json(const std::string& text, const TrainConfig& defaults) {
    TrainConfig c = defaults;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("TrainConfig: ") + e.what());
    }
    if (!j.is_object()) {
        throw InvalidArgument("TrainConfig: expected a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "epochs") c.epochs = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "scale") c.scale = value.get<int>();
            else if (key == "manifest") c.manifest = value.get<std::string>();
            else if (key == "checkpoint_every") c.checkpoint_every = value.get<int>();
            else if (key == "augment") c.augment = value.get<bool>();
            else if (key == "blocks") c.blocks = value.get<int>();
            else if (key == "layers") c.layers = value.get<int>();
            else if (key == "filters") c.filters = value.get<int>();
            else if (key == "kernel") c.kernel = value.get<int>();
            else if (key == "beta1") c.beta1 = value.get<double>();
            else if (key == "beta2") c.beta2 = value.get<double>();
            else if (key == "epsilon") c.epsilon = value.get<double>();
            else throw InvalidArgument("TrainConfig: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw InvalidArgument("TrainConfig: bad value for '" + key + "': " + e.what());
        }
    }
    return c;
}

TrainConfig
TrainConfig::from_json(const std::string& text) {
    return from_json(text, TrainConfig{});
}

std::vector<std::string>
TrainConfig::resume_conflicts(const TrainConfig& o) const {
    std::vector<std::string> out;
    auto check = [&](const char* name, bool same) {
        if (!same) {
            out.emplace_back(name);
        }
    };
    check("learning_rate", learning_rate == o.learning_rate);
    check("batch_size", batch_size == o.batch_size);
    check("seed", seed == o.seed);
    check("scale", scale == o.scale);
    check("augment", augment == o.augment);
    check("blocks", blocks == o.blocks);
    check("layers", layers == o.layers);
    check("filters", filters == o.filters);
    check("kernel", kernel == o.kernel);
    check("beta1", beta1 == o.beta1);
    check("beta2", beta2 == o.beta2);
    check("epsilon", epsilon == o.epsilon);
    return out;
}

Adam::Adam(const model::ModelConfig& config, double lr_, double beta1_, double beta2_, double epsilon_)
    : m(model::ModelWeights::zeros(config)),
      v(model::ModelWeights::zeros(config)),
      lr(lr_),
      beta1(beta1_),
      beta2(beta2_),
      epsilon(epsilon_) {}

void
Adam::step(model::ModelWeights& weights, const model::ModelWeights& grads) {
    ++steps;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    const float b1 = static_cast<float>(beta1);
    const float b2 = static_cast<float>(beta2);
    const float step_size = static_cast<float>(lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(epsilon);
    auto& wp = weights.parameters();
    for (std::size_t p = 0; p < wp.size(); ++p) {
        float* w = wp[p].values.data();
        const float* g = grads.parameters()[p].values.data();
        float* mp = m.parameters()[p].values.data();
        float* vp = v.parameters()[p].values.data();
        const std::size_t n = wp[p].values.size();
        for (std::size_t i = 0; i < n; ++i) {
            mp[i] = b1 * mp[i] + (1.0f - b1) * g[i];
            vp[i] = b2 * vp[i] + (1.0f - b2) * g[i] * g[i];
            w[i] -= step_size * mp[i] / (std::sqrt(vp[i] * inv_c2) + eps);
        }
    }
}

TrainData
TrainData::load(const dataset::Manifest& manifest, int scale) {
    const int high = kLowResolution * scale;
    if (!dataset::is_dataset_resolution(high)) {
        throw InvalidArgument("scale " + std::to_string(scale) + " needs a " + std::to_string(high) +
                              "² target, which the dataset does not store");
    }
    TrainData d;
    d.normalization = manifest.normalization;
    auto fill = [&](dataset::Split split, std::vector<FieldPair<float>>& pairs, std::vector<std::string>& ids) {
        for (const auto* r : manifest.with_split(split)) {
            pairs.push_back({dataset::normalize(manifest.load_field(r->id, kLowResolution), d.normalization)
                                 .cast<float>(),
                             dataset::normalize(manifest.load_field(r->id, high), d.normalization).cast<float>()});
            ids.push_back(r->id);
        }
    };
    fill(dataset::Split::Train, d.train, d.train_ids);
    fill(dataset::Split::Test, d.test, d.test_ids);
    if (d.train.empty()) {
        throw InvalidArgument("dataset has no training samples; run split first");
    }
    return d;
}

void
check_joint_rotation(const FieldPair<float>& original, const FieldPair<float>& rotated, int k) {
    // The top-left pixel after a quarter-turn rotation comes from a known
    // corner; both fields must agree on which.
    auto source = [&](const model::Tensor& t) {
        const int n = t.height() - 1;
        switch (((k % 4) + 4) % 4) {
            case 0: return t.at(0, 0, 0);
            case 1: return t.at(0, n, 0);
            case 2: return t.at(n, n, 0);
            default: return t.at(n, 0, 0);
        }
    };
    if (rotated.low.at(0, 0, 0) != source(original.low) || rotated.high.at(0, 0, 0) != source(original.high) ||
        rotated.low.height() != original.low.height() || rotated.high.height() != original.high.height()) {
        throw Error("augmentation broke low/high pairing for rotation k=" + std::to_string(k));
    }
}

Trainer::Trainer(TrainConfig config, TrainData data)
    : config_(std::move(config)), data_(std::move(data)), net_(config_.model_config()) {
    config_.validate();
    Rng init(derive_seed(config_.seed, kInitStream));
    state_.weights = model::init_weights(init, config_.model_config());
    state_.optimizer =
        Adam(config_.model_config(), config_.learning_rate, config_.beta1, config_.beta2, config_.epsilon);
    grads_ = model::ModelWeights::zeros(config_.model_config());
}

Trainer::Trainer(TrainConfig config, TrainData data, TrainState state)
    : config_(std::move(config)), data_(std::move(data)), state_(std::move(state)), net_(config_.model_config()) {
    config_.validate();
    if (!(state_.weights.config() == config_.model_config())) {
        throw InvalidArgument("Trainer: saved weights do not match the model config");
    }
    state_.optimizer.lr = config_.learning_rate;
    grads_ = model::ModelWeights::zeros(config_.model_config());
}

double
Trainer::step(std::span<const FieldPair<float>> batch) {
    std::vector<model::Tensor> lows, highs;
    lows.reserve(batch.size());
    highs.reserve(batch.size());
    for (const auto& p : batch) {
        lows.push_back(p.low);
        highs.push_back(p.high);
    }
    const double loss = net_.loss_and_gradient(state_.weights, lows, highs, grads_);
    if (!std::isfinite(loss)) {
        throw NonFiniteLoss("non-finite training loss at optimizer step " +
                            std::to_string(state_.optimizer.steps + 1) + " (epoch " +
                            std::to_string(state_.epoch + 1) + ")");
    }
    state_.optimizer.step(state_.weights, grads_);
    return loss;
}

void
Trainer::run_epoch() {
    const int epoch = state_.epoch + 1;
    Rng rng(derive_seed(derive_seed(config_.seed, kEpochStream), static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(data_.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());

    std::vector<FieldPair<float>> batch;
    batch.reserve(static_cast<std::size_t>(config_.batch_size));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& pair = data_.train[order[i]];
        const int k = config_.augment ? static_cast<int>(rng.below(4)) : 0;
        batch.push_back(dataset::augment_rotate(pair, k));
        check_joint_rotation(pair, batch.back(), k);
        if (static_cast<int>(batch.size()) == config_.batch_size || i + 1 == order.size()) {
            step(batch);
            batch.clear();
        }
    }
    state_.epoch = epoch;
    state_.train_mae.push_back(evaluate(data_.train));
    state_.heldout_mae.push_back(data_.test.empty() ? kNaN : evaluate(data_.test));
}

double
Trainer::evaluate(std::span<const FieldPair<float>> pairs) {
    if (pairs.empty()) {
        throw InvalidArgument("evaluate: no samples");
    }
    double sum = 0.0;
    for (const auto& p : pairs) {
        const model::Tensor pred = net_.forward(state_.weights, p.low);
        sum += mae_loss<float>(pred.values(), p.high.values());
    }
    return sum / static_cast<double>(pairs.size());
}

void
save_state(const fs::path& path,
           const TrainConfig& config,
           const TrainState& state,
           const dataset::Normalization& normalization) {
    model::Checkpoint cp;
    cp.config = config.model_config();
    // The dataset location is left out so checkpoint bytes do not depend on it.
    TrainConfig stored = config;
    stored.manifest.clear();
    const json meta = {
        {"kind", "train_state"},
        {"train_config", json::parse(stored.to_json())},
        {"epoch", state.epoch},
        {"adam_steps", state.optimizer.steps},
        {"train_mae", history_json(state.train_mae)},
        {"heldout_mae", history_json(state.heldout_mae)},
        {"loss_history_digest", history_digest(state.train_mae, state.heldout_mae)},
        {"normalization",
         {{"kind", "log1p"}, {"sigma_ref", normalization.sigma_ref}, {"sigma_max", normalization.sigma_max}}}};
    cp.metadata = meta.dump();
    cp.blobs = model::weight_blobs(state.weights);
    if (state.optimizer.m.config() == cp.config) {
        for (auto& b : model::weight_blobs(state.optimizer.m, "adam.m.")) cp.blobs.push_back(std::move(b));
        for (auto& b : model::weight_blobs(state.optimizer.v, "adam.v.")) cp.blobs.push_back(std::move(b));
    }
    model::write_checkpoint(path, cp);
}

SavedRun
load_state(const fs::path& path) {
    const model::Checkpoint cp = model::read_checkpoint(path);
    SavedRun run;
    try {
        const json meta = json::parse(cp.metadata);
        run.config = TrainConfig::from_json(meta.at("train_config").dump());
        run.state.epoch = meta.at("epoch").get<int>();
        run.state.train_mae = history_from_json(meta.at("train_mae"));
        run.state.heldout_mae = history_from_json(meta.at("heldout_mae"));
        const auto& n = meta.at("normalization");
        run.normalization = {n.at("sigma_ref").get<double>(), n.at("sigma_max").get<double>()};
        if (history_digest(run.state.train_mae, run.state.heldout_mae) !=
            meta.at("loss_history_digest").get<std::string>()) {
            throw FormatError(path.string() + ": loss history digest mismatch");
        }
        run.state.weights = model::weights_from_blobs(cp.config, cp.blobs);
        run.state.optimizer = Adam(cp.config, run.config.learning_rate, run.config.beta1, run.config.beta2,
                                   run.config.epsilon);
        run.state.optimizer.steps = meta.at("adam_steps").get<std::int64_t>();
        if (cp.find("adam.m.c1.weight") != nullptr) {
            run.state.optimizer.m = model::weights_from_blobs(cp.config, cp.blobs, "adam.m.");
            run.state.optimizer.v = model::weights_from_blobs(cp.config, cp.blobs, "adam.v.");
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad training metadata: " + e.what());
    }
    if (!(run.config.model_config() == cp.config)) {
        throw FormatError(path.string() + ": training config disagrees with the stored model config");
    }
    return run;
}

TrainState
resume(const fs::path& checkpoint, const TrainConfig& config) {
    SavedRun run = load_state(checkpoint);
    const auto conflicts = run.config.resume_conflicts(config);
    if (!conflicts.empty()) {
        std::string list;
        for (const auto& c : conflicts) {
            list += (list.empty() ? "" : ", ") + c;
        }
        throw InvalidArgument("resume: checkpoint config differs in: " + list);
    }
    if (static_cast<std::size_t>(run.state.epoch) != run.state.train_mae.size()) {
        throw FormatError(checkpoint.string() + ": loss history length does not match the epoch count");
    }
    return run.state;
}

InferenceModel
InferenceModel::load(const fs::path& checkpoint) {
    const SavedRun run = load_state(checkpoint);
    return {run.state.weights, run.normalization, run.config.scale};
}

TrainResult
train(const TrainConfig& config,
      const dataset::Manifest& manifest,
      const fs::path& out_dir,
      const Logger& log,
      std::optional<TrainState> initial) {
    config.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    write_text_atomic(out_dir / kConfigFile, config.to_json());

    TrainData data = TrainData::load(manifest, config.scale);
    const dataset::Normalization norm = data.normalization;
    if (log) {
        log("training r=" + std::to_string(config.scale) + " on " + std::to_string(data.train.size()) +
            " samples, " + std::to_string(data.test.size()) + " held out");
    }
    Trainer trainer = initial ? Trainer(config, std::move(data), std::move(*initial))
                              : Trainer(config, std::move(data));

    TrainResult result;
    result.curve = out_dir / kCurveFile;
    result.final_checkpoint = out_dir / kFinalCheckpoint;
    auto write_curve = [&] {
        std::ostringstream csv;
        csv << "epoch,train_mae,heldout_mae\n";
        const auto& s = trainer.state();
        for (std::size_t e = 0; e < s.train_mae.size(); ++e) {
            csv << (e + 1) << ',' << format_mae(s.train_mae[e]) << ',' << format_mae(s.heldout_mae[e]) << '\n';
        }
        write_text_atomic(result.curve, csv.str());
    };

    while (trainer.state().epoch < config.epochs) {
        try {
            trainer.run_epoch();
        } catch (const NonFiniteLoss& e) {
            const fs::path diag = out_dir / kDiagnosticCheckpoint;
            save_state(diag, config, trainer.state(), norm);
            write_curve();
            throw NonFiniteLoss(std::string(e.what()) + "; diagnostic checkpoint written to " + diag.string());
        }
        const auto& s = trainer.state();
        write_curve();
        if (log) {
            log("epoch " + std::to_string(s.epoch) + "/" + std::to_string(config.epochs) +
                " train_mae=" + format_mae(s.train_mae.back()) + " heldout_mae=" + format_mae(s.heldout_mae.back()));
        }
        if (config.checkpoint_every > 0 && s.epoch % config.checkpoint_every == 0) {
            save_state(out_dir / kLatestCheckpoint, config, s, norm);
        }
    }
    write_curve();
    save_state(result.final_checkpoint, config, trainer.state(), norm);
    result.state = trainer.state();
    return result;
}

}  // namespace meshboost::training
