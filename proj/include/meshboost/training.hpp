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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshboost/common.hpp"
#include "meshboost/dataset.hpp"
#include "meshboost/loss.hpp"
#include "meshboost/model.hpp"

namespace meshboost::training {

/// Raised when the loss stops being finite; a diagnostic checkpoint has been written.
class NonFiniteLoss : public Error {
 public:
    using Error::Error;
};

/// Coarse input density shared by every scale.
inline constexpr int kLowResolution = 32;

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 16;
    int epochs = 400;
    std::uint64_t seed = 0;
    int scale = 8;
    std::string manifest;
    int checkpoint_every = 10;  // epochs; 0 writes only the final checkpoint
    bool augment = true;        // random quarter turns per sample per epoch

    // Architecture; scale comes from `scale`.
    int blocks = 8;
    int layers = 8;
    int filters = 64;
    int kernel = 3;

    // Adaptive-moment coefficients.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void
    validate() const;
    model::ModelConfig
    model_config() const;
    int
    high_resolution() const {
        return kLowResolution * scale;
    }

    std::string
    to_json() const;
    /// Missing keys keep their defaults; unknown keys are an error.
    static TrainConfig
    from_json(const std::string& text, const TrainConfig& defaults);
    static TrainConfig
    from_json(const std::string& text);

    /// Names of the fields that differ, ignoring those a resumed run may change
    /// (epochs, checkpoint_every, manifest path).
    std::vector<std::string>
    resume_conflicts(const TrainConfig& other) const;

    bool
    operator==(const TrainConfig&) const = default;
};

/// Adaptive-moment optimizer with bias correction and no weight decay.
class Adam {
 public:
    Adam() = default;
    Adam(const model::ModelConfig& config, double lr, double beta1, double beta2, double epsilon);

    void
    step(model::ModelWeights& weights, const model::ModelWeights& grads);

    std::int64_t steps = 0;
    model::ModelWeights m;
    model::ModelWeights v;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainState {
    model::ModelWeights weights;
    Adam optimizer;
    int epoch = 0;  // completed epochs
    std::vector<double> train_mae;
    std::vector<double> heldout_mae;  // NaN when there is no held-out split
};

/// Normalized low/high tensors for one scale.
struct TrainData {
    dataset::Normalization normalization;
    std::vector<dataset::FieldPair<float>> train;
    std::vector<dataset::FieldPair<float>> test;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    /// Reads the train and test splits of `manifest` at 32 and 32·scale.
    static TrainData
    load(const dataset::Manifest& manifest, int scale);
};

/// Throws if the rotated pair was not produced by the same quarter turn on both fields.
void
check_joint_rotation(const dataset::FieldPair<float>& original, const dataset::FieldPair<float>& rotated, int k);

using Logger = std::function<void(const std::string&)>;

class Trainer {
 public:
    /// Fresh run: weights from init_weights with a stream of config.seed.
    Trainer(TrainConfig config, TrainData data);
    /// Continue from a saved state.
    Trainer(TrainConfig config, TrainData data, TrainState state);

    /// One optimizer step on `batch`; returns the batch loss before the update.
    double
    step(std::span<const dataset::FieldPair<float>> batch);

    /// Shuffled, augmented pass over the training split, then the epoch's
    /// train and held-out MAE on unaugmented data. Appends to the history.
    void
    run_epoch();

    /// Mean per-sample MAE in normalized units under the current weights.
    double
    evaluate(std::span<const dataset::FieldPair<float>> pairs);

    const TrainState&
    state() const {
        return state_;
    }
    const TrainConfig&
    config() const {
        return config_;
    }
    const TrainData&
    data() const {
        return data_;
    }

 private:
    TrainConfig config_;
    TrainData data_;
    TrainState state_;
    model::Network<float> net_;
    model::ModelWeights grads_;
};

/// Writes weights, optimizer moments, history, config, and normalization.
void
save_state(const std::filesystem::path& path,
           const TrainConfig& config,
           const TrainState& state,
           const dataset::Normalization& normalization);

struct SavedRun {
    TrainConfig config;
    TrainState state;
    dataset::Normalization normalization;
};

SavedRun
load_state(const std::filesystem::path& path);

/// Loads a checkpoint to continue under `config`. Throws InvalidArgument listing
/// every conflicting field when the saved run is incompatible.
TrainState
resume(const std::filesystem::path& checkpoint, const TrainConfig& config);

/// Weights, scale, and normalization needed for inference.
struct InferenceModel {
    model::ModelWeights weights;
    dataset::Normalization normalization;
    int scale = 0;

    static InferenceModel
    load(const std::filesystem::path& checkpoint);
};

struct TrainResult {
    TrainState state;
    std::filesystem::path final_checkpoint;
    std::filesystem::path curve;
};

inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kLatestCheckpoint = "latest.ckpt";
inline constexpr const char* kDiagnosticCheckpoint = "diagnostic.ckpt";
inline constexpr const char* kCurveFile = "curve.csv";
inline constexpr const char* kConfigFile = "train_config.json";

/// Runs epochs state.epoch + 1 .. config.epochs into `out_dir`: curve CSV,
/// resolved config JSON, checkpoint every config.checkpoint_every epochs,
/// and the final checkpoint. Pass a resumed state to continue a run.
TrainResult
train(const TrainConfig& config,
      const dataset::Manifest& manifest,
      const std::filesystem::path& out_dir,
      const Logger& log = {},
      std::optional<TrainState> initial = std::nullopt);

}  // namespace meshboost::training
