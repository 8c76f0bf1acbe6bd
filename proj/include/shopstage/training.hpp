// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shopstage/attribution.hpp"
#include "shopstage/features.hpp"
#include "shopstage/ingest.hpp"
#include "shopstage/model.hpp"

namespace shopstage {

struct TrainConfig {
    AttributionModel attribution = AttributionModel::Linear;
    NormMethod normalization = NormMethod::MinMax;
    int epochs = 50;
    double learning_rate = 1e-3;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    /// Global gradient-norm clip; off when empty.
    std::optional<double> clip_norm;
    double half_life_base = 2.0;
    /// Worker threads for per-journey forward/backward. Results do not depend
    /// on this value.
    std::size_t threads = 1;
    ModelConfig model;

    /// Throws InvalidConfig.
    void validate() const;
};

/// Rpt statistics plus normalizer, both fitted on the training split.
struct FeaturePipeline {
    RptStats rpt;
    Normalizer normalizer;

    static FeaturePipeline fit(std::span<const Journey> train, NormMethod method);
    /// Raw encoding (with class ids) followed by normalization.
    EncodedJourney encode(const Journey& journey) const;
};

/// A journey ready for the network.
struct Example {
    std::string client_id;
    JourneyTensors inputs;
    std::vector<int> class_ids;
    LabelMatrix labels;
};

Example make_example(const std::string& client_id, const EncodedJourney& normalized, AttributionModel attribution,
                     double half_life_base = 2.0);
std::vector<Example> make_examples(std::span<const Journey> journeys, const FeaturePipeline& pipeline,
                                   AttributionModel attribution, double half_life_base = 2.0);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Validation size is floor(n * val_fraction) (with a 1e-9 guard against
/// representation error); membership is a seeded shuffle and both sides keep
/// input order. Throws InvalidConfig for a fraction outside (0, 1) and
/// DegenerateSplit when either side would be empty.
SplitIndices split_indices(std::size_t n, double val_fraction, std::uint64_t seed);

struct JourneySplit {
    std::vector<Journey> train;
    std::vector<Journey> val;
};

JourneySplit split_by_user(std::span<const Journey> journeys, double val_fraction, std::uint64_t seed);

struct EpochStats {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    /// Parameters from the epoch with the lowest validation MSE.
    ModelParams params;
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

/// Mini-batch Adam (0.9 / 0.999 / 1e-8) on the journey-pooled MSE. Gradients
/// of a batch are summed in journey order. Throws NonFiniteLoss on
/// divergence.
TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig& config);

/// Pooled MSE over every session of every journey.
double dataset_mse(const ModelParams& params, std::span<const Example> examples);

// ---------------------------------------------------------------------------
// Evaluation

struct Band {
    double lo = 0.5;
    double hi = 2.0;
};

inline constexpr Band kWideBand{0.5, 2.0};
inline constexpr Band kTightBand{0.8, 1.25};

using ClassFlags = std::array<bool, kNumClasses>;
using ClassCounts = std::array<int, kNumClasses>;

/// Predicted count c = p * n_sessions. For an actual count k > 0 the class is
/// correct iff lo*k <= c <= hi*k; for k = 0 iff c < lo.
ClassFlags threshold_accuracy(const ClassRow& pred_last, const ClassCounts& counts_last, std::size_t n_sessions,
                              Band band);

/// Time-decay variant: correct iff lo*t <= p <= hi*t for a label t > 0, and
/// p * n_sessions < lo for t = 0.
ClassFlags threshold_accuracy_decay(const ClassRow& pred_last, const ClassRow& label_last, std::size_t n_sessions,
                                    Band band);

struct EvalReport {
    double mse = 0.0;
    double acc_wide = 0.0;
    double acc_tight = 0.0;
    std::array<double, kNumClasses> per_class_wide{};
    std::array<double, kNumClasses> per_class_tight{};
    std::size_t journeys = 0;
    std::size_t sessions = 0;
};

/// Accuracies look only at each journey's last session and average the
/// per-class flags over journeys (per class) and over journeys and classes
/// (overall).
EvalReport evaluate_predictions(std::span<const LabelMatrix> predictions, std::span<const Example> examples,
                                AttributionModel attribution, Band wide = kWideBand, Band tight = kTightBand);

EvalReport evaluate(const ModelParams& params, std::span<const Example> examples, AttributionModel attribution,
                    Band wide = kWideBand, Band tight = kTightBand);

/// Key-value block with the loss and both band accuracies.
std::string format_eval_report(const EvalReport& report, AttributionModel attribution, NormMethod normalization);

/// Per-class mean label over all training sessions.
ClassRow prevalence_baseline(std::span<const Example> train_set);
/// MSE of predicting `baseline` for every session.
double baseline_mse(const ClassRow& baseline, std::span<const Example> examples);

} // namespace shopstage
