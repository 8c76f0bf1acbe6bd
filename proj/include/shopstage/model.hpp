// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shopstage/attribution.hpp"
#include "shopstage/features.hpp"

namespace shopstage {

/// Dimensions of the two-level recurrent network. The defaults give the
/// 15,246-parameter model.
struct ModelConfig {
    std::size_t hit_dim = kHitDim;
    std::size_t session_dim = kSessionDim;
    std::size_t user_dim = kUserDim;
    std::size_t hidden = 30;
    std::size_t fc_hidden = 60;
    std::size_t out_dim = kNumClasses;

    /// Throws InvalidConfig unless every dim is positive and out_dim == 6.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 4(h(hit+h)+h) + 4(h(h+session+h)+h) + (h+user)fc + fc + 6fc + 6
std::size_t parameter_count(const ModelConfig& config);

/// One named weight array inside the flat parameter buffer.
struct TensorInfo {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return rows * cols; }
};

/// Layer order: lstm_hits.{weight,bias}, lstm_sessions.{weight,bias},
/// fc1.{weight,bias}, fc2.{weight,bias}. LSTM weights are 4h x (in + h) with
/// gate blocks ordered input, forget, cell, output and act on [x ; h_prev].
std::vector<TensorInfo> parameter_layout(const ModelConfig& config);

/// All weights in one contiguous buffer, laid out per parameter_layout().
/// Gradients use the same type.
class ModelParams {
public:
    ModelParams() = default;
    /// Zero-initialized.
    explicit ModelParams(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    const std::vector<TensorInfo>& layout() const { return layout_; }

    std::span<double> tensor(std::size_t index);
    std::span<const double> tensor(std::size_t index) const;
    /// Throws BadValue for an unknown name.
    std::span<double> tensor(const std::string& name);
    std::span<const double> tensor(const std::string& name) const;

    void set_zero();
    /// FNV-1a over the raw bytes; identifies a parameter state.
    std::uint64_t fingerprint() const;

    friend bool operator==(const ModelParams& a, const ModelParams& b) {
        return a.config_ == b.config_ && a.values_ == b.values_;
    }

private:
    ModelConfig config_;
    std::vector<TensorInfo> layout_;
    std::vector<double> values_;
};

enum TensorIndex : std::size_t {
    kHitsWeight = 0,
    kHitsBias,
    kSessionsWeight,
    kSessionsBias,
    kFc1Weight,
    kFc1Bias,
    kFc2Weight,
    kFc2Bias,
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in the number of
/// columns of the weight matrix; forget-gate biases 1, all other biases 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Dimension-agnostic model input for one journey.
struct JourneyTensors {
    std::vector<double> user;
    std::vector<std::vector<double>> sessions;
    /// Per session, hits flattened row-major (T_i x hit_dim).
    std::vector<std::vector<double>> hits;

    std::size_t num_sessions() const { return sessions.size(); }
};

JourneyTensors to_tensors(const EncodedJourney& journey);

struct LstmStep {
    std::vector<double> input;  // [x ; h_prev]
    std::vector<double> gates;  // activated i, f, g, o
    std::vector<double> c_prev;
    std::vector<double> c;
    std::vector<double> tanh_c;
    std::vector<double> h;
};

struct SessionTrace {
    std::vector<LstmStep> hit_steps;
    LstmStep session_step;
    std::vector<double> head_input;  // [session hidden ; user]
    std::vector<double> fc1_pre;
    std::vector<double> fc1_out;
};

/// Activations kept from forward() for backward().
struct ForwardTrace {
    ModelConfig config;
    std::uint64_t params_fingerprint = 0;
    std::vector<SessionTrace> sessions;
    LabelMatrix predictions;
};

struct ForwardResult {
    LabelMatrix predictions;
    ForwardTrace trace;
};

/// Session i: the hit LSTM runs from a zero state over that session's hits and
/// its final hidden state H_i is concatenated with the previous session's
/// features (zeros for the first session). The session LSTM carries its state
/// across the journey; each of its outputs, joined with the user vector, goes
/// through fc1 + ReLU and fc2 + sigmoid.
///
/// Throws ShapeMismatch on dimension errors and EmptyHitSequence for a session
/// without hits.
ForwardResult forward(const ModelParams& params, const JourneyTensors& journey);

/// Predictions only; skips building a trace.
LabelMatrix predict(const ModelParams& params, const JourneyTensors& journey);

/// Mean of (pred - label)^2 over the (session, class) cells of rows whose mask
/// entry is true; an empty mask means every row. Throws ShapeMismatch.
double mse_loss(const LabelMatrix& predictions, const LabelMatrix& labels, std::span<const bool> mask = {});

/// Adds d/dparams [cell_weight * sum over cells (pred - label)^2] into `grads`.
/// Throws StaleTrace if `params` changed since the forward pass.
void accumulate_gradients(const ModelParams& params, const ForwardTrace& trace, const LabelMatrix& labels,
                          double cell_weight, ModelParams& grads);

/// Gradient of mse_loss(trace.predictions, labels) for one journey.
ModelParams backward(const ModelParams& params, const ForwardTrace& trace, const LabelMatrix& labels);

} // namespace shopstage
