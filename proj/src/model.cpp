// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "shopstage/error.hpp"
#include "shopstage/rng.hpp"

namespace shopstage {

void ModelConfig::validate() const {
    if (hit_dim == 0 || session_dim == 0 || user_dim == 0 || hidden == 0 || fc_hidden == 0) {
        throw Error(ErrorCode::InvalidConfig, "model dimensions must be positive");
    }
    if (out_dim != kNumClasses) throw Error(ErrorCode::InvalidConfig, "out_dim must be 6");
}

std::size_t parameter_count(const ModelConfig& c) {
    c.validate();
    const auto h = c.hidden;
    return 4 * (h * (c.hit_dim + h) + h) + 4 * (h * (h + c.session_dim + h) + h) + (h + c.user_dim) * c.fc_hidden +
           c.fc_hidden + c.fc_hidden * c.out_dim + c.out_dim;
}

std::vector<TensorInfo> parameter_layout(const ModelConfig& c) {
    c.validate();
    const auto h = c.hidden;
    std::vector<TensorInfo> out = {
        {"lstm_hits.weight", 4 * h, c.hit_dim + h, 0},
        {"lstm_hits.bias", 4 * h, 1, 0},
        {"lstm_sessions.weight", 4 * h, h + c.session_dim + h, 0},
        {"lstm_sessions.bias", 4 * h, 1, 0},
        {"fc1.weight", c.fc_hidden, h + c.user_dim, 0},
        {"fc1.bias", c.fc_hidden, 1, 0},
        {"fc2.weight", c.out_dim, c.fc_hidden, 0},
        {"fc2.bias", c.out_dim, 1, 0},
    };
    std::size_t offset = 0;
    for (auto& t : out) {
        t.offset = offset;
        offset += t.size();
    }
    return out;
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config), layout_(parameter_layout(config)) {
    const auto& last = layout_.back();
    values_.assign(last.offset + last.size(), 0.0);
}

std::span<double> ModelParams::tensor(std::size_t index) {
    const auto& t = layout_.at(index);
    return std::span<double>(values_).subspan(t.offset, t.size());
}

std::span<const double> ModelParams::tensor(std::size_t index) const {
    const auto& t = layout_.at(index);
    return std::span<const double>(values_).subspan(t.offset, t.size());
}

std::span<double> ModelParams::tensor(const std::string& name) {
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        if (layout_[i].name == name) return tensor(i);
    }
    throw Error(ErrorCode::BadValue, "no tensor named '" + name + "'");
}

std::span<const double> ModelParams::tensor(const std::string& name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        if (layout_[i].name == name) return tensor(i);
    }
    throw Error(ErrorCode::BadValue, "no tensor named '" + name + "'");
}

void ModelParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

std::uint64_t ModelParams::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values_) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFFu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p(config);
    Rng rng(derive_seed(seed, 0x1A17));
    const auto h = config.hidden;
    for (std::size_t i = 0; i < p.layout().size(); ++i) {
        const auto& info = p.layout()[i];
        auto t = p.tensor(i);
        if (info.cols == 1) {
            // Biases.
            std::fill(t.begin(), t.end(), 0.0);
            if (i == kHitsBias || i == kSessionsBias) std::fill(t.begin() + h, t.begin() + 2 * h, 1.0);
            continue;
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(info.cols));
        for (auto& w : t) w = rng.uniform(-bound, bound);
    }
    return p;
}

JourneyTensors to_tensors(const EncodedJourney& j) {
    JourneyTensors t;
    t.user.assign(j.user_vec.begin(), j.user_vec.end());
    for (const auto& s : j.session_vecs) t.sessions.emplace_back(s.begin(), s.end());
    for (const auto& hs : j.hit_vecs) {
        std::vector<double> flat;
        flat.reserve(hs.size() * kHitDim);
        for (const auto& h : hs) flat.insert(flat.end(), h.begin(), h.end());
        t.hits.push_back(std::move(flat));
    }
    return t;
}

namespace {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// y = W x + b, W row-major rows x cols.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x, std::span<double> y) {
    const auto cols = x.size();
    for (std::size_t r = 0; r < y.size(); ++r) {
        const double* row = w.data() + r * cols;
        double acc = b[r];
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

/// dW += dy x^T, db += dy, dx = W^T dy (dx may be empty).
void affine_backward(std::span<const double> w, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> db, std::span<double> dx) {
    const auto cols = x.size();
    if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t r = 0; r < dy.size(); ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        db[r] += g;
        double* drow = dw.data() + r * cols;
        const double* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) drow[c] += g * x[c];
        if (!dx.empty()) {
            for (std::size_t c = 0; c < cols; ++c) dx[c] += g * row[c];
        }
    }
}

/// One LSTM cell step. `input` must already hold [x ; h_prev].
void lstm_step(std::span<const double> w, std::span<const double> b, std::size_t hidden, LstmStep& s,
               std::span<const double> c_prev) {
    s.gates.assign(4 * hidden, 0.0);
    affine(w, b, s.input, s.gates);
    for (std::size_t k = 0; k < hidden; ++k) {
        s.gates[k] = sigmoid(s.gates[k]);
        s.gates[hidden + k] = sigmoid(s.gates[hidden + k]);
        s.gates[2 * hidden + k] = std::tanh(s.gates[2 * hidden + k]);
        s.gates[3 * hidden + k] = sigmoid(s.gates[3 * hidden + k]);
    }
    s.c_prev.assign(c_prev.begin(), c_prev.end());
    s.c.resize(hidden);
    s.tanh_c.resize(hidden);
    s.h.resize(hidden);
    for (std::size_t k = 0; k < hidden; ++k) {
        s.c[k] = s.gates[hidden + k] * c_prev[k] + s.gates[k] * s.gates[2 * hidden + k];
        s.tanh_c[k] = std::tanh(s.c[k]);
        s.h[k] = s.gates[3 * hidden + k] * s.tanh_c[k];
    }
}

/// Backward through one step. dh and dc hold the incoming gradients on h and c;
/// on return dc holds the gradient on c_prev and dinput the gradient on
/// [x ; h_prev].
void lstm_step_backward(std::span<const double> w, std::size_t hidden, const LstmStep& s, std::span<const double> dh,
                        std::span<double> dc, std::span<double> dw, std::span<double> db, std::span<double> dinput,
                        std::vector<double>& dpre) {
    dpre.assign(4 * hidden, 0.0);
    for (std::size_t k = 0; k < hidden; ++k) {
        const double i = s.gates[k];
        const double f = s.gates[hidden + k];
        const double g = s.gates[2 * hidden + k];
        const double o = s.gates[3 * hidden + k];
        const double tc = s.tanh_c[k];
        const double dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dpre[k] = dct * g * i * (1.0 - i);
        dpre[hidden + k] = dct * s.c_prev[k] * f * (1.0 - f);
        dpre[2 * hidden + k] = dct * i * (1.0 - g * g);
        dpre[3 * hidden + k] = dh[k] * tc * o * (1.0 - o);
        dc[k] = dct * f;
    }
    affine_backward(w, s.input, dpre, dw, db, dinput);
}

void check_shapes(const ModelConfig& c, const JourneyTensors& j) {
    if (j.sessions.empty()) throw Error(ErrorCode::ShapeMismatch, "journey has no sessions");
    if (j.user.size() != c.user_dim) throw Error(ErrorCode::ShapeMismatch, "user vector has wrong dimension");
    if (j.hits.size() != j.sessions.size())
        throw Error(ErrorCode::ShapeMismatch, "hit and session lists differ in length");
    for (std::size_t i = 0; i < j.sessions.size(); ++i) {
        if (j.sessions[i].size() != c.session_dim)
            throw Error(ErrorCode::ShapeMismatch, "session vector has wrong dimension");
        if (j.hits[i].empty())
            throw Error(ErrorCode::EmptyHitSequence, "session " + std::to_string(i) + " has no hits");
        if (j.hits[i].size() % c.hit_dim != 0)
            throw Error(ErrorCode::ShapeMismatch, "hit buffer is not a multiple of hit_dim");
    }
}

} // namespace

ForwardResult forward(const ModelParams& params, const JourneyTensors& journey) {
    const auto& c = params.config();
    check_shapes(c, journey);
    const auto h = c.hidden;
    const auto hit_w = params.tensor(kHitsWeight);
    const auto hit_b = params.tensor(kHitsBias);
    const auto ses_w = params.tensor(kSessionsWeight);
    const auto ses_b = params.tensor(kSessionsBias);
    const auto fc1_w = params.tensor(kFc1Weight);
    const auto fc1_b = params.tensor(kFc1Bias);
    const auto fc2_w = params.tensor(kFc2Weight);
    const auto fc2_b = params.tensor(kFc2Bias);

    ForwardResult result;
    ForwardTrace& trace = result.trace;
    trace.config = c;
    trace.params_fingerprint = params.fingerprint();
    const auto n = journey.num_sessions();
    trace.sessions.resize(n);
    result.predictions.assign(n, ClassRow{});

    const std::vector<double> zeros(h, 0.0);
    std::vector<double> ses_h(h, 0.0);
    std::vector<double> ses_c(h, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        SessionTrace& st = trace.sessions[i];
        const auto& flat = journey.hits[i];
        const auto steps = flat.size() / c.hit_dim;
        st.hit_steps.resize(steps);
        std::span<const double> hit_h = zeros;
        std::span<const double> hit_c = zeros;
        for (std::size_t t = 0; t < steps; ++t) {
            LstmStep& s = st.hit_steps[t];
            s.input.assign(flat.begin() + static_cast<std::ptrdiff_t>(t * c.hit_dim),
                           flat.begin() + static_cast<std::ptrdiff_t>((t + 1) * c.hit_dim));
            s.input.insert(s.input.end(), hit_h.begin(), hit_h.end());
            lstm_step(hit_w, hit_b, h, s, hit_c);
            hit_h = s.h;
            hit_c = s.c;
        }

        // [H_i ; S_{i-1} ; session h_prev]
        LstmStep& ss = st.session_step;
        ss.input.assign(hit_h.begin(), hit_h.end());
        if (i == 0) {
            ss.input.insert(ss.input.end(), c.session_dim, 0.0);
        } else {
            ss.input.insert(ss.input.end(), journey.sessions[i - 1].begin(), journey.sessions[i - 1].end());
        }
        ss.input.insert(ss.input.end(), ses_h.begin(), ses_h.end());
        lstm_step(ses_w, ses_b, h, ss, ses_c);
        ses_h = ss.h;
        ses_c = ss.c;

        st.head_input = ss.h;
        st.head_input.insert(st.head_input.end(), journey.user.begin(), journey.user.end());
        st.fc1_pre.assign(c.fc_hidden, 0.0);
        affine(fc1_w, fc1_b, st.head_input, st.fc1_pre);
        st.fc1_out.resize(c.fc_hidden);
        for (std::size_t k = 0; k < c.fc_hidden; ++k) st.fc1_out[k] = std::max(0.0, st.fc1_pre[k]);
        ClassRow logits{};
        affine(fc2_w, fc2_b, st.fc1_out, logits);
        for (std::size_t k = 0; k < kNumClasses; ++k) result.predictions[i][k] = sigmoid(logits[k]);
    }
    trace.predictions = result.predictions;
    return result;
}

LabelMatrix predict(const ModelParams& params, const JourneyTensors& journey) {
    return forward(params, journey).predictions;
}

double mse_loss(const LabelMatrix& predictions, const LabelMatrix& labels, std::span<const bool> mask) {
    if (predictions.size() != labels.size())
        throw Error(ErrorCode::ShapeMismatch, "prediction and label row counts differ");
    if (!mask.empty() && mask.size() != labels.size())
        throw Error(ErrorCode::ShapeMismatch, "mask length differs from row count");
    double sum = 0.0;
    std::size_t cells = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (!mask.empty() && !mask[n]) continue;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            const double d = predictions[n][c] - labels[n][c];
            sum += d * d;
        }
        cells += kNumClasses;
    }
    return cells == 0 ? 0.0 : sum / static_cast<double>(cells);
}

void accumulate_gradients(const ModelParams& params, const ForwardTrace& trace, const LabelMatrix& labels,
                          double cell_weight, ModelParams& grads) {
    const auto& c = params.config();
    if (!(trace.config == c) || trace.params_fingerprint != params.fingerprint()) {
        throw Error(ErrorCode::StaleTrace, "trace was recorded with different parameters");
    }
    if (labels.size() != trace.sessions.size())
        throw Error(ErrorCode::ShapeMismatch, "label rows differ from traced sessions");
    if (!(grads.config() == c)) throw Error(ErrorCode::ShapeMismatch, "gradient buffer has a different config");

    const auto h = c.hidden;
    const auto hit_w = params.tensor(kHitsWeight);
    const auto ses_w = params.tensor(kSessionsWeight);
    const auto fc1_w = params.tensor(kFc1Weight);
    const auto fc2_w = params.tensor(kFc2Weight);
    auto d_hit_w = grads.tensor(kHitsWeight);
    auto d_hit_b = grads.tensor(kHitsBias);
    auto d_ses_w = grads.tensor(kSessionsWeight);
    auto d_ses_b = grads.tensor(kSessionsBias);
    auto d_fc1_w = grads.tensor(kFc1Weight);
    auto d_fc1_b = grads.tensor(kFc1Bias);
    auto d_fc2_w = grads.tensor(kFc2Weight);
    auto d_fc2_b = grads.tensor(kFc2Bias);

    std::vector<double> dh_next(h, 0.0);
    std::vector<double> dc_next(h, 0.0);
    std::vector<double> d_head(h + c.user_dim);
    std::vector<double> d_fc1(c.fc_hidden);
    std::vector<double> d_relu(c.fc_hidden);
    std::vector<double> dh(h);
    std::vector<double> d_ses_in(h + c.session_dim + h);
    std::vector<double> d_hit_in(c.hit_dim + h);
    std::vector<double> hit_dh(h);
    std::vector<double> hit_dc(h);
    std::vector<double> dpre;
    ClassRow d_logit{};

    for (std::size_t i = trace.sessions.size(); i-- > 0;) {
        const SessionTrace& st = trace.sessions[i];
        const ClassRow& y = trace.predictions[i];
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            d_logit[k] = cell_weight * 2.0 * (y[k] - labels[i][k]) * y[k] * (1.0 - y[k]);
        }
        affine_backward(fc2_w, st.fc1_out, d_logit, d_fc2_w, d_fc2_b, d_fc1);
        for (std::size_t k = 0; k < c.fc_hidden; ++k) d_relu[k] = st.fc1_pre[k] > 0.0 ? d_fc1[k] : 0.0;
        affine_backward(fc1_w, st.head_input, d_relu, d_fc1_w, d_fc1_b, d_head);

        for (std::size_t k = 0; k < h; ++k) dh[k] = d_head[k] + dh_next[k];
        lstm_step_backward(ses_w, h, st.session_step, dh, dc_next, d_ses_w, d_ses_b, d_ses_in, dpre);
        // d_ses_in = [dH_i ; dS_{i-1} ; dh_prev]; session features are inputs.
        std::copy(d_ses_in.begin() + static_cast<std::ptrdiff_t>(h + c.session_dim), d_ses_in.end(), dh_next.begin());

        std::copy(d_ses_in.begin(), d_ses_in.begin() + static_cast<std::ptrdiff_t>(h), hit_dh.begin());
        std::fill(hit_dc.begin(), hit_dc.end(), 0.0);
        for (std::size_t t = st.hit_steps.size(); t-- > 0;) {
            lstm_step_backward(hit_w, h, st.hit_steps[t], hit_dh, hit_dc, d_hit_w, d_hit_b, d_hit_in, dpre);
            std::copy(d_hit_in.begin() + static_cast<std::ptrdiff_t>(c.hit_dim), d_hit_in.end(), hit_dh.begin());
        }
    }
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace, const LabelMatrix& labels) {
    ModelParams grads(params.config());
    const double cells = static_cast<double>(labels.size() * kNumClasses);
    accumulate_gradients(params, trace, labels, cells > 0 ? 1.0 / cells : 0.0, grads);
    return grads;
}

} // namespace shopstage
