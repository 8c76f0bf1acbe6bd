// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/rng.hpp"

namespace shopstage {

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (clip_norm && !(*clip_norm > 0.0)) throw Error(ErrorCode::InvalidConfig, "clip_norm must be > 0");
    if (!(half_life_base >= 1.0)) throw Error(ErrorCode::InvalidConfig, "half_life_base must be >= 1");
    model.validate();
}

FeaturePipeline FeaturePipeline::fit(std::span<const Journey> train, NormMethod method) {
    FeaturePipeline p;
    p.rpt = compute_rpt_stats(train);
    std::vector<EncodedJourney> raw;
    raw.reserve(train.size());
    for (const auto& j : train) raw.push_back(encode_journey(j, p.rpt));
    p.normalizer = Normalizer::fit(raw, method);
    return p;
}

EncodedJourney FeaturePipeline::encode(const Journey& journey) const {
    return normalizer.apply(encode_journey(journey, rpt));
}

Example make_example(const std::string& client_id, const EncodedJourney& normalized, AttributionModel attribution,
                     double half_life_base) {
    validate_encoded(normalized);
    Example e;
    e.client_id = client_id;
    e.inputs = to_tensors(normalized);
    e.class_ids = normalized.class_ids;
    e.labels = build_labels(e.class_ids, attribution, half_life_base);
    return e;
}

std::vector<Example> make_examples(std::span<const Journey> journeys, const FeaturePipeline& pipeline,
                                   AttributionModel attribution, double half_life_base) {
    std::vector<Example> out;
    out.reserve(journeys.size());
    for (const auto& j : journeys) {
        out.push_back(make_example(j.user.client_id, pipeline.encode(j), attribution, half_life_base));
    }
    return out;
}

SplitIndices split_indices(std::size_t n, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw Error(ErrorCode::InvalidConfig, "val_fraction must lie in (0, 1)");
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction + 1e-9));
    if (n_val == 0 || n_val >= n) {
        throw Error(ErrorCode::DegenerateSplit, "split of " + std::to_string(n) + " journeys at fraction " +
                                                    csv::format_double(val_fraction) + " leaves a side empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x5B117));
    rng.shuffle(order.begin(), order.end());
    SplitIndices s;
    s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

JourneySplit split_by_user(std::span<const Journey> journeys, double val_fraction, std::uint64_t seed) {
    const auto idx = split_indices(journeys.size(), val_fraction, seed);
    JourneySplit out;
    for (auto i : idx.train) out.train.push_back(journeys[i]);
    for (auto i : idx.val) out.val.push_back(journeys[i]);
    return out;
}

double dataset_mse(const ModelParams& params, std::span<const Example> examples) {
    double sum = 0.0;
    std::size_t rows = 0;
    for (const auto& e : examples) {
        const auto pred = predict(params, e.inputs);
        sum += mse_loss(pred, e.labels) * static_cast<double>(e.labels.size());
        rows += e.labels.size();
    }
    return rows == 0 ? 0.0 : sum / static_cast<double>(rows);
}

namespace {

/// Runs fn(k) for k in [0, n) on up to `threads` workers. Each k is handled
/// by exactly one worker, so per-k outputs do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = w; k < n; k += threads) fn(k);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

class Adam {
public:
    Adam(std::size_t n, double lr) : m_(n, 0.0), v_(n, 0.0), lr_(lr) {}

    void step(std::span<double> params, std::span<const double> grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i] * grads[i];
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + kEps);
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    std::vector<double> m_;
    std::vector<double> v_;
    double lr_;
    std::uint64_t t_ = 0;
};

} // namespace

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw Error(ErrorCode::EmptyInput, "training set is empty");

    ModelParams params = init_params(config.model, derive_seed(config.seed, 1));
    Adam adam(params.values().size(), config.learning_rate);
    ModelParams batch_grad(config.model);
    std::vector<ModelParams> journey_grads(config.batch_size, ModelParams(config.model));
    std::vector<double> journey_sq(config.batch_size);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    double best_val = INFINITY;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 2, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());

        double epoch_sq = 0.0;
        std::size_t epoch_cells = 0;
        for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
            const auto count = std::min(config.batch_size, order.size() - start);
            std::size_t cells = 0;
            for (std::size_t k = 0; k < count; ++k) cells += train_set[order[start + k]].labels.size() * kNumClasses;
            const double cell_weight = 1.0 / static_cast<double>(cells);

            parallel_for(count, config.threads, [&](std::size_t k) {
                const Example& ex = train_set[order[start + k]];
                auto fwd = forward(params, ex.inputs);
                journey_sq[k] = mse_loss(fwd.predictions, ex.labels) * static_cast<double>(ex.labels.size() * kNumClasses);
                journey_grads[k].set_zero();
                accumulate_gradients(params, fwd.trace, ex.labels, cell_weight, journey_grads[k]);
            });

            batch_grad.set_zero();
            auto g = batch_grad.values();
            double batch_sq = 0.0;
            for (std::size_t k = 0; k < count; ++k) {
                batch_sq += journey_sq[k];
                const auto jg = journey_grads[k].values();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += jg[i];
            }
            double norm_sq = 0.0;
            for (double x : g) norm_sq += x * x;
            if (!std::isfinite(batch_sq) || !std::isfinite(norm_sq)) {
                std::ostringstream msg;
                msg << "epoch " << epoch << ", batch " << batch_no << ": loss " << batch_sq / static_cast<double>(cells)
                    << ", gradient norm " << std::sqrt(norm_sq) << ", learning rate " << config.learning_rate;
                throw Error(ErrorCode::NonFiniteLoss, msg.str());
            }
            if (config.clip_norm && norm_sq > *config.clip_norm * *config.clip_norm) {
                const double scale = *config.clip_norm / std::sqrt(norm_sq);
                for (auto& x : g) x *= scale;
            }
            adam.step(params.values(), g);
            epoch_sq += batch_sq;
            epoch_cells += cells;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = epoch_sq / static_cast<double>(epoch_cells);
        stats.val_mse = val_set.empty() ? stats.train_mse : dataset_mse(params, val_set);
        if (!std::isfinite(stats.val_mse)) {
            throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": validation loss is not finite");
        }
        result.history.push_back(stats);
        if (stats.val_mse < best_val) {
            best_val = stats.val_mse;
            result.best_epoch = epoch;
            result.params = params;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

ClassFlags threshold_accuracy(const ClassRow& pred_last, const ClassCounts& counts_last, std::size_t n_sessions,
                              Band band) {
    ClassFlags ok{};
    const double n = static_cast<double>(n_sessions);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double predicted = pred_last[c] * n;
        const double k = counts_last[c];
        ok[c] = counts_last[c] > 0 ? (band.lo * k <= predicted && predicted <= band.hi * k) : predicted < band.lo;
    }
    return ok;
}

ClassFlags threshold_accuracy_decay(const ClassRow& pred_last, const ClassRow& label_last, std::size_t n_sessions,
                                    Band band) {
    ClassFlags ok{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double p = pred_last[c];
        const double t = label_last[c];
        ok[c] = t > 0.0 ? (band.lo * t <= p && p <= band.hi * t) : p * static_cast<double>(n_sessions) < band.lo;
    }
    return ok;
}

EvalReport evaluate_predictions(std::span<const LabelMatrix> predictions, std::span<const Example> examples,
                                AttributionModel attribution, Band wide, Band tight) {
    if (predictions.size() != examples.size())
        throw Error(ErrorCode::ShapeMismatch, "one prediction matrix per example is required");
    EvalReport r;
    r.journeys = examples.size();
    double sq = 0.0;
    for (std::size_t j = 0; j < examples.size(); ++j) {
        const auto& ex = examples[j];
        const auto& pred = predictions[j];
        const auto n = ex.labels.size();
        sq += mse_loss(pred, ex.labels) * static_cast<double>(n);
        r.sessions += n;
        if (n == 0) continue;

        ClassFlags w{}, t{};
        if (attribution == AttributionModel::Linear) {
            ClassCounts counts{};
            for (int c : ex.class_ids) ++counts[static_cast<std::size_t>(c)];
            w = threshold_accuracy(pred.back(), counts, n, wide);
            t = threshold_accuracy(pred.back(), counts, n, tight);
        } else {
            w = threshold_accuracy_decay(pred.back(), ex.labels.back(), n, wide);
            t = threshold_accuracy_decay(pred.back(), ex.labels.back(), n, tight);
        }
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            r.per_class_wide[c] += w[c] ? 1.0 : 0.0;
            r.per_class_tight[c] += t[c] ? 1.0 : 0.0;
        }
    }
    r.mse = r.sessions == 0 ? 0.0 : sq / static_cast<double>(r.sessions);
    if (r.journeys > 0) {
        const double nj = static_cast<double>(r.journeys);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            r.per_class_wide[c] /= nj;
            r.per_class_tight[c] /= nj;
            r.acc_wide += r.per_class_wide[c];
            r.acc_tight += r.per_class_tight[c];
        }
        r.acc_wide /= static_cast<double>(kNumClasses);
        r.acc_tight /= static_cast<double>(kNumClasses);
    }
    return r;
}

EvalReport evaluate(const ModelParams& params, std::span<const Example> examples, AttributionModel attribution,
                    Band wide, Band tight) {
    std::vector<LabelMatrix> preds;
    preds.reserve(examples.size());
    for (const auto& e : examples) preds.push_back(predict(params, e.inputs));
    return evaluate_predictions(preds, examples, attribution, wide, tight);
}

std::string format_eval_report(const EvalReport& r, AttributionModel attribution, NormMethod normalization) {
    std::ostringstream out;
    out << "attribution_model: " << attribution_name(attribution) << '\n';
    out << "normalization: " << norm_method_name(normalization) << '\n';
    out << "journeys: " << r.journeys << '\n';
    out << "sessions: " << r.sessions << '\n';
    out << "loss: " << csv::format_fixed(r.mse, 6) << '\n';
    out << "accuracy_0.5_2.0: " << csv::format_fixed(100.0 * r.acc_wide, 2) << "%\n";
    out << "accuracy_0.8_1.25: " << csv::format_fixed(100.0 * r.acc_tight, 2) << "%\n";
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        out << "class_" << c << "_accuracy_0.5_2.0: " << csv::format_fixed(100.0 * r.per_class_wide[c], 2) << "%\n";
        out << "class_" << c << "_accuracy_0.8_1.25: " << csv::format_fixed(100.0 * r.per_class_tight[c], 2) << "%\n";
    }
    return out.str();
}

ClassRow prevalence_baseline(std::span<const Example> train_set) {
    ClassRow mean{};
    std::size_t rows = 0;
    for (const auto& e : train_set) {
        for (const auto& row : e.labels) {
            for (std::size_t c = 0; c < kNumClasses; ++c) mean[c] += row[c];
        }
        rows += e.labels.size();
    }
    if (rows > 0) {
        for (auto& m : mean) m /= static_cast<double>(rows);
    }
    return mean;
}

double baseline_mse(const ClassRow& baseline, std::span<const Example> examples) {
    double sq = 0.0;
    std::size_t rows = 0;
    for (const auto& e : examples) {
        const LabelMatrix pred(e.labels.size(), baseline);
        sq += mse_loss(pred, e.labels) * static_cast<double>(e.labels.size());
        rows += e.labels.size();
    }
    return rows == 0 ? 0.0 : sq / static_cast<double>(rows);
}

} // namespace shopstage
