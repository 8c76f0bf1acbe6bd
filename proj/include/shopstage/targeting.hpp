// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shopstage/ingest.hpp"
#include "shopstage/model.hpp"
#include "shopstage/training.hpp"

namespace shopstage {

enum class ScoringKind { Random, Statistical, ModelLinear, ModelTimeDecay };

std::string_view scoring_kind_name(ScoringKind kind);

struct ScoringMethod {
    ScoringKind kind = ScoringKind::Random;
    /// Required for the model kinds, together with the pipeline the model was
    /// trained with.
    std::optional<ModelParams> params;
    std::optional<FeaturePipeline> pipeline;
    /// Statistical only: additive noise drawn from U(-w, w).
    double noise_halfwidth = 0.05;
};

/// Per-user transaction probability for the last session.
///   Random:      U(0, 1).
///   Statistical: share of transaction sessions among sessions 1..N-1 (0 when
///                N = 1) plus noise, clamped to [0, 1].
///   Model kinds: class-5 output at the last session.
/// Throws MissingParams when a model kind lacks params or pipeline.
std::vector<double> score_users(const ScoringMethod& method, std::span<const Journey> journeys, std::uint64_t seed);

struct LastSessionTruth {
    std::vector<bool> bought;
    std::vector<double> revenue;
};

LastSessionTruth last_session_truth(std::span<const Journey> journeys);

struct TrialRecord {
    std::size_t tp = 0;
    std::size_t fp = 0;
    double tp_revenue = 0.0;
    /// 0 when nobody was targeted.
    double breaking_point = 0.0;
};

struct TargetingOutcome {
    double tp_mean = 0.0, tp_std = 0.0;
    double fp_mean = 0.0, fp_std = 0.0;
    double tp_pct = 0.0, tp_pct_std = 0.0;
    double fp_pct = 0.0, fp_pct_std = 0.0;
    double bp_mean = 0.0, bp_std = 0.0;
    std::size_t trials = 0;
    std::size_t zero_target_trials = 0;
    std::size_t buyers = 0;
    std::size_t non_buyers = 0;
};

struct Simulation {
    TargetingOutcome outcome;
    std::vector<TrialRecord> trials;
};

/// Each trial targets user u with probability p[u] using its own stream
/// derived from (seed, trial index). Standard deviations are sample (n - 1)
/// deviations over trials. Percentages use buyers and non-buyers as
/// denominators. Throws EmptyPopulation, ShapeMismatch, InvalidConfig.
Simulation simulate_targeting(std::span<const double> p, const std::vector<bool>& bought_last,
                              std::span<const double> revenue_last, std::size_t trials, std::uint64_t seed);

/// Summary statistics of a set of trials.
TargetingOutcome summarize_trials(std::span<const TrialRecord> trials, std::size_t buyers, std::size_t non_buyers);

/// revenue - (tp + fp) * cost
double profit(double tp_revenue_sum, double tp, double fp, double cost);

/// Cost at which profit is zero. Throws NoTargets when tp + fp <= 0.
double breaking_point(double tp_revenue_sum, double tp, double fp);

struct CurvePoint {
    double cost = 0.0;
    double mean_profit = 0.0;
};

struct ProfitCurve {
    std::string method;
    std::vector<CurvePoint> points;
};

/// Mean profit over trials at each grid cost. Throws InvalidConfig for an
/// empty or unsorted grid.
ProfitCurve profit_curve(std::string method, std::span<const TrialRecord> trials, std::span<const double> cost_grid);

/// `points` log-spaced costs in [lo, hi].
std::vector<double> log_cost_grid(std::size_t points = 120, double lo = 0.1, double hi = 1000.0);

/// Fraction of bootstrap resamples in which mean(a*) > mean(b*), resampling
/// each sample independently with replacement.
double bootstrap_prob_greater(std::span<const double> a, std::span<const double> b, std::size_t resamples,
                              std::uint64_t seed);

struct MethodResult {
    std::string method;
    TargetingOutcome outcome;
};

/// Method, TP (+/-), TP%, FP (+/-), FP%, BP (+/-), one row per method.
std::string format_targeting_table(std::span<const MethodResult> rows);

// ---------------------------------------------------------------------------
// Plots

/// Display floor for profits on the logarithmic plot.
inline constexpr double kLogProfitFloor = 1.0;

struct PlotBundle {
    std::string linear_svg;
    std::string log_svg;
    /// method,cost,mean_profit
    std::string table_csv;
};

/// Throws InvalidConfig when there are no curves or a curve has no points.
PlotBundle render_plots(std::span<const ProfitCurve> curves);

/// Inverse of PlotBundle::table_csv; curves keep first-appearance order.
std::vector<ProfitCurve> parse_curve_table(std::string_view csv_text);

} // namespace shopstage
