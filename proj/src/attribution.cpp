// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/attribution.hpp"

#include "shopstage/error.hpp"

namespace shopstage {

std::string_view attribution_name(AttributionModel m) {
    return m == AttributionModel::Linear ? "linear" : "timedecay";
}

std::vector<double> linear_attribution(std::span<const double> v) {
    std::vector<double> t(v.size());
    double sum = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
        sum += v[n];
        t[n] = sum / static_cast<double>(n + 1);
    }
    return t;
}

std::vector<double> time_decay_attribution(std::span<const double> v, double base) {
    if (!(base >= 1.0)) throw Error(ErrorCode::InvalidConfig, "half-life base must be >= 1");
    // Re-anchoring every prefix at the newest session is the same as dividing
    // the running numerator and denominator by `base` before adding the new
    // session with weight 1.
    std::vector<double> t(v.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
        num = num / base + v[n];
        den = den / base + 1.0;
        t[n] = num / den;
    }
    return t;
}

IndicatorMatrix indicator_matrix(std::span<const int> class_ids) {
    IndicatorMatrix v(class_ids.size(), ClassRow{});
    for (std::size_t n = 0; n < class_ids.size(); ++n) {
        const int c = class_ids[n];
        if (c < 0 || c >= static_cast<int>(kNumClasses))
            throw Error(ErrorCode::BadValue, "class id out of range: " + std::to_string(c));
        v[n][static_cast<std::size_t>(c)] = 1.0;
    }
    return v;
}

namespace {

template <class ColumnFn>
LabelMatrix per_column(const IndicatorMatrix& v, ColumnFn fn) {
    LabelMatrix t(v.size(), ClassRow{});
    std::vector<double> column(v.size());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        for (std::size_t n = 0; n < v.size(); ++n) column[n] = v[n][c];
        const auto out = fn(column);
        for (std::size_t n = 0; n < v.size(); ++n) t[n][c] = out[n];
    }
    return t;
}

} // namespace

LabelMatrix linear_attribution(const IndicatorMatrix& v) {
    return per_column(v, [](std::span<const double> col) { return linear_attribution(col); });
}

LabelMatrix time_decay_attribution(const IndicatorMatrix& v, double base) {
    return per_column(v, [base](std::span<const double> col) { return time_decay_attribution(col, base); });
}

LabelMatrix build_labels(std::span<const int> class_ids, AttributionModel model, double half_life_base) {
    const auto v = indicator_matrix(class_ids);
    return model == AttributionModel::Linear ? linear_attribution(v) : time_decay_attribution(v, half_life_base);
}

} // namespace shopstage
