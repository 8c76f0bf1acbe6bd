// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "shopstage/features.hpp"

namespace shopstage {

enum class AttributionModel { Linear, TimeDecay };

std::string_view attribution_name(AttributionModel m);

using ClassRow = std::array<double, kNumClasses>;
/// One row per session, one column per class.
using LabelMatrix = std::vector<ClassRow>;
/// One-hot rows of a journey's class ids.
using IndicatorMatrix = std::vector<ClassRow>;

/// t(n) = sum(v[0..n]) / (n + 1), 0-based.
std::vector<double> linear_attribution(std::span<const double> v);

/// t(n) = sum_i w_n(i) v(i) / sum_i w_n(i) with w_n(i) = base^-(n-i): the
/// current session weighs 1 and each step back divides by `base`. Weights are
/// re-anchored at every prefix. base = 1 reproduces linear attribution.
std::vector<double> time_decay_attribution(std::span<const double> v, double base = 2.0);

IndicatorMatrix indicator_matrix(std::span<const int> class_ids);

LabelMatrix linear_attribution(const IndicatorMatrix& v);
LabelMatrix time_decay_attribution(const IndicatorMatrix& v, double base = 2.0);

LabelMatrix build_labels(std::span<const int> class_ids, AttributionModel model, double half_life_base = 2.0);

} // namespace shopstage
