// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/targeting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/rng.hpp"

namespace shopstage {

std::string_view scoring_kind_name(ScoringKind kind) {
    switch (kind) {
    case ScoringKind::Random: return "Random";
    case ScoringKind::Statistical: return "Statistical";
    case ScoringKind::ModelLinear: return "Linear";
    case ScoringKind::ModelTimeDecay: return "Time decaying";
    }
    return "?";
}

std::vector<double> score_users(const ScoringMethod& method, std::span<const Journey> journeys, std::uint64_t seed) {
    std::vector<double> p;
    p.reserve(journeys.size());
    switch (method.kind) {
    case ScoringKind::Random: {
        Rng rng(derive_seed(seed, 0x7A11));
        for (std::size_t u = 0; u < journeys.size(); ++u) p.push_back(rng.uniform());
        break;
    }
    case ScoringKind::Statistical: {
        Rng rng(derive_seed(seed, 0x57A7));
        for (const auto& j : journeys) {
            double base = 0.0;
            if (j.sessions.size() >= 2) {
                std::vector<double> v;
                for (std::size_t i = 0; i + 1 < j.sessions.size(); ++i) {
                    v.push_back(map_shopping_stage(j.sessions[i].session.shopping_stages) == 5 ? 1.0 : 0.0);
                }
                base = linear_attribution(v).back();
            }
            const double noise = rng.uniform(-method.noise_halfwidth, method.noise_halfwidth);
            p.push_back(std::clamp(base + noise, 0.0, 1.0));
        }
        break;
    }
    case ScoringKind::ModelLinear:
    case ScoringKind::ModelTimeDecay: {
        if (!method.params || !method.pipeline) {
            throw Error(ErrorCode::MissingParams,
                        std::string(scoring_kind_name(method.kind)) + " scoring needs trained parameters");
        }
        for (const auto& j : journeys) {
            const auto pred = predict(*method.params, to_tensors(method.pipeline->encode(j)));
            p.push_back(pred.back()[static_cast<std::size_t>(PathClass::Transaction)]);
        }
        break;
    }
    }
    return p;
}

LastSessionTruth last_session_truth(std::span<const Journey> journeys) {
    LastSessionTruth t;
    for (const auto& j : journeys) {
        const auto& last = j.sessions.back().session;
        t.bought.push_back(last.transactions > 0);
        t.revenue.push_back(last.revenue);
    }
    return t;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

template <class Get>
MeanStd mean_std(std::span<const TrialRecord> trials, Get get) {
    MeanStd r;
    if (trials.empty()) return r;
    for (const auto& t : trials) r.mean += get(t);
    r.mean /= static_cast<double>(trials.size());
    if (trials.size() > 1) {
        double sq = 0.0;
        for (const auto& t : trials) {
            const double d = get(t) - r.mean;
            sq += d * d;
        }
        r.std = std::sqrt(sq / static_cast<double>(trials.size() - 1));
    }
    return r;
}

} // namespace

TargetingOutcome summarize_trials(std::span<const TrialRecord> trials, std::size_t buyers, std::size_t non_buyers) {
    TargetingOutcome o;
    o.trials = trials.size();
    o.buyers = buyers;
    o.non_buyers = non_buyers;
    const auto tp = mean_std(trials, [](const TrialRecord& t) { return static_cast<double>(t.tp); });
    const auto fp = mean_std(trials, [](const TrialRecord& t) { return static_cast<double>(t.fp); });
    const auto bp = mean_std(trials, [](const TrialRecord& t) { return t.breaking_point; });
    o.tp_mean = tp.mean;
    o.tp_std = tp.std;
    o.fp_mean = fp.mean;
    o.fp_std = fp.std;
    o.bp_mean = bp.mean;
    o.bp_std = bp.std;
    if (buyers > 0) {
        o.tp_pct = tp.mean / static_cast<double>(buyers);
        o.tp_pct_std = tp.std / static_cast<double>(buyers);
    }
    if (non_buyers > 0) {
        o.fp_pct = fp.mean / static_cast<double>(non_buyers);
        o.fp_pct_std = fp.std / static_cast<double>(non_buyers);
    }
    for (const auto& t : trials) {
        if (t.tp + t.fp == 0) ++o.zero_target_trials;
    }
    return o;
}

Simulation simulate_targeting(std::span<const double> p, const std::vector<bool>& bought_last,
                              std::span<const double> revenue_last, std::size_t trials, std::uint64_t seed) {
    if (p.empty()) throw Error(ErrorCode::EmptyPopulation, "no users to target");
    if (bought_last.size() != p.size() || revenue_last.size() != p.size())
        throw Error(ErrorCode::ShapeMismatch, "score, outcome and revenue vectors differ in length");
    if (trials < 1) throw Error(ErrorCode::InvalidConfig, "trials must be >= 1");

    Simulation sim;
    sim.trials.resize(trials);
    for (std::size_t k = 0; k < trials; ++k) {
        Rng rng(derive_seed(seed, 0x7121A1, k));
        TrialRecord& t = sim.trials[k];
        for (std::size_t u = 0; u < p.size(); ++u) {
            if (!(rng.uniform() < p[u])) continue;
            if (bought_last[u]) {
                ++t.tp;
                t.tp_revenue += revenue_last[u];
            } else {
                ++t.fp;
            }
        }
        if (t.tp + t.fp > 0) {
            t.breaking_point = breaking_point(t.tp_revenue, static_cast<double>(t.tp), static_cast<double>(t.fp));
        }
    }
    const auto buyers = static_cast<std::size_t>(std::count(bought_last.begin(), bought_last.end(), true));
    sim.outcome = summarize_trials(sim.trials, buyers, p.size() - buyers);
    return sim;
}

double profit(double tp_revenue_sum, double tp, double fp, double cost) { return tp_revenue_sum - (tp + fp) * cost; }

double breaking_point(double tp_revenue_sum, double tp, double fp) {
    if (!(tp + fp > 0.0)) throw Error(ErrorCode::NoTargets, "breaking point undefined without targets");
    return tp_revenue_sum / (tp + fp);
}

ProfitCurve profit_curve(std::string method, std::span<const TrialRecord> trials, std::span<const double> cost_grid) {
    if (cost_grid.empty()) throw Error(ErrorCode::InvalidConfig, "cost grid is empty");
    if (!std::is_sorted(cost_grid.begin(), cost_grid.end()))
        throw Error(ErrorCode::InvalidConfig, "cost grid must be sorted ascending");
    if (trials.empty()) throw Error(ErrorCode::InvalidConfig, "no trials for a profit curve");
    ProfitCurve curve{std::move(method), {}};
    curve.points.reserve(cost_grid.size());
    for (double cost : cost_grid) {
        double sum = 0.0;
        for (const auto& t : trials) {
            sum += profit(t.tp_revenue, static_cast<double>(t.tp), static_cast<double>(t.fp), cost);
        }
        curve.points.push_back({cost, sum / static_cast<double>(trials.size())});
    }
    return curve;
}

std::vector<double> log_cost_grid(std::size_t points, double lo, double hi) {
    if (points < 1 || !(lo > 0.0) || !(hi >= lo)) throw Error(ErrorCode::InvalidConfig, "bad cost grid bounds");
    std::vector<double> grid(points);
    if (points == 1) {
        grid[0] = lo;
        return grid;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

double bootstrap_prob_greater(std::span<const double> a, std::span<const double> b, std::size_t resamples,
                              std::uint64_t seed) {
    if (a.empty() || b.empty() || resamples == 0)
        throw Error(ErrorCode::InvalidConfig, "bootstrap needs two non-empty samples");
    Rng rng(derive_seed(seed, 0xB0075));
    auto resample_mean = [&rng](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[rng.below(x.size())];
        return s / static_cast<double>(x.size());
    };
    std::size_t wins = 0;
    for (std::size_t r = 0; r < resamples; ++r) {
        const double ma = resample_mean(a);
        const double mb = resample_mean(b);
        if (ma > mb) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(resamples);
}

std::string format_targeting_table(std::span<const MethodResult> rows) {
    auto pm = [](double mean, double sd, int decimals) {
        return csv::format_fixed(mean, decimals) + " (+/- " + csv::format_fixed(sd, decimals) + ")";
    };
    auto pct = [](double mean, double sd) {
        return csv::format_fixed(100.0 * mean, 2) + "% (+/- " + csv::format_fixed(100.0 * sd, 2) + "%)";
    };
    std::vector<std::vector<std::string>> cells = {
        {"Method", "True positives", "True positives%", "False positives", "False positives%", "Breaking cost point"}};
    for (const auto& r : rows) {
        const auto& o = r.outcome;
        cells.push_back({r.method, pm(o.tp_mean, o.tp_std, 2), pct(o.tp_pct, o.tp_pct_std), pm(o.fp_mean, o.fp_std, 2),
                         pct(o.fp_pct, o.fp_pct_std), pm(o.bp_mean, o.bp_std, 2)});
    }
    std::vector<std::size_t> width(cells.front().size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t c = 0; c < cells[r].size(); ++c) {
            out << (c == 0 ? "| " : " | ") << cells[r][c] << std::string(width[c] - cells[r][c].size(), ' ');
        }
        out << " |\n";
        if (r == 0) {
            for (std::size_t c = 0; c < width.size(); ++c) out << (c == 0 ? "|-" : "-|-") << std::string(width[c], '-');
            out << "-|\n";
        }
    }
    if (!rows.empty()) {
        const auto& o = rows.front().outcome;
        out << "\nusers: " << o.buyers + o.non_buyers << ", buyers in last session: " << o.buyers
            << ", trials: " << o.trials << '\n';
        for (const auto& r : rows) {
            if (r.outcome.zero_target_trials > 0) {
                out << r.method << ": " << r.outcome.zero_target_trials << " trial(s) targeted nobody (bp = 0)\n";
            }
        }
    }
    return out.str();
}

} // namespace shopstage
