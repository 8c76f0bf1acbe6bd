// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "shopstage/error.hpp"

namespace shopstage {

int map_shopping_stage(StageSet stages) {
    if (stages.empty()) throw Error(ErrorCode::EmptyStages, "session has no shopping stage");
    if (stages.contains(Stage::Transaction)) return 5;
    const bool view = stages.contains(Stage::ProductView);
    const bool cart = stages.contains(Stage::AddToCart);
    const bool checkout = stages.contains(Stage::Checkout);
    if (view && checkout && !cart) return 4;
    if (view && cart && checkout) return 3;
    if (view && cart) return 2;
    if (view) return 1;
    return 0;
}

StageSet stages_for_class(int class_id) {
    switch (class_id) {
    case 0: return {Stage::AllVisits};
    case 1: return {Stage::AllVisits, Stage::ProductView};
    case 2: return {Stage::AllVisits, Stage::ProductView, Stage::AddToCart};
    case 3: return {Stage::AllVisits, Stage::ProductView, Stage::AddToCart, Stage::Checkout};
    case 4: return {Stage::AllVisits, Stage::ProductView, Stage::Checkout};
    case 5:
        return {Stage::AllVisits, Stage::ProductView, Stage::AddToCart, Stage::Checkout, Stage::Transaction};
    default: throw Error(ErrorCode::BadValue, "class id out of range: " + std::to_string(class_id));
    }
}

// ---------------------------------------------------------------------------

double RptStats::browser(const std::string& name) const {
    auto it = browser_rpt.find(name);
    return it == browser_rpt.end() ? global_browser_rpt : it->second;
}

double RptStats::device(const std::string& name) const {
    auto it = device_rpt.find(name);
    return it == device_rpt.end() ? global_device_rpt : it->second;
}

namespace {

struct Totals {
    std::set<std::string> users;
    std::int64_t transactions = 0;
    double revenue = 0.0;
};

struct CategoryTotals {
    std::map<std::string, Totals> browser;
    std::map<std::string, Totals> device;
    std::int64_t transactions = 0;
    double revenue = 0.0;
};

CategoryTotals accumulate(std::span<const Journey> journeys) {
    if (journeys.empty()) throw Error(ErrorCode::EmptyInput, "no journeys to summarize");
    CategoryTotals t;
    for (const auto& j : journeys) {
        auto& b = t.browser[j.user.browser_name];
        auto& d = t.device[j.user.device_name];
        b.users.insert(j.user.client_id);
        d.users.insert(j.user.client_id);
        for (const auto& s : j.sessions) {
            if (s.session.transactions <= 0) continue;
            b.transactions += s.session.transactions;
            d.transactions += s.session.transactions;
            b.revenue += s.session.revenue;
            d.revenue += s.session.revenue;
            t.transactions += s.session.transactions;
            t.revenue += s.session.revenue;
        }
    }
    return t;
}

double ratio_or(double revenue, std::int64_t transactions, double fallback) {
    return transactions > 0 ? revenue / static_cast<double>(transactions) : fallback;
}

} // namespace

RptStats compute_rpt_stats(std::span<const Journey> journeys) {
    const CategoryTotals t = accumulate(journeys);
    RptStats stats;
    if (t.transactions == 0) {
        stats.zero_transactions_globally = true;
        for (const auto& [name, _] : t.browser) stats.browser_rpt[name] = 0.0;
        for (const auto& [name, _] : t.device) stats.device_rpt[name] = 0.0;
        return stats;
    }
    // Both globals are the same transaction-weighted mean over the corpus.
    const double global = t.revenue / static_cast<double>(t.transactions);
    stats.global_browser_rpt = global;
    stats.global_device_rpt = global;
    for (const auto& [name, v] : t.browser) stats.browser_rpt[name] = ratio_or(v.revenue, v.transactions, global);
    for (const auto& [name, v] : t.device) stats.device_rpt[name] = ratio_or(v.revenue, v.transactions, global);
    return stats;
}

CategoryHistograms category_histograms(std::span<const Journey> journeys) {
    const CategoryTotals t = accumulate(journeys);
    const double global = t.transactions > 0 ? t.revenue / static_cast<double>(t.transactions) : 0.0;
    auto rows = [global](const std::map<std::string, Totals>& m) {
        std::vector<CategoryRow> out;
        for (const auto& [name, v] : m) {
            out.push_back({name, v.users.size(), v.transactions, v.revenue,
                           ratio_or(v.revenue, v.transactions, global)});
        }
        std::stable_sort(out.begin(), out.end(),
                         [](const CategoryRow& a, const CategoryRow& b) { return a.users > b.users; });
        return out;
    };
    return {rows(t.browser), rows(t.device)};
}

// ---------------------------------------------------------------------------

UserVec encode_user(const RawUserRow& row, const RptStats& stats) {
    return {row.user_type == UserType::Returning ? 1.0 : 0.0,
            row.device_category == DeviceCategory::Mobile ? 1.0 : 0.0,
            row.device_category == DeviceCategory::Tablet ? 1.0 : 0.0, stats.browser(row.browser_name),
            stats.device(row.device_name)};
}

SessionVec encode_session(const RawSessionRow& row) {
    auto d = [](std::int64_t v) { return static_cast<double>(v); };
    return {row.duration_s,
            d(row.unique_pageviews),
            d(row.transactions),
            row.revenue,
            d(row.unique_purchases),
            d(row.days_since_last_session),
            row.site_search_used ? 1.0 : 0.0,
            d(row.results_pageviews),
            d(row.total_unique_searches),
            d(row.search_depth),
            d(row.search_refinements)};
}

HitVec encode_hit(const RawHitRow& row) {
    return {row.minute_of_day / 1440.0, row.time_on_page_s, row.product_detail_view ? 1.0 : 0.0};
}

EncodedJourney encode_journey(const Journey& journey, const RptStats& stats) {
    EncodedJourney out;
    out.user_vec = encode_user(journey.user, stats);
    for (const auto& s : journey.sessions) {
        out.session_vecs.push_back(encode_session(s.session));
        std::vector<HitVec> hits;
        hits.reserve(s.hits.size());
        for (const auto& h : s.hits) hits.push_back(encode_hit(h));
        out.hit_vecs.push_back(std::move(hits));
        out.class_ids.push_back(map_shopping_stage(s.session.shopping_stages));
    }
    return out;
}

void validate_encoded(const EncodedJourney& j) {
    const auto n = j.session_vecs.size();
    if (n == 0) throw Error(ErrorCode::ShapeMismatch, "journey has no sessions");
    if (j.hit_vecs.size() != n || j.class_ids.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, "session, hit and class lists differ in length");
    }
    auto finite = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(j.user_vec)) throw Error(ErrorCode::BadValue, "non-finite user feature");
    for (std::size_t i = 0; i < n; ++i) {
        if (j.class_ids[i] < 0 || j.class_ids[i] >= static_cast<int>(kNumClasses))
            throw Error(ErrorCode::BadValue, "class id out of range at session " + std::to_string(i));
        if (!finite(j.session_vecs[i])) throw Error(ErrorCode::BadValue, "non-finite session feature");
        if (j.hit_vecs[i].empty())
            throw Error(ErrorCode::EmptyHitSequence, "session " + std::to_string(i) + " has no hits");
        for (const auto& h : j.hit_vecs[i]) {
            if (!finite(h)) throw Error(ErrorCode::BadValue, "non-finite hit feature");
        }
    }
}

// ---------------------------------------------------------------------------

std::string_view norm_method_name(NormMethod m) {
    return m == NormMethod::MinMax ? "minmax" : "standard";
}

Normalizer::Normalizer(NormMethod method, AffineStats user, AffineStats session, AffineStats hit)
    : fitted_(true), method_(method), user_(std::move(user)), session_(std::move(session)), hit_(std::move(hit)) {}

namespace {

/// Fits one feature space from a flat list of vectors.
class SpaceFitter {
public:
    explicit SpaceFitter(std::size_t dim)
        : min_(dim, INFINITY), max_(dim, -INFINITY), sum_(dim, 0.0), sq_(dim, 0.0) {}

    void add_sum(std::span<const double> x) {
        ++count_;
        for (std::size_t d = 0; d < x.size(); ++d) {
            min_[d] = std::min(min_[d], x[d]);
            max_[d] = std::max(max_[d], x[d]);
            sum_[d] += x[d];
        }
    }

    /// Second pass for centered squares once the means are known.
    void add_square(std::span<const double> x) {
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double c = x[d] - sum_[d] / static_cast<double>(count_);
            sq_[d] += c * c;
        }
    }

    AffineStats finish(NormMethod method) const {
        const auto dim = min_.size();
        AffineStats s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
        if (count_ == 0) return s;
        for (std::size_t d = 0; d < dim; ++d) {
            if (method == NormMethod::MinMax) {
                s.offset[d] = min_[d];
                const double range = max_[d] - min_[d];
                s.scale[d] = range > 0.0 ? 1.0 / range : 0.0;
            } else {
                const double mean = sum_[d] / static_cast<double>(count_);
                const double sd = std::sqrt(sq_[d] / static_cast<double>(count_));
                s.offset[d] = mean;
                s.scale[d] = sd > 0.0 ? 1.0 / sd : 0.0;
            }
        }
        return s;
    }

private:
    std::vector<double> min_, max_, sum_, sq_;
    std::size_t count_ = 0;
};

template <std::size_t N>
std::array<double, N> transform(const std::array<double, N>& x, const AffineStats& s) {
    std::array<double, N> out{};
    for (std::size_t d = 0; d < N; ++d) out[d] = s.scale[d] == 0.0 ? 0.0 : (x[d] - s.offset[d]) * s.scale[d];
    return out;
}

} // namespace

Normalizer Normalizer::fit(std::span<const EncodedJourney> journeys, NormMethod method) {
    SpaceFitter user(kUserDim), session(kSessionDim), hit(kHitDim);
    for (const auto& j : journeys) {
        user.add_sum(j.user_vec);
        for (const auto& s : j.session_vecs) session.add_sum(s);
        for (const auto& hs : j.hit_vecs)
            for (const auto& h : hs) hit.add_sum(h);
    }
    if (method == NormMethod::Standardize) {
        for (const auto& j : journeys) {
            user.add_square(j.user_vec);
            for (const auto& s : j.session_vecs) session.add_square(s);
            for (const auto& hs : j.hit_vecs)
                for (const auto& h : hs) hit.add_square(h);
        }
    }
    return Normalizer(method, user.finish(method), session.finish(method), hit.finish(method));
}

EncodedJourney Normalizer::apply(const EncodedJourney& j) const {
    if (!fitted_) throw Error(ErrorCode::NotFitted, "normalizer used before fit");
    EncodedJourney out;
    out.class_ids = j.class_ids;
    out.user_vec = transform(j.user_vec, user_);
    out.session_vecs.reserve(j.session_vecs.size());
    for (const auto& s : j.session_vecs) out.session_vecs.push_back(transform(s, session_));
    out.hit_vecs.reserve(j.hit_vecs.size());
    for (const auto& hs : j.hit_vecs) {
        std::vector<HitVec> v;
        v.reserve(hs.size());
        for (const auto& h : hs) v.push_back(transform(h, hit_));
        out.hit_vecs.push_back(std::move(v));
    }
    return out;
}

std::vector<EncodedJourney> Normalizer::apply(std::span<const EncodedJourney> journeys) const {
    std::vector<EncodedJourney> out;
    out.reserve(journeys.size());
    for (const auto& j : journeys) out.push_back(apply(j));
    return out;
}

// ---------------------------------------------------------------------------

Matrix pearson_correlation_matrix(const Matrix& rows) {
    if (rows.size() < 2) throw Error(ErrorCode::InsufficientRows, "need at least 2 rows for correlation");
    const auto dim = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != dim) throw Error(ErrorCode::ShapeMismatch, "ragged correlation input");
    }
    // Single-pass co-moment updates (Welford).
    std::vector<double> mean(dim, 0.0);
    Matrix comoment(dim, std::vector<double>(dim, 0.0));
    std::vector<double> delta(dim);
    double n = 0.0;
    for (const auto& r : rows) {
        n += 1.0;
        for (std::size_t i = 0; i < dim; ++i) delta[i] = r[i] - mean[i];
        for (std::size_t i = 0; i < dim; ++i) mean[i] += delta[i] / n;
        for (std::size_t i = 0; i < dim; ++i) {
            const double after_i = r[i] - mean[i];
            for (std::size_t k = i; k < dim; ++k) comoment[i][k] += delta[k] * after_i;
        }
    }
    Matrix corr(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i) {
        corr[i][i] = 1.0;
        for (std::size_t k = i + 1; k < dim; ++k) {
            const double denom = std::sqrt(comoment[i][i] * comoment[k][k]);
            double r = denom > 0.0 ? comoment[i][k] / denom : 0.0;
            r = std::clamp(r, -1.0, 1.0);
            corr[i][k] = r;
            corr[k][i] = r;
        }
    }
    return corr;
}

std::vector<std::string> correlation_columns() {
    return {"user_returning",       "user_mobile",         "user_tablet",
            "browser_rpt",          "device_rpt",          "duration_s",
            "unique_pageviews",     "transactions",        "revenue",
            "unique_purchases",     "days_since_last_session", "site_search_used",
            "results_pageviews",    "total_unique_searches", "search_depth",
            "search_refinements",   "hit_minute_of_day",   "hit_time_on_page_s",
            "hit_product_detail_view", "shopping_stage_class"};
}

Matrix correlation_rows(std::span<const Journey> journeys, const RptStats& stats) {
    Matrix rows;
    for (const auto& j : journeys) {
        const auto user = encode_user(j.user, stats);
        for (const auto& s : j.sessions) {
            std::vector<double> row;
            row.reserve(kUserDim + kSessionDim + kHitDim + 1);
            for (double v : user) row.push_back(v);
            for (double v : encode_session(s.session)) row.push_back(v);
            HitVec mean{};
            for (const auto& h : s.hits) {
                const auto hv = encode_hit(h);
                for (std::size_t d = 0; d < kHitDim; ++d) mean[d] += hv[d];
            }
            for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(1, s.hits.size()));
            for (double v : mean) row.push_back(v);
            row.push_back(map_shopping_stage(s.session.shopping_stages));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace shopstage
