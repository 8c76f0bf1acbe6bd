// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shopstage/ingest.hpp"

namespace shopstage {

inline constexpr std::size_t kUserDim = 5;
inline constexpr std::size_t kSessionDim = 11;
inline constexpr std::size_t kHitDim = 3;
inline constexpr std::size_t kNumClasses = 6;

/// Class ids of the six disjoint funnel paths.
enum class PathClass : int {
    AllVisits = 0,
    ProductView = 1,
    AddToCart = 2,
    CartCheckout = 3,
    DirectCheckout = 4,
    Transaction = 5,
};

/// Deepest recorded stage wins. Throws EmptyStages for an empty set.
int map_shopping_stage(StageSet stages);

/// Funnel prefix that a class id stands for.
StageSet stages_for_class(int class_id);

// ---------------------------------------------------------------------------
// Revenue per transaction

struct RptStats {
    std::map<std::string, double> browser_rpt;
    std::map<std::string, double> device_rpt;
    double global_browser_rpt = 0.0;
    double global_device_rpt = 0.0;
    /// Set when no session in the corpus had a transaction; every value is 0.
    bool zero_transactions_globally = false;

    /// Categories never seen fall back to the global value.
    double browser(const std::string& name) const;
    double device(const std::string& name) const;
};

/// Revenue is summed over sessions with at least one transaction.
/// Throws EmptyInput for an empty corpus.
RptStats compute_rpt_stats(std::span<const Journey> journeys);

struct CategoryRow {
    std::string name;
    std::size_t users = 0;
    std::int64_t transactions = 0;
    double total_revenue = 0.0;
    double revenue_per_transaction = 0.0;
};

struct CategoryHistograms {
    std::vector<CategoryRow> browsers;
    std::vector<CategoryRow> devices;
};

/// Per-category user counts and revenue; rpt uses the same fallback rule as
/// compute_rpt_stats.
CategoryHistograms category_histograms(std::span<const Journey> journeys);

// ---------------------------------------------------------------------------
// Encoding

using UserVec = std::array<double, kUserDim>;
using SessionVec = std::array<double, kSessionDim>;
using HitVec = std::array<double, kHitDim>;

struct EncodedJourney {
    UserVec user_vec{};
    std::vector<SessionVec> session_vecs;
    std::vector<std::vector<HitVec>> hit_vecs;
    std::vector<int> class_ids;

    std::size_t num_sessions() const { return session_vecs.size(); }
};

/// [returning, is_mobile, is_tablet, browser_rpt, device_rpt]
UserVec encode_user(const RawUserRow& row, const RptStats& stats);
SessionVec encode_session(const RawSessionRow& row);
/// [minute_of_day / 1440, time_on_page_s, product_detail_view]
HitVec encode_hit(const RawHitRow& row);
EncodedJourney encode_journey(const Journey& journey, const RptStats& stats);

/// Throws ShapeMismatch on inconsistent lengths, BadValue on out-of-range class
/// ids or non-finite entries, EmptyHitSequence on a session without hits.
void validate_encoded(const EncodedJourney& journey);

// ---------------------------------------------------------------------------
// Normalization

enum class NormMethod { MinMax, Standardize };

std::string_view norm_method_name(NormMethod m);

/// Per-dimension affine map x -> (x - offset) * scale, with scale 0 for
/// constant dimensions.
struct AffineStats {
    std::vector<double> offset;
    std::vector<double> scale;
};

class Normalizer {
public:
    Normalizer() = default;
    Normalizer(NormMethod method, AffineStats user, AffineStats session, AffineStats hit);

    /// MinMax uses (x - min) / (max - min); Standardize uses the population
    /// standard deviation. Constant dimensions map to 0 in both.
    static Normalizer fit(std::span<const EncodedJourney> journeys, NormMethod method);

    bool fitted() const { return fitted_; }
    NormMethod method() const { return method_; }
    const AffineStats& user() const { return user_; }
    const AffineStats& session() const { return session_; }
    const AffineStats& hit() const { return hit_; }

    /// Throws NotFitted on a default-constructed normalizer.
    EncodedJourney apply(const EncodedJourney& journey) const;
    std::vector<EncodedJourney> apply(std::span<const EncodedJourney> journeys) const;

private:
    bool fitted_ = false;
    NormMethod method_ = NormMethod::MinMax;
    AffineStats user_;
    AffineStats session_;
    AffineStats hit_;
};

// ---------------------------------------------------------------------------
// Descriptive statistics

using Matrix = std::vector<std::vector<double>>;

/// Pearson correlation between columns of `rows`. Constant columns correlate 0
/// with everything else and 1 with themselves. Throws InsufficientRows for
/// fewer than 2 rows.
Matrix pearson_correlation_matrix(const Matrix& rows);

/// Column names for correlation_rows().
std::vector<std::string> correlation_columns();

/// One row per session: raw user (5), session (11) and mean hit (3) encodings
/// followed by the class id as the last column.
Matrix correlation_rows(std::span<const Journey> journeys, const RptStats& stats);

} // namespace shopstage
