// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shopstage {

enum class UserType { New, Returning };
enum class DeviceCategory { Desktop, Mobile, Tablet };

/// Funnel tokens recorded by enhanced e-commerce tracking.
enum class Stage : std::uint8_t {
    AllVisits = 1u << 0,
    ProductView = 1u << 1,
    AddToCart = 1u << 2,
    Checkout = 1u << 3,
    Transaction = 1u << 4,
};

/// Set of stages as a 5-bit mask.
class StageSet {
public:
    constexpr StageSet() = default;
    constexpr explicit StageSet(std::uint8_t bits) : bits_(bits & 0x1Fu) {}
    constexpr StageSet(std::initializer_list<Stage> stages) {
        for (Stage s : stages) insert(s);
    }

    constexpr void insert(Stage s) { bits_ |= static_cast<std::uint8_t>(s); }
    constexpr bool contains(Stage s) const { return (bits_ & static_cast<std::uint8_t>(s)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    constexpr StageSet operator|(StageSet other) const { return StageSet(bits_ | other.bits_); }

    friend constexpr bool operator==(StageSet, StageSet) = default;

private:
    std::uint8_t bits_ = 0;
};

inline constexpr Stage kAllStages[] = {Stage::AllVisits, Stage::ProductView, Stage::AddToCart,
                                       Stage::Checkout, Stage::Transaction};

std::string_view stage_token(Stage s);
std::optional<Stage> parse_stage_token(std::string_view token);
/// "|"-joined tokens in funnel order.
std::string format_stages(StageSet stages);

std::string_view user_type_name(UserType t);
std::string_view device_category_name(DeviceCategory d);

struct RawUserRow {
    std::string client_id;
    UserType user_type = UserType::New;
    DeviceCategory device_category = DeviceCategory::Desktop;
    std::string browser_name;
    std::string device_name;

    friend bool operator==(const RawUserRow&, const RawUserRow&) = default;
};

struct RawSessionRow {
    std::string client_id;
    std::string session_id;
    double duration_s = 0.0;
    std::int64_t unique_pageviews = 0;
    std::int64_t transactions = 0;
    double revenue = 0.0;
    std::int64_t unique_purchases = 0;
    std::int64_t days_since_last_session = 0;
    bool site_search_used = false;
    std::int64_t results_pageviews = 0;
    std::int64_t total_unique_searches = 0;
    std::int64_t search_depth = 0;
    std::int64_t search_refinements = 0;
    StageSet shopping_stages;

    friend bool operator==(const RawSessionRow&, const RawSessionRow&) = default;
};

struct RawHitRow {
    std::string client_id;
    std::string session_id;
    int minute_of_day = 0;
    double time_on_page_s = 0.0;
    bool product_detail_view = false;

    friend bool operator==(const RawHitRow&, const RawHitRow&) = default;
};

struct SessionRecord {
    RawSessionRow session;
    std::vector<RawHitRow> hits;
};

/// One user's ordered sessions with their ordered hits.
struct Journey {
    RawUserRow user;
    std::vector<SessionRecord> sessions;
};

enum class TableKind { Users, Sessions, Hits };

std::string_view table_kind_name(TableKind kind);

/// Millisecond timestamp after the last '.' of a session id.
std::optional<std::int64_t> session_timestamp(std::string_view session_id);

// ---------------------------------------------------------------------------
// Canonical delimited-text tables

extern const std::vector<std::string> kUsersHeader;
extern const std::vector<std::string> kSessionsHeader;
extern const std::vector<std::string> kHitsHeader;

const std::vector<std::string>& canonical_header(TableKind kind);

std::vector<RawUserRow> parse_users_csv(std::istream& in);
/// Throws DuplicateKey on a repeated session_id.
std::vector<RawSessionRow> parse_sessions_csv(std::istream& in);
std::vector<RawHitRow> parse_hits_csv(std::istream& in);

void write_users_csv(std::ostream& out, const std::vector<RawUserRow>& rows);
void write_sessions_csv(std::ostream& out, const std::vector<RawSessionRow>& rows);
void write_hits_csv(std::ostream& out, const std::vector<RawHitRow>& rows);

// Row validation shared by both parse paths. Throw BadValueError on violation.
void validate_row(const RawUserRow& row, std::size_t line);
void validate_row(const RawSessionRow& row, std::size_t line);
void validate_row(const RawHitRow& row, std::size_t line);

// ---------------------------------------------------------------------------
// Reporting-API-shaped JSON reports

template <class Row>
struct ReportParse {
    std::vector<Row> rows;
    /// Header columns with no canonical mapping.
    std::size_t unknown_columns = 0;
    /// Stage values outside the five funnel tokens.
    std::size_t unknown_stage_values = 0;
};

ReportParse<RawUserRow> parse_users_report(std::istream& in);
ReportParse<RawSessionRow> parse_sessions_report(std::istream& in);
ReportParse<RawHitRow> parse_hits_report(std::istream& in);

/// Hits carry only minute-of-day, so the report date is a fixed placeholder.
void write_users_report(std::ostream& out, const std::vector<RawUserRow>& rows);
void write_sessions_report(std::ostream& out, const std::vector<RawSessionRow>& rows);
void write_hits_report(std::ostream& out, const std::vector<RawHitRow>& rows);

// ---------------------------------------------------------------------------
// Join

struct DropReport {
    std::size_t duplicate_users = 0;
    std::size_t sessions_without_hits = 0;
    std::size_t sessions_without_user = 0;
    std::size_t orphan_hits = 0;
    std::size_t users_without_sessions = 0;

    friend bool operator==(const DropReport&, const DropReport&) = default;
};

struct JoinResult {
    std::vector<Journey> journeys;
    DropReport drops;
};

/// Journeys come out sorted by client_id; sessions by embedded timestamp then
/// session_id; hits stably by minute_of_day. A hit counts as orphaned when it
/// does not end up inside a returned journey.
JoinResult join_journeys(std::vector<RawUserRow> users, std::vector<RawSessionRow> sessions,
                         std::vector<RawHitRow> hits);

std::size_t total_hits(const std::vector<Journey>& journeys);

} // namespace shopstage
