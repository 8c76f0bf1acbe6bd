// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"

namespace shopstage {

const std::vector<std::string> kUsersHeader = {"client_id", "user_type", "device_category",
                                               "browser_name", "device_name"};
const std::vector<std::string> kSessionsHeader = {
    "client_id",         "session_id",          "duration_s",
    "unique_pageviews",  "transactions",        "revenue",
    "unique_purchases",  "days_since_last_session", "site_search_used",
    "results_pageviews", "total_unique_searches", "search_depth",
    "search_refinements", "shopping_stages"};
const std::vector<std::string> kHitsHeader = {"client_id", "session_id", "minute_of_day",
                                              "time_on_page_s", "product_detail_view"};

const std::vector<std::string>& canonical_header(TableKind kind) {
    switch (kind) {
    case TableKind::Users: return kUsersHeader;
    case TableKind::Sessions: return kSessionsHeader;
    case TableKind::Hits: return kHitsHeader;
    }
    return kUsersHeader;
}

std::string_view table_kind_name(TableKind kind) {
    switch (kind) {
    case TableKind::Users: return "users";
    case TableKind::Sessions: return "sessions";
    case TableKind::Hits: return "hits";
    }
    return "?";
}

std::string_view stage_token(Stage s) {
    switch (s) {
    case Stage::AllVisits: return "ALL_VISITS";
    case Stage::ProductView: return "PRODUCT_VIEW";
    case Stage::AddToCart: return "ADD_TO_CART";
    case Stage::Checkout: return "CHECKOUT";
    case Stage::Transaction: return "TRANSACTION";
    }
    return "?";
}

std::optional<Stage> parse_stage_token(std::string_view token) {
    for (Stage s : kAllStages) {
        if (stage_token(s) == token) return s;
    }
    return std::nullopt;
}

std::string format_stages(StageSet stages) {
    std::string out;
    for (Stage s : kAllStages) {
        if (!stages.contains(s)) continue;
        if (!out.empty()) out.push_back('|');
        out += stage_token(s);
    }
    return out;
}

std::string_view user_type_name(UserType t) { return t == UserType::New ? "New" : "Returning"; }

std::string_view device_category_name(DeviceCategory d) {
    switch (d) {
    case DeviceCategory::Desktop: return "desktop";
    case DeviceCategory::Mobile: return "mobile";
    case DeviceCategory::Tablet: return "tablet";
    }
    return "?";
}

std::optional<std::int64_t> session_timestamp(std::string_view session_id) {
    const auto dot = session_id.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return std::nullopt;
    return csv::parse_int(session_id.substr(dot + 1));
}

namespace {

class RowReader {
public:
    RowReader(std::istream& in, TableKind kind) : in_(in), header_(canonical_header(kind)) {
        std::string line;
        if (!csv::read_line(in_, line)) {
            throw Error(ErrorCode::MalformedHeader,
                        std::string(table_kind_name(kind)) + " table has no header line");
        }
        if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        line_no_ = 1;
        if (csv::split_line(line) != header_) {
            throw Error(ErrorCode::MalformedHeader,
                        std::string(table_kind_name(kind)) + " header mismatch: '" + line + "'");
        }
    }

    /// Next non-empty data record; false at EOF.
    bool next() {
        std::string line;
        while (csv::read_line(in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            fields_ = csv::split_line(line);
            if (fields_.size() != header_.size()) {
                throw BadValueError(line_no_, header_[std::min(fields_.size(), header_.size() - 1)],
                                    "expected " + std::to_string(header_.size()) + " fields, got " +
                                        std::to_string(fields_.size()));
            }
            return true;
        }
        return false;
    }

    std::size_t line() const { return line_no_; }

    const std::string& str(std::size_t col) const { return fields_[col]; }

    double real(std::size_t col) const {
        auto v = csv::parse_double(fields_[col]);
        if (!v || !std::isfinite(*v)) fail(col, "not a finite number: '" + fields_[col] + "'");
        return *v;
    }

    double non_negative_real(std::size_t col) const {
        const double v = real(col);
        if (v < 0.0) fail(col, "negative value " + fields_[col]);
        return v;
    }

    std::int64_t integer(std::size_t col) const {
        auto v = csv::parse_int(fields_[col]);
        if (!v) fail(col, "not an integer: '" + fields_[col] + "'");
        return *v;
    }

    std::int64_t count(std::size_t col) const {
        const auto v = integer(col);
        if (v < 0) fail(col, "negative count " + fields_[col]);
        return v;
    }

    bool flag(std::size_t col) const {
        if (fields_[col] == "0") return false;
        if (fields_[col] == "1") return true;
        fail(col, "boolean must be 0 or 1, got '" + fields_[col] + "'");
    }

    [[noreturn]] void fail(std::size_t col, const std::string& why) const {
        throw BadValueError(line_no_, header_[col], why);
    }

private:
    std::istream& in_;
    const std::vector<std::string>& header_;
    std::vector<std::string> fields_;
    std::size_t line_no_ = 0;
};

UserType parse_user_type(const RowReader& r, std::size_t col) {
    const auto& s = r.str(col);
    if (s == "New") return UserType::New;
    if (s == "Returning") return UserType::Returning;
    r.fail(col, "user_type must be New or Returning, got '" + s + "'");
}

DeviceCategory parse_device(const RowReader& r, std::size_t col) {
    const auto& s = r.str(col);
    if (s == "desktop") return DeviceCategory::Desktop;
    if (s == "mobile") return DeviceCategory::Mobile;
    if (s == "tablet") return DeviceCategory::Tablet;
    r.fail(col, "device_category must be desktop, mobile or tablet, got '" + s + "'");
}

StageSet parse_stage_list(const RowReader& r, std::size_t col) {
    StageSet set;
    std::string_view rest = r.str(col);
    while (!rest.empty()) {
        const auto bar = rest.find('|');
        const auto token = rest.substr(0, bar);
        auto stage = parse_stage_token(token);
        if (!stage) r.fail(col, "unknown shopping stage '" + std::string(token) + "'");
        set.insert(*stage);
        if (bar == std::string_view::npos) break;
        rest.remove_prefix(bar + 1);
    }
    return set;
}

} // namespace

void validate_row(const RawUserRow& row, std::size_t line) {
    if (row.client_id.empty()) throw BadValueError(line, "client_id", "empty client_id");
}

void validate_row(const RawSessionRow& row, std::size_t line) {
    if (row.client_id.empty()) throw BadValueError(line, "client_id", "empty client_id");
    if (!session_timestamp(row.session_id)) {
        throw BadValueError(line, "session_id",
                            "no integer timestamp suffix in '" + row.session_id + "'");
    }
    if (!std::isfinite(row.duration_s) || row.duration_s < 0.0)
        throw BadValueError(line, "duration_s", "must be finite and non-negative");
    if (!std::isfinite(row.revenue) || row.revenue < 0.0)
        throw BadValueError(line, "revenue", "must be finite and non-negative");
    const std::pair<const char*, std::int64_t> counts[] = {
        {"unique_pageviews", row.unique_pageviews},
        {"transactions", row.transactions},
        {"unique_purchases", row.unique_purchases},
        {"days_since_last_session", row.days_since_last_session},
        {"results_pageviews", row.results_pageviews},
        {"total_unique_searches", row.total_unique_searches},
        {"search_depth", row.search_depth},
        {"search_refinements", row.search_refinements}};
    for (const auto& [name, value] : counts) {
        if (value < 0) throw BadValueError(line, name, "negative count");
    }
    if (row.transactions > 0 && row.unique_purchases < 1)
        throw BadValueError(line, "unique_purchases", "transactions > 0 requires unique_purchases >= 1");
    if (row.shopping_stages.empty())
        throw BadValueError(line, "shopping_stages", "no shopping stage recorded");
}

void validate_row(const RawHitRow& row, std::size_t line) {
    if (row.client_id.empty()) throw BadValueError(line, "client_id", "empty client_id");
    if (row.session_id.empty()) throw BadValueError(line, "session_id", "empty session_id");
    if (row.minute_of_day < 0 || row.minute_of_day > 1439)
        throw BadValueError(line, "minute_of_day", "outside [0, 1439]");
    if (!std::isfinite(row.time_on_page_s) || row.time_on_page_s < 0.0)
        throw BadValueError(line, "time_on_page_s", "must be finite and non-negative");
}

std::vector<RawUserRow> parse_users_csv(std::istream& in) {
    RowReader r(in, TableKind::Users);
    std::vector<RawUserRow> rows;
    while (r.next()) {
        RawUserRow row;
        row.client_id = r.str(0);
        row.user_type = parse_user_type(r, 1);
        row.device_category = parse_device(r, 2);
        row.browser_name = r.str(3);
        row.device_name = r.str(4);
        validate_row(row, r.line());
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RawSessionRow> parse_sessions_csv(std::istream& in) {
    RowReader r(in, TableKind::Sessions);
    std::vector<RawSessionRow> rows;
    std::unordered_set<std::string> seen;
    while (r.next()) {
        RawSessionRow row;
        row.client_id = r.str(0);
        row.session_id = r.str(1);
        row.duration_s = r.non_negative_real(2);
        row.unique_pageviews = r.count(3);
        row.transactions = r.count(4);
        row.revenue = r.non_negative_real(5);
        row.unique_purchases = r.count(6);
        row.days_since_last_session = r.count(7);
        row.site_search_used = r.flag(8);
        row.results_pageviews = r.count(9);
        row.total_unique_searches = r.count(10);
        row.search_depth = r.count(11);
        row.search_refinements = r.count(12);
        row.shopping_stages = parse_stage_list(r, 13);
        validate_row(row, r.line());
        if (!seen.insert(row.session_id).second) {
            throw Error(ErrorCode::DuplicateKey, "session_id '" + row.session_id +
                                                     "' repeated at line " + std::to_string(r.line()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RawHitRow> parse_hits_csv(std::istream& in) {
    RowReader r(in, TableKind::Hits);
    std::vector<RawHitRow> rows;
    while (r.next()) {
        RawHitRow row;
        row.client_id = r.str(0);
        row.session_id = r.str(1);
        const auto minute = r.integer(2);
        if (minute < 0 || minute > 1439) r.fail(2, "minute_of_day outside [0, 1439]");
        row.minute_of_day = static_cast<int>(minute);
        row.time_on_page_s = r.non_negative_real(3);
        row.product_detail_view = r.flag(4);
        validate_row(row, r.line());
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_users_csv(std::ostream& out, const std::vector<RawUserRow>& rows) {
    out << csv::join_row(kUsersHeader) << '\n';
    for (const auto& r : rows) {
        const std::string fields[] = {r.client_id, std::string(user_type_name(r.user_type)),
                                      std::string(device_category_name(r.device_category)),
                                      r.browser_name, r.device_name};
        out << csv::join_row(fields) << '\n';
    }
}

void write_sessions_csv(std::ostream& out, const std::vector<RawSessionRow>& rows) {
    out << csv::join_row(kSessionsHeader) << '\n';
    for (const auto& r : rows) {
        const std::string fields[] = {r.client_id,
                                      r.session_id,
                                      csv::format_double(r.duration_s),
                                      std::to_string(r.unique_pageviews),
                                      std::to_string(r.transactions),
                                      csv::format_double(r.revenue),
                                      std::to_string(r.unique_purchases),
                                      std::to_string(r.days_since_last_session),
                                      r.site_search_used ? "1" : "0",
                                      std::to_string(r.results_pageviews),
                                      std::to_string(r.total_unique_searches),
                                      std::to_string(r.search_depth),
                                      std::to_string(r.search_refinements),
                                      format_stages(r.shopping_stages)};
        out << csv::join_row(fields) << '\n';
    }
}

void write_hits_csv(std::ostream& out, const std::vector<RawHitRow>& rows) {
    out << csv::join_row(kHitsHeader) << '\n';
    for (const auto& r : rows) {
        const std::string fields[] = {r.client_id, r.session_id, std::to_string(r.minute_of_day),
                                      csv::format_double(r.time_on_page_s),
                                      r.product_detail_view ? "1" : "0"};
        out << csv::join_row(fields) << '\n';
    }
}

JoinResult join_journeys(std::vector<RawUserRow> users, std::vector<RawSessionRow> sessions,
                         std::vector<RawHitRow> hits) {
    JoinResult result;
    DropReport& drops = result.drops;

    // Last duplicate wins.
    std::map<std::string, RawUserRow> user_by_id;
    for (auto& u : users) {
        auto [it, inserted] = user_by_id.try_emplace(u.client_id, u);
        if (!inserted) {
            it->second = std::move(u);
            ++drops.duplicate_users;
        }
    }

    struct Key {
        std::string client_id;
        std::string session_id;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return std::hash<std::string>{}(k.client_id) * 31u ^ std::hash<std::string>{}(k.session_id);
        }
    };

    std::unordered_map<Key, std::size_t, KeyHash> session_index;
    session_index.reserve(sessions.size());
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        session_index.emplace(Key{sessions[i].client_id, sessions[i].session_id}, i);
    }

    std::vector<std::vector<RawHitRow>> hits_of(sessions.size());
    for (auto& h : hits) {
        auto it = session_index.find(Key{h.client_id, h.session_id});
        if (it == session_index.end()) {
            ++drops.orphan_hits;
            continue;
        }
        hits_of[it->second].push_back(std::move(h));
    }

    std::map<std::string, std::vector<SessionRecord>> sessions_of;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (hits_of[i].empty()) {
            ++drops.sessions_without_hits;
            continue;
        }
        if (!user_by_id.contains(sessions[i].client_id)) {
            ++drops.sessions_without_user;
            drops.orphan_hits += hits_of[i].size();
            continue;
        }
        auto& h = hits_of[i];
        std::stable_sort(h.begin(), h.end(), [](const RawHitRow& a, const RawHitRow& b) {
            return a.minute_of_day < b.minute_of_day;
        });
        sessions_of[sessions[i].client_id].push_back({std::move(sessions[i]), std::move(h)});
    }

    for (auto& [client_id, user] : user_by_id) {
        auto it = sessions_of.find(client_id);
        if (it == sessions_of.end()) {
            ++drops.users_without_sessions;
            continue;
        }
        auto& list = it->second;
        std::sort(list.begin(), list.end(), [](const SessionRecord& a, const SessionRecord& b) {
            const auto ta = session_timestamp(a.session.session_id).value_or(0);
            const auto tb = session_timestamp(b.session.session_id).value_or(0);
            if (ta != tb) return ta < tb;
            return a.session.session_id < b.session.session_id;
        });
        result.journeys.push_back({std::move(user), std::move(list)});
    }
    return result;
}

std::size_t total_hits(const std::vector<Journey>& journeys) {
    std::size_t n = 0;
    for (const auto& j : journeys) {
        for (const auto& s : j.sessions) n += s.hits.size();
    }
    return n;
}

} // namespace shopstage
