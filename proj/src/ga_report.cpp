// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
//
// Adapter for Reporting-API-v4-shaped JSON reports: a columnHeader with
// dimension names and metric header entries, and data.rows holding parallel
// dimension and metric values. Column names are matched with or without the
// "ga:" prefix; the canonical snake_case names are accepted as well. See
// docs/ga_report_mapping.md for the table.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/ingest.hpp"

namespace shopstage {
namespace {

using nlohmann::json;

struct FieldSpec {
    const char* canonical;
    std::vector<const char*> aliases;
};

const std::vector<FieldSpec> kUserFields = {
    {"client_id", {"clientId"}},
    {"user_type", {"userType"}},
    {"device_category", {"deviceCategory"}},
    {"browser_name", {"browser"}},
    {"device_name", {"mobileDeviceModel", "mobileDeviceInfo"}},
};

const std::vector<FieldSpec> kSessionFields = {
    {"client_id", {"clientId"}},
    {"session_id", {"sessionId"}},
    {"duration_s", {"sessionDuration"}},
    {"unique_pageviews", {"uniquePageviews"}},
    {"transactions", {"transactions"}},
    {"revenue", {"transactionRevenue"}},
    {"unique_purchases", {"uniquePurchases"}},
    {"days_since_last_session", {"daysSinceLastSession"}},
    {"site_search_used", {"searchUsed"}},
    {"results_pageviews", {"searchResultViews"}},
    {"total_unique_searches", {"searchUniques"}},
    {"search_depth", {"searchDepth"}},
    {"search_refinements", {"searchRefinements"}},
    {"shopping_stages", {"shoppingStage"}},
};

const std::vector<FieldSpec> kHitFields = {
    {"client_id", {"clientId"}},
    {"session_id", {"sessionId"}},
    {"minute_of_day", {"dateHourMinute"}},
    {"time_on_page_s", {"timeOnPage"}},
    {"product_detail_view", {"productDetailViews"}},
};

std::string strip_prefix(const std::string& name) {
    return name.starts_with("ga:") ? name.substr(3) : name;
}

/// Flattened report: column names plus string cells per row.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::string cell_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number()) return csv::format_double(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    throw Error(ErrorCode::BadFormat, "report cell is not a scalar: " + v.dump());
}

Table read_report(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadFormat, std::string("report is not valid JSON: ") + e.what());
    }
    const json* report = &doc;
    if (doc.contains("reports")) {
        const auto& reports = doc.at("reports");
        if (!reports.is_array() || reports.size() != 1) {
            throw Error(ErrorCode::BadFormat, "expected exactly one report object per file");
        }
        report = &reports[0];
    }
    if (!report->is_object() || !report->contains("columnHeader")) {
        throw Error(ErrorCode::BadFormat, "report has no columnHeader");
    }

    Table table;
    const auto& header = report->at("columnHeader");
    std::size_t n_dims = 0;
    std::size_t n_metrics = 0;
    if (header.contains("dimensions")) {
        for (const auto& d : header.at("dimensions")) table.columns.push_back(d.get<std::string>());
        n_dims = table.columns.size();
    }
    if (header.contains("metricHeader") && header.at("metricHeader").contains("metricHeaderEntries")) {
        for (const auto& m : header.at("metricHeader").at("metricHeaderEntries")) {
            table.columns.push_back(m.at("name").get<std::string>());
        }
        n_metrics = table.columns.size() - n_dims;
    }

    if (!report->contains("data") || !report->at("data").contains("rows")) return table;
    std::size_t index = 0;
    for (const auto& row : report->at("data").at("rows")) {
        ++index;
        std::vector<std::string> cells;
        const json empty = json::array();
        const auto& dims = row.contains("dimensions") ? row.at("dimensions") : empty;
        if (dims.size() != n_dims) {
            throw Error(ErrorCode::ShapeMismatch, "row " + std::to_string(index) + " has " +
                                                      std::to_string(dims.size()) + " dimensions, header has " +
                                                      std::to_string(n_dims));
        }
        for (const auto& d : dims) cells.push_back(cell_text(d));
        std::size_t metric_count = 0;
        if (row.contains("metrics") && !row.at("metrics").empty()) {
            // Only the first date range is read.
            const auto& values = row.at("metrics")[0].at("values");
            metric_count = values.size();
            for (const auto& v : values) cells.push_back(cell_text(v));
        }
        if (metric_count != n_metrics) {
            throw Error(ErrorCode::ShapeMismatch, "row " + std::to_string(index) + " has " +
                                                      std::to_string(metric_count) + " metrics, header has " +
                                                      std::to_string(n_metrics));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

/// Resolves every canonical field to a column index; counts unmapped columns.
struct Mapping {
    std::map<std::string, std::size_t> column_of;
    std::size_t unknown = 0;
};

Mapping map_columns(const Table& t, const std::vector<FieldSpec>& fields, TableKind kind) {
    Mapping m;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const auto name = strip_prefix(t.columns[c]);
        bool matched = false;
        for (const auto& f : fields) {
            bool hit = name == f.canonical;
            for (const char* a : f.aliases) hit = hit || name == a;
            if (hit) {
                m.column_of.try_emplace(f.canonical, c);
                matched = true;
                break;
            }
        }
        if (!matched) ++m.unknown;
    }
    for (const auto& f : fields) {
        if (!m.column_of.contains(f.canonical)) {
            throw Error(ErrorCode::MissingColumn, std::string(table_kind_name(kind)) +
                                                      " report lacks a column for '" + f.canonical + "'");
        }
    }
    return m;
}

class Cells {
public:
    Cells(const std::vector<std::string>& row, const Mapping& m, std::size_t line)
        : row_(row), map_(m), line_(line) {}

    const std::string& str(const char* field) const { return row_[map_.column_of.at(field)]; }

    double real(const char* field) const {
        auto v = csv::parse_double(str(field));
        if (!v || !std::isfinite(*v)) fail(field, "not a finite number: '" + str(field) + "'");
        return *v;
    }

    std::int64_t integer(const char* field) const {
        const double v = real(field);
        if (v != std::floor(v)) fail(field, "not an integer: '" + str(field) + "'");
        return static_cast<std::int64_t>(v);
    }

    [[noreturn]] void fail(const char* field, const std::string& why) const {
        throw BadValueError(line_, field, why);
    }

    std::size_t line() const { return line_; }

private:
    const std::vector<std::string>& row_;
    const Mapping& map_;
    std::size_t line_;
};

bool parse_bool_text(const Cells& c, const char* field) {
    const auto& s = c.str(field);
    if (s == "1" || s == "true" || s == "Visits With Site Search") return true;
    if (s == "0" || s == "false" || s == "Visits Without Site Search") return false;
    c.fail(field, "unrecognized boolean '" + s + "'");
}

} // namespace

ReportParse<RawUserRow> parse_users_report(std::istream& in) {
    const Table t = read_report(in);
    ReportParse<RawUserRow> out;
    if (t.rows.empty()) return out;
    const Mapping m = map_columns(t, kUserFields, TableKind::Users);
    out.unknown_columns = m.unknown;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        Cells c(t.rows[i], m, i + 1);
        RawUserRow row;
        row.client_id = c.str("client_id");
        const auto& type = c.str("user_type");
        if (type == "New Visitor" || type == "New") {
            row.user_type = UserType::New;
        } else if (type == "Returning Visitor" || type == "Returning") {
            row.user_type = UserType::Returning;
        } else {
            c.fail("user_type", "unrecognized user type '" + type + "'");
        }
        std::string device = c.str("device_category");
        std::transform(device.begin(), device.end(), device.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        if (device == "desktop") {
            row.device_category = DeviceCategory::Desktop;
        } else if (device == "mobile") {
            row.device_category = DeviceCategory::Mobile;
        } else if (device == "tablet") {
            row.device_category = DeviceCategory::Tablet;
        } else {
            c.fail("device_category", "unrecognized device category '" + device + "'");
        }
        row.browser_name = c.str("browser_name");
        row.device_name = c.str("device_name");
        validate_row(row, c.line());
        out.rows.push_back(std::move(row));
    }
    return out;
}

ReportParse<RawSessionRow> parse_sessions_report(std::istream& in) {
    const Table t = read_report(in);
    ReportParse<RawSessionRow> out;
    if (t.rows.empty()) return out;
    const Mapping m = map_columns(t, kSessionFields, TableKind::Sessions);
    out.unknown_columns = m.unknown;
    // The stage dimension yields one row per (session, stage); rows of the same
    // session are merged by union of their stages.
    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        Cells c(t.rows[i], m, i + 1);
        StageSet stages;
        std::string_view rest = c.str("shopping_stages");
        while (!rest.empty()) {
            const auto bar = rest.find('|');
            if (auto s = parse_stage_token(rest.substr(0, bar))) {
                stages.insert(*s);
            } else {
                ++out.unknown_stage_values;
            }
            if (bar == std::string_view::npos) break;
            rest.remove_prefix(bar + 1);
        }
        const auto& sid = c.str("session_id");
        if (auto it = index_of.find(sid); it != index_of.end()) {
            auto& existing = out.rows[it->second];
            existing.shopping_stages = existing.shopping_stages | stages;
            continue;
        }
        RawSessionRow row;
        row.client_id = c.str("client_id");
        row.session_id = sid;
        row.duration_s = c.real("duration_s");
        row.unique_pageviews = c.integer("unique_pageviews");
        row.transactions = c.integer("transactions");
        row.revenue = c.real("revenue");
        row.unique_purchases = c.integer("unique_purchases");
        row.days_since_last_session = c.integer("days_since_last_session");
        row.site_search_used = parse_bool_text(c, "site_search_used");
        row.results_pageviews = c.integer("results_pageviews");
        row.total_unique_searches = c.integer("total_unique_searches");
        row.search_depth = c.integer("search_depth");
        row.search_refinements = c.integer("search_refinements");
        row.shopping_stages = stages;
        index_of.emplace(sid, out.rows.size());
        out.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < out.rows.size(); ++i) validate_row(out.rows[i], i + 1);
    return out;
}

ReportParse<RawHitRow> parse_hits_report(std::istream& in) {
    const Table t = read_report(in);
    ReportParse<RawHitRow> out;
    if (t.rows.empty()) return out;
    const Mapping m = map_columns(t, kHitFields, TableKind::Hits);
    out.unknown_columns = m.unknown;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        Cells c(t.rows[i], m, i + 1);
        RawHitRow row;
        row.client_id = c.str("client_id");
        row.session_id = c.str("session_id");
        const auto& when = c.str("minute_of_day");
        if (when.size() == 12 && std::all_of(when.begin(), when.end(), ::isdigit)) {
            // YYYYMMDDHHMM
            const int hour = std::stoi(when.substr(8, 2));
            const int minute = std::stoi(when.substr(10, 2));
            if (hour > 23 || minute > 59) c.fail("minute_of_day", "bad dateHourMinute '" + when + "'");
            row.minute_of_day = hour * 60 + minute;
        } else {
            row.minute_of_day = static_cast<int>(c.integer("minute_of_day"));
        }
        row.time_on_page_s = c.real("time_on_page_s");
        row.product_detail_view = c.integer("product_detail_view") > 0;
        validate_row(row, c.line());
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

json make_report(const std::vector<std::string>& dims, const std::vector<std::pair<std::string, std::string>>& metrics,
                 json rows) {
    json metric_entries = json::array();
    for (const auto& [name, type] : metrics) metric_entries.push_back({{"name", name}, {"type", type}});
    const auto n = rows.size();
    json report = {{"columnHeader", {{"dimensions", dims}, {"metricHeader", {{"metricHeaderEntries", metric_entries}}}}},
                   {"data", {{"rows", std::move(rows)}, {"rowCount", n}}}};
    return json{{"reports", json::array({std::move(report)})}};
}

json make_row(std::vector<std::string> dims, std::vector<std::string> values) {
    return {{"dimensions", std::move(dims)}, {"metrics", json::array({{{"values", std::move(values)}}})}};
}

std::string two_digits(int v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

} // namespace

void write_users_report(std::ostream& out, const std::vector<RawUserRow>& rows) {
    json data = json::array();
    for (const auto& r : rows) {
        data.push_back(make_row({r.client_id, r.user_type == UserType::New ? "New Visitor" : "Returning Visitor",
                                 std::string(device_category_name(r.device_category)), r.browser_name,
                                 r.device_name},
                                {}));
    }
    out << make_report({"ga:clientId", "ga:userType", "ga:deviceCategory", "ga:browser", "ga:mobileDeviceModel"}, {},
                       std::move(data))
               .dump(2)
        << '\n';
}

void write_sessions_report(std::ostream& out, const std::vector<RawSessionRow>& rows) {
    json data = json::array();
    for (const auto& r : rows) {
        std::vector<std::string> values = {csv::format_double(r.duration_s),
                                           std::to_string(r.unique_pageviews),
                                           std::to_string(r.transactions),
                                           csv::format_double(r.revenue),
                                           std::to_string(r.unique_purchases),
                                           std::to_string(r.results_pageviews),
                                           std::to_string(r.total_unique_searches),
                                           std::to_string(r.search_depth),
                                           std::to_string(r.search_refinements)};
        for (Stage s : kAllStages) {
            if (!r.shopping_stages.contains(s)) continue;
            data.push_back(make_row({r.client_id, r.session_id, std::to_string(r.days_since_last_session),
                                     r.site_search_used ? "Visits With Site Search" : "Visits Without Site Search",
                                     std::string(stage_token(s))},
                                    values));
        }
    }
    out << make_report({"ga:clientId", "ga:sessionId", "ga:daysSinceLastSession", "ga:searchUsed", "ga:shoppingStage"},
                       {{"ga:sessionDuration", "TIME"},
                        {"ga:uniquePageviews", "INTEGER"},
                        {"ga:transactions", "INTEGER"},
                        {"ga:transactionRevenue", "CURRENCY"},
                        {"ga:uniquePurchases", "INTEGER"},
                        {"ga:searchResultViews", "INTEGER"},
                        {"ga:searchUniques", "INTEGER"},
                        {"ga:searchDepth", "INTEGER"},
                        {"ga:searchRefinements", "INTEGER"}},
                       std::move(data))
               .dump(2)
        << '\n';
}

void write_hits_report(std::ostream& out, const std::vector<RawHitRow>& rows) {
    json data = json::array();
    for (const auto& r : rows) {
        const std::string when = "20190514" + two_digits(r.minute_of_day / 60) + two_digits(r.minute_of_day % 60);
        data.push_back(make_row({r.client_id, r.session_id, when},
                                {csv::format_double(r.time_on_page_s), r.product_detail_view ? "1" : "0"}));
    }
    out << make_report({"ga:clientId", "ga:sessionId", "ga:dateHourMinute"},
                       {{"ga:timeOnPage", "TIME"}, {"ga:productDetailViews", "INTEGER"}}, std::move(data))
               .dump(2)
        << '\n';
}

} // namespace shopstage
