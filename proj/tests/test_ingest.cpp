// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <doctest.h>
#include <random>
#include <sstream>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/features.hpp"
#include "shopstage/synthgen.hpp"
#include "support.hpp"

using namespace shopstage;

namespace {

const std::string kUsers = "client_id,user_type,device_category,browser_name,device_name\n";
const std::string kSessions =
    "client_id,session_id,duration_s,unique_pageviews,transactions,revenue,unique_purchases,"
    "days_since_last_session,site_search_used,results_pageviews,total_unique_searches,search_depth,"
    "search_refinements,shopping_stages\n";
const std::string kHits = "client_id,session_id,minute_of_day,time_on_page_s,product_detail_view\n";

RawUserRow user(const std::string& id, const std::string& browser = "Chrome") {
    return {id, UserType::New, DeviceCategory::Desktop, browser, "(not set)"};
}

RawSessionRow session(const std::string& client, const std::string& sid) {
    RawSessionRow s;
    s.client_id = client;
    s.session_id = sid;
    s.shopping_stages = {Stage::AllVisits};
    return s;
}

RawHitRow hit(const std::string& client, const std::string& sid, int minute) {
    return {client, sid, minute, 10.0, false};
}

template <class Fn>
BadValueError capture_bad_value(Fn fn) {
    try {
        fn();
    } catch (const BadValueError& e) {
        return e;
    }
    FAIL("expected BadValueError");
    return BadValueError(0, "", "");
}

} // namespace

TEST_SUITE("ingest") {

TEST_CASE("one user line") {
    std::istringstream in(kUsers + "abc,Returning,mobile,Safari,Apple iPhone\n");
    const auto rows = parse_users_csv(in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == RawUserRow{"abc", UserType::Returning, DeviceCategory::Mobile, "Safari", "Apple iPhone"});
}

TEST_CASE("negative duration is a bad value with its position") {
    std::istringstream in(kSessions + "c,t.1000,-5,1,0,0,0,0,0,0,0,0,0,ALL_VISITS\n");
    const auto e = capture_bad_value([&] { parse_sessions_csv(in); });
    CHECK(e.code() == ErrorCode::BadValue);
    CHECK(e.line() == 2);
    CHECK(e.column() == "duration_s");
}

TEST_CASE("unparseable cells and booleans") {
    std::istringstream in(kHits + "c,t.1,abc,1,0\n");
    CHECK(capture_bad_value([&] { parse_hits_csv(in); }).column() == "minute_of_day");
    std::istringstream in2(kHits + "c,t.1,10,1,2\n");
    CHECK(capture_bad_value([&] { parse_hits_csv(in2); }).column() == "product_detail_view");
    std::istringstream in3(kHits + "c,t.1,1440,1,0\n");
    CHECK(capture_bad_value([&] { parse_hits_csv(in3); }).column() == "minute_of_day");
    std::istringstream in4(kSessions + "c,notimestamp,1,1,0,0,0,0,0,0,0,0,0,ALL_VISITS\n");
    CHECK(capture_bad_value([&] { parse_sessions_csv(in4); }).column() == "session_id");
    std::istringstream in5(kSessions + "c,t.5,1,1,1,9,0,0,0,0,0,0,0,ALL_VISITS|TRANSACTION\n");
    CHECK(capture_bad_value([&] { parse_sessions_csv(in5); }).column() == "unique_purchases");
}

TEST_CASE("header mismatch") {
    std::istringstream in("client_id,user_type,browser_name\nabc,New,Chrome\n");
    try {
        parse_users_csv(in);
        FAIL("expected MalformedHeader");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedHeader);
    }
}

TEST_CASE("repeated session id") {
    std::istringstream in(kSessions + "c,t.1,1,1,0,0,0,0,0,0,0,0,0,ALL_VISITS\n" +
                          "d,t.1,1,1,0,0,0,0,0,0,0,0,0,ALL_VISITS\n");
    try {
        parse_sessions_csv(in);
        FAIL("expected DuplicateKey");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateKey);
    }
}

TEST_CASE("stage tokens and quoting survive a round trip") {
    RawSessionRow s = session("a,b", "x\"y.77");
    s.shopping_stages = stages_for_class(4);
    s.revenue = 0.1;
    std::ostringstream out;
    write_sessions_csv(out, {s});
    std::istringstream in(out.str());
    const auto back = parse_sessions_csv(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == s);
    CHECK(format_stages(s.shopping_stages) == "ALL_VISITS|PRODUCT_VIEW|CHECKOUT");
}

TEST_CASE("three generated hits parse back") {
    SynthConfig cfg;
    cfg.n_users = 3;
    const auto corpus = generate(cfg);
    const std::vector<RawHitRow> three(corpus.hits.begin(), corpus.hits.begin() + 3);
    std::ostringstream out;
    write_hits_csv(out, three);
    std::istringstream in(out.str());
    const auto rows = parse_hits_csv(in);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(rows[i].minute_of_day == three[i].minute_of_day);
    CHECK(rows == three);
}

TEST_CASE("join of one user, one session, two hits") {
    const auto r = join_journeys({user("u")}, {session("u", "t.5")}, {hit("u", "t.5", 3), hit("u", "t.5", 1)});
    REQUIRE(r.journeys.size() == 1);
    REQUIRE(r.journeys[0].sessions.size() == 1);
    CHECK(r.journeys[0].sessions[0].hits.size() == 2);
    CHECK(r.journeys[0].sessions[0].hits[0].minute_of_day == 1);
    CHECK(r.drops == DropReport{});
}

TEST_CASE("a session without hits is dropped") {
    const auto r = join_journeys({user("u")}, {session("u", "t.5")}, {});
    CHECK(r.journeys.empty());
    CHECK(r.drops.sessions_without_hits == 1);
    CHECK(r.drops.users_without_sessions == 1);
}

TEST_CASE("anomalies are counted") {
    const auto r = join_journeys({user("u", "A"), user("u", "B"), user("lonely")},
                                 {session("u", "t.5"), session("ghost", "g.1")},
                                 {hit("u", "t.5", 0), hit("ghost", "g.1", 0), hit("u", "nope.1", 0)});
    REQUIRE(r.journeys.size() == 1);
    CHECK(r.journeys[0].user.browser_name == "B");
    CHECK(r.drops.duplicate_users == 1);
    CHECK(r.drops.sessions_without_user == 1);
    CHECK(r.drops.orphan_hits == 2);
    CHECK(r.drops.users_without_sessions == 1);
}

TEST_CASE("sessions order by embedded timestamp, hit ties keep input order") {
    std::vector<RawHitRow> hits{hit("u", "z.100", 5), hit("u", "a.200", 5), hit("u", "b.100", 9)};
    hits.push_back({"u", "z.100", 5, 99.0, true});
    const auto r =
        join_journeys({user("u")}, {session("u", "a.200"), session("u", "z.100"), session("u", "b.100")}, hits);
    const auto& s = r.journeys.at(0).sessions;
    REQUIRE(s.size() == 3);
    CHECK(s[0].session.session_id == "b.100");
    CHECK(s[1].session.session_id == "z.100");
    CHECK(s[2].session.session_id == "a.200");
    CHECK(s[1].hits[0].time_on_page_s == 10.0);
    CHECK(s[1].hits[1].time_on_page_s == 99.0);
}

TEST_CASE("generated corpus joins to the non-empty users") {
    SynthConfig cfg;
    cfg.n_users = 50;
    cfg.empty_user_rate = 0.2;
    cfg.seed = 3;
    const auto corpus = generate(cfg);
    REQUIRE(corpus.truth.empty_users() > 0);
    const auto r = join_journeys(corpus.users, corpus.sessions, corpus.hits);
    CHECK(r.journeys.size() == cfg.n_users - corpus.truth.empty_users());
}

TEST_CASE("property: writer, parser and join reproduce the generated structure") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        SynthConfig cfg;
        cfg.n_users = 40;
        cfg.seed = seed;
        cfg.empty_user_rate = 0.05;
        const auto corpus = generate(cfg);
        std::ostringstream u, s, h;
        write_users_csv(u, corpus.users);
        write_sessions_csv(s, corpus.sessions);
        write_hits_csv(h, corpus.hits);
        std::istringstream ui(u.str()), si(s.str()), hi(h.str());
        const auto r = join_journeys(parse_users_csv(ui), parse_sessions_csv(si), parse_hits_csv(hi));

        std::size_t j = 0;
        for (const auto& truth : corpus.truth.users) {
            if (truth.session_classes.empty()) continue;
            REQUIRE(j < r.journeys.size());
            const auto& journey = r.journeys[j++];
            CHECK(journey.user.client_id == truth.client_id);
            REQUIRE(journey.sessions.size() == truth.session_classes.size());
            for (std::size_t k = 0; k < journey.sessions.size(); ++k) {
                const auto& rec = journey.sessions[k];
                CHECK(rec.session.session_id == truth.session_ids[k]);
                CHECK(map_shopping_stage(rec.session.shopping_stages) == truth.session_classes[k]);
                const auto n = std::count_if(corpus.hits.begin(), corpus.hits.end(), [&](const RawHitRow& x) {
                    return x.session_id == truth.session_ids[k];
                });
                CHECK(rec.hits.size() == static_cast<std::size_t>(n));
            }
        }
        CHECK(j == r.journeys.size());
    }
}

TEST_CASE("property: join ignores input row order and conserves hits") {
    SynthConfig cfg;
    cfg.n_users = 30;
    const auto corpus = generate(cfg);
    auto users = corpus.users;
    auto sessions = corpus.sessions;
    auto hits = corpus.hits;
    hits.push_back(hit("nobody", "x.1", 0));
    const auto base = join_journeys(users, sessions, hits);
    std::mt19937_64 gen(9);
    for (int rep = 0; rep < 5; ++rep) {
        std::shuffle(users.begin(), users.end(), gen);
        std::shuffle(sessions.begin(), sessions.end(), gen);
        // Hits of one session must keep their relative order for ties.
        std::stable_sort(hits.begin(), hits.end(), [&](const RawHitRow& a, const RawHitRow& b) {
            return std::hash<std::string>{}(a.session_id + std::to_string(rep)) <
                   std::hash<std::string>{}(b.session_id + std::to_string(rep));
        });
        const auto r = join_journeys(users, sessions, hits);
        REQUIRE(r.journeys.size() == base.journeys.size());
        for (std::size_t i = 0; i < r.journeys.size(); ++i) {
            CHECK(r.journeys[i].user == base.journeys[i].user);
            REQUIRE(r.journeys[i].sessions.size() == base.journeys[i].sessions.size());
            for (std::size_t k = 0; k < r.journeys[i].sessions.size(); ++k) {
                CHECK(r.journeys[i].sessions[k].session == base.journeys[i].sessions[k].session);
                CHECK(r.journeys[i].sessions[k].hits == base.journeys[i].sessions[k].hits);
            }
        }
        CHECK(total_hits(r.journeys) + r.drops.orphan_hits == hits.size());
    }
}

} // TEST_SUITE
