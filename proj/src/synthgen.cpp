// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/features.hpp"
#include "shopstage/rng.hpp"

namespace shopstage {

std::string_view archetype_name(Archetype a) {
    switch (a) {
    case Archetype::Browser: return "browser";
    case Archetype::Researcher: return "researcher";
    case Archetype::Buyer: return "buyer";
    }
    return "?";
}

std::optional<Archetype> parse_archetype(std::string_view name) {
    for (auto a : {Archetype::Browser, Archetype::Researcher, Archetype::Buyer}) {
        if (archetype_name(a) == name) return a;
    }
    return std::nullopt;
}

std::array<ArchetypeSpec, kNumArchetypes> SynthConfig::default_archetypes() {
    // Browsers rarely leave the first two classes, researchers climb the
    // funnel, buyers convert often.
    ArchetypeSpec browser{0.5,
                          {{{0.70, 0.25, 0.03, 0.01, 0.005, 0.005},
                            {0.45, 0.45, 0.05, 0.02, 0.015, 0.015},
                            {0.40, 0.35, 0.15, 0.05, 0.03, 0.02},
                            {0.40, 0.30, 0.10, 0.10, 0.05, 0.05},
                            {0.40, 0.30, 0.10, 0.10, 0.05, 0.05},
                            {0.50, 0.30, 0.08, 0.05, 0.02, 0.05}}},
                          std::nullopt};
    ArchetypeSpec researcher{0.3,
                             {{{0.35, 0.45, 0.12, 0.04, 0.02, 0.02},
                               {0.20, 0.40, 0.20, 0.10, 0.05, 0.05},
                               {0.15, 0.25, 0.25, 0.15, 0.05, 0.15},
                               {0.10, 0.20, 0.15, 0.15, 0.10, 0.30},
                               {0.10, 0.25, 0.10, 0.15, 0.10, 0.30},
                               {0.40, 0.35, 0.10, 0.05, 0.03, 0.07}}},
                             std::nullopt};
    ArchetypeSpec buyer{0.2,
                        {{{0.25, 0.35, 0.10, 0.08, 0.04, 0.18},
                          {0.15, 0.30, 0.12, 0.10, 0.05, 0.28},
                          {0.10, 0.20, 0.15, 0.12, 0.05, 0.38},
                          {0.08, 0.15, 0.10, 0.12, 0.05, 0.50},
                          {0.08, 0.15, 0.10, 0.12, 0.05, 0.50},
                          {0.20, 0.25, 0.10, 0.10, 0.05, 0.30}}},
                        std::nullopt};
    return {browser, researcher, buyer};
}

std::vector<BrowserSpec> SynthConfig::default_browsers() {
    return {{"Chrome", 0.55, 120.0}, {"Safari", 0.25, 200.0}, {"Firefox", 0.12, 90.0}, {"Edge", 0.08, 150.0}};
}

std::vector<DeviceSpec> SynthConfig::default_devices() {
    return {{"(not set)", DeviceCategory::Desktop, 0.50, 1.2},
            {"Apple iPhone", DeviceCategory::Mobile, 0.25, 0.8},
            {"Samsung SM-G960F", DeviceCategory::Mobile, 0.15, 0.7},
            {"Apple iPad", DeviceCategory::Tablet, 0.10, 0.9}};
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

bool is_distribution(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) return false;
        sum += v;
    }
    return std::fabs(sum - 1.0) <= 1e-9;
}

} // namespace

void SynthConfig::validate() const {
    require(n_users >= 1, "n_users must be at least 1");
    double mix = 0.0;
    for (std::size_t a = 0; a < kNumArchetypes; ++a) {
        const auto& spec = archetypes[a];
        const std::string name(archetype_name(static_cast<Archetype>(a)));
        require(std::isfinite(spec.weight) && spec.weight >= 0.0, "archetype weight for " + name + " is negative");
        mix += spec.weight;
        for (std::size_t r = 0; r < 6; ++r) {
            require(is_distribution(spec.transitions[r]),
                    "transition row " + std::to_string(r) + " of " + name + " does not sum to 1");
        }
        if (spec.initial) require(is_distribution(*spec.initial), "initial distribution of " + name + " does not sum to 1");
    }
    require(std::fabs(mix - 1.0) <= 1e-9, "archetype mix does not sum to 1");
    require(sessions_per_user_mean >= 1.0, "sessions_per_user_mean must be >= 1");
    require(hits_per_session_mean >= 1.0, "hits_per_session_mean must be >= 1");
    require(transactions_mean >= 1.0, "transactions_mean must be >= 1");
    require(days_gap_mean >= 0.0, "days_gap_mean must be >= 0");
    require(revenue_sigma >= 0.0 && std::isfinite(revenue_sigma), "revenue_sigma must be finite and >= 0");
    require(!revenue_mu || std::isfinite(*revenue_mu), "revenue_mu must be finite");
    require(empty_user_rate >= 0.0 && empty_user_rate < 1.0, "empty_user_rate must lie in [0, 1)");
    require(!browsers.empty(), "browser catalog is empty");
    require(!devices.empty(), "device catalog is empty");
    double bw = 0.0;
    for (const auto& b : browsers) {
        require(!b.name.empty(), "browser name is empty");
        require(b.weight >= 0.0 && b.rpt > 0.0, "browser " + b.name + " needs weight >= 0 and rpt > 0");
        bw += b.weight;
    }
    require(bw > 0.0, "browser weights sum to 0");
    double dw = 0.0;
    for (const auto& d : devices) {
        require(!d.name.empty(), "device name is empty");
        require(d.weight >= 0.0 && d.revenue_multiplier > 0.0,
                "device " + d.name + " needs weight >= 0 and revenue_multiplier > 0");
        dw += d.weight;
    }
    require(dw > 0.0, "device weights sum to 0");
}

ClassDistribution stationary_distribution(const TransitionMatrix& m) {
    ClassDistribution p;
    p.fill(1.0 / 6.0);
    for (int iter = 0; iter < 10000; ++iter) {
        ClassDistribution next{};
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 6; ++j) next[j] += p[i] * m[i][j];
        }
        double delta = 0.0;
        for (std::size_t j = 0; j < 6; ++j) delta = std::max(delta, std::fabs(next[j] - p[j]));
        p = next;
        if (delta < 1e-15) break;
    }
    return p;
}

std::size_t SynthTruth::empty_users() const {
    return static_cast<std::size_t>(
        std::count_if(users.begin(), users.end(), [](const UserTruth& u) { return u.session_classes.empty(); }));
}

namespace {

constexpr std::int64_t kEpochMs = 1556668800000; // 2019-05-01T00:00:00Z
constexpr std::int64_t kDayMs = 86'400'000;

std::string hex8(std::uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string s(8, '0');
    for (int i = 7; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[x & 0xF];
        x >>= 4;
    }
    return s;
}

std::string pad(std::size_t v, std::size_t width) {
    std::string s = std::to_string(v);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

double cents(double v) { return std::round(v * 100.0) / 100.0; }

struct Catalogs {
    std::vector<double> browser_w;
    std::vector<double> device_w;
    std::vector<double> device_mult;
    std::vector<double> archetype_w;
    std::array<ClassDistribution, kNumArchetypes> initial;
};

Catalogs prepare(const SynthConfig& cfg) {
    Catalogs c;
    for (const auto& b : cfg.browsers) c.browser_w.push_back(b.weight);
    double wsum = 0.0, msum = 0.0;
    for (const auto& d : cfg.devices) {
        c.device_w.push_back(d.weight);
        wsum += d.weight;
        msum += d.weight * d.revenue_multiplier;
    }
    for (const auto& d : cfg.devices) c.device_mult.push_back(d.revenue_multiplier * wsum / msum);
    for (std::size_t a = 0; a < kNumArchetypes; ++a) {
        c.archetype_w.push_back(cfg.archetypes[a].weight);
        c.initial[a] = cfg.archetypes[a].initial.value_or(stationary_distribution(cfg.archetypes[a].transitions));
    }
    return c;
}

struct UserOutput {
    RawUserRow user;
    std::vector<RawSessionRow> sessions;
    std::vector<RawHitRow> hits;
    UserTruth truth;
};

UserOutput generate_user(const SynthConfig& cfg, const Catalogs& cat, std::size_t index) {
    Rng rng(derive_seed(cfg.seed, index));
    UserOutput out;
    const auto archetype = static_cast<Archetype>(rng.categorical(cat.archetype_w));
    const auto bi = rng.categorical(cat.browser_w);
    const auto di = rng.categorical(cat.device_w);
    const auto& browser = cfg.browsers[bi];
    const auto& device = cfg.devices[di];

    out.user.client_id = "u" + pad(index, 6) + "." + std::to_string(100000000 + rng.below(900000000));
    out.user.device_category = device.category;
    out.user.browser_name = browser.name;
    out.user.device_name = device.name;
    out.truth.client_id = out.user.client_id;
    out.truth.archetype = archetype;

    if (rng.bernoulli(cfg.empty_user_rate)) return out;

    const auto n_sessions = rng.geometric_at_least_one(cfg.sessions_per_user_mean);
    out.user.user_type = n_sessions > 1 ? UserType::Returning : UserType::New;
    const auto& spec = cfg.archetypes[static_cast<std::size_t>(archetype)];
    const double mu = cfg.revenue_mu.value_or(-0.5 * cfg.revenue_sigma * cfg.revenue_sigma);
    const double rpt = browser.rpt * cat.device_mult[di];

    std::int64_t ts = kEpochMs + static_cast<std::int64_t>(rng.below(30 * kDayMs));
    int cls = static_cast<int>(rng.categorical(cat.initial[static_cast<std::size_t>(archetype)]));
    for (std::uint64_t s = 0; s < n_sessions; ++s) {
        std::int64_t days = 0;
        if (s > 0) {
            cls = static_cast<int>(rng.categorical(spec.transitions[static_cast<std::size_t>(cls)]));
            days = static_cast<std::int64_t>(rng.geometric(1.0 / (1.0 + cfg.days_gap_mean)));
            ts += days * kDayMs + 60'000 + static_cast<std::int64_t>(rng.below(kDayMs));
        }

        RawSessionRow row;
        row.client_id = out.user.client_id;
        row.session_id = hex8(rng.next_u64()) + "-" + std::to_string(index) + "-" + std::to_string(s) + "." +
                         std::to_string(ts);
        row.days_since_last_session = days;
        row.shopping_stages = stages_for_class(cls);

        const double hit_mean = cfg.hits_per_session_mean * (1.0 + 0.3 * cls);
        const auto n_hits = rng.geometric_at_least_one(hit_mean);
        int minute = static_cast<int>((ts / 60'000) % 1440);
        double duration = 0.0;
        for (std::uint64_t h = 0; h < n_hits; ++h) {
            RawHitRow hit;
            hit.client_id = row.client_id;
            hit.session_id = row.session_id;
            hit.minute_of_day = std::min(minute, 1439);
            hit.time_on_page_s = h + 1 == n_hits ? 0.0 : std::round(rng.lognormal(std::log(30.0 + 8.0 * cls), 0.6));
            // The first hit of a funnel session always lands on a detail page.
            hit.product_detail_view = cls >= 1 && (h == 0 || rng.bernoulli(0.4));
            duration += hit.time_on_page_s;
            minute += static_cast<int>(hit.time_on_page_s / 60.0);
            out.hits.push_back(std::move(hit));
        }
        row.duration_s = duration;
        row.unique_pageviews = static_cast<std::int64_t>(n_hits);

        if (cls == 5) {
            row.transactions = static_cast<std::int64_t>(rng.geometric_at_least_one(cfg.transactions_mean));
            row.unique_purchases = row.transactions + static_cast<std::int64_t>(rng.geometric(0.5));
            double revenue = 0.0;
            for (std::int64_t t = 0; t < row.transactions; ++t) revenue += rpt * rng.lognormal(mu, cfg.revenue_sigma);
            row.revenue = cents(revenue);
        }

        row.site_search_used = rng.bernoulli(0.15 + 0.1 * std::min(cls, 3));
        if (row.site_search_used) {
            row.results_pageviews = static_cast<std::int64_t>(rng.geometric_at_least_one(2.0));
            row.total_unique_searches = static_cast<std::int64_t>(rng.geometric_at_least_one(1.3));
            row.search_depth = row.results_pageviews + static_cast<std::int64_t>(rng.geometric(0.5));
            row.search_refinements = static_cast<std::int64_t>(rng.geometric(0.7));
        }

        out.truth.session_ids.push_back(row.session_id);
        out.truth.session_classes.push_back(cls);
        out.sessions.push_back(std::move(row));
    }
    return out;
}

} // namespace

SynthCorpus generate(const SynthConfig& config) {
    config.validate();
    const auto cat = prepare(config);
    SynthCorpus corpus;
    for (std::size_t i = 0; i < config.n_users; ++i) {
        auto u = generate_user(config, cat, i);
        corpus.users.push_back(std::move(u.user));
        std::move(u.sessions.begin(), u.sessions.end(), std::back_inserter(corpus.sessions));
        std::move(u.hits.begin(), u.hits.end(), std::back_inserter(corpus.hits));
        corpus.truth.users.push_back(std::move(u.truth));
    }
    for (const auto& b : config.browsers) corpus.truth.planted_browser_rpt[b.name] = b.rpt;
    for (std::size_t d = 0; d < config.devices.size(); ++d) {
        corpus.truth.device_multiplier[config.devices[d].name] = cat.device_mult[d];
    }
    return corpus;
}

void write_truth_csv(std::ostream& out, const SynthTruth& truth) {
    out << "client_id,archetype,session_classes\n";
    for (const auto& u : truth.users) {
        std::string classes;
        for (std::size_t i = 0; i < u.session_classes.size(); ++i) {
            if (i) classes += '|';
            classes += std::to_string(u.session_classes[i]);
        }
        const std::string fields[] = {u.client_id, std::string(archetype_name(u.archetype)), classes};
        out << csv::join_row(fields) << '\n';
    }
}

SynthTruth parse_truth_csv(std::istream& in) {
    std::string line;
    if (!csv::read_line(in, line) || line != "client_id,archetype,session_classes")
        throw Error(ErrorCode::MalformedHeader, "truth header must be client_id,archetype,session_classes");
    SynthTruth truth;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = csv::split_line(line);
        if (f.size() != 3) throw BadValueError(line_no, "client_id", "expected 3 fields");
        UserTruth u;
        u.client_id = f[0];
        const auto a = parse_archetype(f[1]);
        if (!a) throw BadValueError(line_no, "archetype", "unknown archetype '" + f[1] + "'");
        u.archetype = *a;
        std::istringstream classes(f[2]);
        std::string tok;
        while (std::getline(classes, tok, '|')) {
            const auto c = csv::parse_int(tok);
            if (!c || *c < 0 || *c > 5) throw BadValueError(line_no, "session_classes", "bad class '" + tok + "'");
            u.session_classes.push_back(static_cast<int>(*c));
        }
        truth.users.push_back(std::move(u));
    }
    return truth;
}

void write_planted_csv(std::ostream& out, const SynthTruth& truth) {
    out << "kind,name,value\n";
    for (const auto& [name, rpt] : truth.planted_browser_rpt) {
        const std::string fields[] = {"browser_rpt", name, csv::format_double(rpt)};
        out << csv::join_row(fields) << '\n';
    }
    for (const auto& [name, mult] : truth.device_multiplier) {
        const std::string fields[] = {"device_multiplier", name, csv::format_double(mult)};
        out << csv::join_row(fields) << '\n';
    }
}

std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus,
                                                bool json_reports) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const char* name, auto&& writer) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
        writer(out);
        if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
        written.push_back(path);
    };
    emit(kUsersFile, [&](std::ostream& o) { write_users_csv(o, corpus.users); });
    emit(kSessionsFile, [&](std::ostream& o) { write_sessions_csv(o, corpus.sessions); });
    emit(kHitsFile, [&](std::ostream& o) { write_hits_csv(o, corpus.hits); });
    emit(kTruthFile, [&](std::ostream& o) { write_truth_csv(o, corpus.truth); });
    emit(kPlantedFile, [&](std::ostream& o) { write_planted_csv(o, corpus.truth); });
    if (json_reports) {
        emit("users.json", [&](std::ostream& o) { write_users_report(o, corpus.users); });
        emit("sessions.json", [&](std::ostream& o) { write_sessions_report(o, corpus.sessions); });
        emit("hits.json", [&](std::ostream& o) { write_hits_report(o, corpus.hits); });
    }
    return written;
}

} // namespace shopstage
