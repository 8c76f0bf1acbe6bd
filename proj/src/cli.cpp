// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shopstage/checksum.hpp"
#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/features.hpp"
#include "shopstage/params_io.hpp"
#include "shopstage/rng.hpp"
#include "shopstage/targeting.hpp"

namespace shopstage {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelBin = "model.bin";
constexpr const char* kModelManifest = "model.manifest.txt";
constexpr const char* kPipelineFile = "pipeline.json";
constexpr const char* kTrainConfigFile = "train_config.json";
constexpr const char* kSplitFile = "split.csv";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kCurvesFile = "profit_curves.csv";
constexpr const char* kTableFile = "targeting_table.txt";
constexpr const char* kBootstrapFile = "bootstrap.txt";

const char* const kCommands[] = {"synth", "ingest", "stats", "label", "train", "eval", "target", "report"};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Files

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    return in;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Output directory that records a checksum for everything written into it.
class RunOutput {
public:
    explicit RunOutput(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
    }

    const fs::path& dir() const { return dir_; }

    void write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
        artifacts_[name] = "fnv1a64:" + hex64(fnv1a64(content));
    }

    void finish(const std::string& command, const json& config, std::uint64_t seed) {
        json m;
        m["command"] = command;
        m["config"] = config;
        m["seed"] = seed;
        m["artifacts"] = artifacts_;
        m["created_at"] = utc_now();
        m["tool"] = "shopstage";
        const auto path = dir_ / kManifestFile;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << m.dump(2) << '\n';
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }

private:
    fs::path dir_;
    std::map<std::string, std::string> artifacts_;
};

// ---------------------------------------------------------------------------
// Enum spellings

AttributionModel parse_attribution(const std::string& s) {
    if (s == "linear") return AttributionModel::Linear;
    if (s == "timedecay") return AttributionModel::TimeDecay;
    throw Error(ErrorCode::InvalidConfig, "attribution must be linear or timedecay, got '" + s + "'");
}

NormMethod parse_norm(const std::string& s) {
    if (s == "minmax") return NormMethod::MinMax;
    if (s == "standard") return NormMethod::Standardize;
    throw Error(ErrorCode::InvalidConfig, "norm must be minmax or standard, got '" + s + "'");
}

DeviceCategory parse_category(const std::string& s) {
    for (auto c : {DeviceCategory::Desktop, DeviceCategory::Mobile, DeviceCategory::Tablet}) {
        if (device_category_name(c) == s) return c;
    }
    throw Error(ErrorCode::InvalidConfig, "device category must be desktop, mobile or tablet, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Config JSON

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) dst = it->get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
}

json synth_to_json(const SynthConfig& s) {
    json archetypes = json::object();
    for (std::size_t a = 0; a < kNumArchetypes; ++a) {
        const auto& spec = s.archetypes[a];
        json entry{{"weight", spec.weight}, {"transitions", spec.transitions}};
        entry["initial"] = spec.initial ? json(*spec.initial) : json(nullptr);
        archetypes[std::string(archetype_name(static_cast<Archetype>(a)))] = entry;
    }
    json browsers = json::array();
    for (const auto& b : s.browsers) browsers.push_back({{"name", b.name}, {"weight", b.weight}, {"rpt", b.rpt}});
    json devices = json::array();
    for (const auto& d : s.devices) {
        devices.push_back({{"name", d.name},
                           {"category", std::string(device_category_name(d.category))},
                           {"weight", d.weight},
                           {"revenue_multiplier", d.revenue_multiplier}});
    }
    return {{"n_users", s.n_users},
            {"archetypes", archetypes},
            {"sessions_per_user_mean", s.sessions_per_user_mean},
            {"hits_per_session_mean", s.hits_per_session_mean},
            {"browsers", browsers},
            {"devices", devices},
            {"transactions_mean", s.transactions_mean},
            {"revenue_sigma", s.revenue_sigma},
            {"revenue_mu", s.revenue_mu ? json(*s.revenue_mu) : json(nullptr)},
            {"empty_user_rate", s.empty_user_rate},
            {"days_gap_mean", s.days_gap_mean}};
}

void synth_from_json(const json& j, SynthConfig& s) {
    check_keys(j,
               {"n_users", "archetypes", "sessions_per_user_mean", "hits_per_session_mean", "browsers", "devices",
                "transactions_mean", "revenue_sigma", "revenue_mu", "empty_user_rate", "days_gap_mean"},
               "synth");
    take(j, "n_users", s.n_users);
    take(j, "sessions_per_user_mean", s.sessions_per_user_mean);
    take(j, "hits_per_session_mean", s.hits_per_session_mean);
    take(j, "transactions_mean", s.transactions_mean);
    take(j, "revenue_sigma", s.revenue_sigma);
    take(j, "empty_user_rate", s.empty_user_rate);
    take(j, "days_gap_mean", s.days_gap_mean);
    if (auto it = j.find("revenue_mu"); it != j.end())
        s.revenue_mu = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
    if (auto it = j.find("archetypes"); it != j.end()) {
        check_keys(*it, {"browser", "researcher", "buyer"}, "synth.archetypes");
        // Listing any archetype replaces the whole mix; omitted ones get weight 0.
        for (auto& spec : s.archetypes) spec.weight = 0.0;
        for (const auto& [name, entry] : it->items()) {
            auto& spec = s.archetypes[static_cast<std::size_t>(*parse_archetype(name))];
            check_keys(entry, {"weight", "transitions", "initial"}, "synth.archetypes." + name);
            take(entry, "weight", spec.weight);
            take(entry, "transitions", spec.transitions);
            if (auto init = entry.find("initial"); init != entry.end())
                spec.initial = init->is_null() ? std::nullopt : std::optional<ClassDistribution>(init->get<ClassDistribution>());
        }
    }
    if (auto it = j.find("browsers"); it != j.end()) {
        s.browsers.clear();
        for (const auto& b : *it) {
            check_keys(b, {"name", "weight", "rpt"}, "synth.browsers[]");
            BrowserSpec spec;
            take(b, "name", spec.name);
            take(b, "weight", spec.weight);
            take(b, "rpt", spec.rpt);
            s.browsers.push_back(spec);
        }
    }
    if (auto it = j.find("devices"); it != j.end()) {
        s.devices.clear();
        for (const auto& d : *it) {
            check_keys(d, {"name", "category", "weight", "revenue_multiplier"}, "synth.devices[]");
            DeviceSpec spec;
            take(d, "name", spec.name);
            std::string category = "desktop";
            take(d, "category", category);
            spec.category = parse_category(category);
            take(d, "weight", spec.weight);
            take(d, "revenue_multiplier", spec.revenue_multiplier);
            s.devices.push_back(spec);
        }
    }
}

json train_to_json(const TrainConfig& t, double val_fraction) {
    return {{"attribution", std::string(attribution_name(t.attribution))},
            {"norm", std::string(norm_method_name(t.normalization))},
            {"epochs", t.epochs},
            {"lr", t.learning_rate},
            {"batch", t.batch_size},
            {"seed", t.seed},
            {"clip_norm", t.clip_norm ? json(*t.clip_norm) : json(nullptr)},
            {"half_life_base", t.half_life_base},
            {"hidden", t.model.hidden},
            {"fc_hidden", t.model.fc_hidden},
            {"val_fraction", val_fraction}};
}

json config_to_json(const RunConfig& c) {
    json j = train_to_json(c.train, c.val_fraction);
    j["data"] = c.data;
    j["out"] = c.out;
    j["model"] = c.models;
    j["seed"] = c.seed;
    j["threads"] = c.train.threads;
    j["trials"] = c.trials;
    j["method"] = c.method;
    j["json_reports"] = c.json_reports;
    j["bootstrap_resamples"] = c.bootstrap_resamples;
    j["synth"] = synth_to_json(c.synth);
    return j;
}

void config_from_json(const json& j, RunConfig& c) {
    check_keys(j,
               {"data", "out", "model", "seed", "attribution", "norm", "epochs", "lr", "batch", "trials", "threads",
                "users", "val_fraction", "method", "clip_norm", "half_life_base", "hidden", "fc_hidden",
                "json_reports", "bootstrap_resamples", "synth"},
               "config");
    take(j, "data", c.data);
    take(j, "out", c.out);
    if (auto it = j.find("model"); it != j.end()) {
        c.models = it->is_string() ? std::vector<std::string>{it->get<std::string>()}
                                   : it->get<std::vector<std::string>>();
    }
    take(j, "seed", c.seed);
    if (auto it = j.find("attribution"); it != j.end()) c.train.attribution = parse_attribution(it->get<std::string>());
    if (auto it = j.find("norm"); it != j.end()) c.train.normalization = parse_norm(it->get<std::string>());
    take(j, "epochs", c.train.epochs);
    take(j, "lr", c.train.learning_rate);
    take(j, "batch", c.train.batch_size);
    take(j, "threads", c.train.threads);
    take(j, "half_life_base", c.train.half_life_base);
    take(j, "hidden", c.train.model.hidden);
    take(j, "fc_hidden", c.train.model.fc_hidden);
    if (auto it = j.find("clip_norm"); it != j.end())
        c.train.clip_norm = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
    take(j, "trials", c.trials);
    take(j, "users", c.synth.n_users);
    take(j, "val_fraction", c.val_fraction);
    take(j, "method", c.method);
    take(j, "json_reports", c.json_reports);
    take(j, "bootstrap_resamples", c.bootstrap_resamples);
    if (auto it = j.find("synth"); it != j.end()) synth_from_json(*it, c.synth);
}

// ---------------------------------------------------------------------------
// Pipeline persistence

json affine_to_json(const AffineStats& a) { return {{"offset", a.offset}, {"scale", a.scale}}; }

AffineStats affine_from_json(const json& j) {
    return {j.at("offset").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

std::string pipeline_to_json(const FeaturePipeline& p) {
    const auto& n = p.normalizer;
    json j{{"rpt",
            {{"browser", p.rpt.browser_rpt},
             {"device", p.rpt.device_rpt},
             {"global_browser", p.rpt.global_browser_rpt},
             {"global_device", p.rpt.global_device_rpt},
             {"zero_transactions_globally", p.rpt.zero_transactions_globally}}},
           {"normalizer",
            {{"method", std::string(norm_method_name(n.method()))},
             {"user", affine_to_json(n.user())},
             {"session", affine_to_json(n.session())},
             {"hit", affine_to_json(n.hit())}}}};
    return j.dump(2) + "\n";
}

FeaturePipeline pipeline_from_json(const json& j) {
    FeaturePipeline p;
    const auto& r = j.at("rpt");
    p.rpt.browser_rpt = r.at("browser").get<std::map<std::string, double>>();
    p.rpt.device_rpt = r.at("device").get<std::map<std::string, double>>();
    p.rpt.global_browser_rpt = r.at("global_browser").get<double>();
    p.rpt.global_device_rpt = r.at("global_device").get<double>();
    p.rpt.zero_transactions_globally = r.at("zero_transactions_globally").get<bool>();
    const auto& n = j.at("normalizer");
    p.normalizer = Normalizer(parse_norm(n.at("method").get<std::string>()), affine_from_json(n.at("user")),
                              affine_from_json(n.at("session")), affine_from_json(n.at("hit")));
    return p;
}

struct LoadedModel {
    fs::path dir;
    TrainConfig train;
    double val_fraction = 0.2;
    FeaturePipeline pipeline;
    ModelParams params;
    std::vector<std::string> val_ids;
};

bool is_model_dir(const fs::path& dir) { return fs::is_regular_file(dir / kModelBin); }

LoadedModel load_model(const fs::path& dir) {
    LoadedModel m;
    m.dir = dir;
    try {
        const auto cfg = json::parse(read_file(dir / kTrainConfigFile));
        RunConfig rc;
        config_from_json(cfg, rc);
        m.train = rc.train;
        m.val_fraction = rc.val_fraction;
        m.pipeline = pipeline_from_json(json::parse(read_file(dir / kPipelineFile)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadFormat, "model directory " + dir.string() + ": " + e.what());
    }
    m.params = deserialize_params(read_file(dir / kModelBin));
    auto in = open_in(dir / kSplitFile);
    std::string line;
    if (!csv::read_line(in, line) || line != "client_id")
        throw Error(ErrorCode::MalformedHeader, (dir / kSplitFile).string() + ": header must be client_id");
    while (csv::read_line(in, line)) {
        if (!line.empty()) m.val_ids.push_back(csv::split_line(line).at(0));
    }
    return m;
}

/// A path naming a model directory is used as is; otherwise its immediate
/// subdirectories holding a model are taken in name order.
std::vector<fs::path> expand_models(const std::vector<std::string>& args) {
    std::vector<fs::path> out;
    for (const auto& a : args) {
        const fs::path p(a);
        if (is_model_dir(p)) {
            out.push_back(p);
            continue;
        }
        if (!fs::is_directory(p)) throw Error(ErrorCode::IoError, "model path " + a + " is not a directory");
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(p)) {
            if (e.is_directory() && is_model_dir(e.path())) found.push_back(e.path());
        }
        if (found.empty()) throw Error(ErrorCode::IoError, "no model found under " + a);
        std::sort(found.begin(), found.end());
        out.insert(out.end(), found.begin(), found.end());
    }
    return out;
}

std::vector<Journey> select_users(const std::vector<Journey>& journeys, const std::vector<std::string>& ids) {
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<Journey> out;
    for (const auto& j : journeys) {
        if (wanted.erase(j.user.client_id)) out.push_back(j);
    }
    if (!wanted.empty())
        throw Error(ErrorCode::InvalidConfig, "validation user " + *wanted.begin() + " is missing from the data");
    return out;
}

std::string fixed(double v, int decimals = 6) { return csv::format_fixed(v, decimals); }

// ---------------------------------------------------------------------------
// Subcommands

void require_path(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

void cmd_synth(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    cfg.synth.seed = cfg.seed;
    const auto corpus = generate(cfg.synth);
    auto text = [](auto writer) {
        std::ostringstream s;
        writer(s);
        return s.str();
    };
    out.write(kUsersFile, text([&](std::ostream& o) { write_users_csv(o, corpus.users); }));
    out.write(kSessionsFile, text([&](std::ostream& o) { write_sessions_csv(o, corpus.sessions); }));
    out.write(kHitsFile, text([&](std::ostream& o) { write_hits_csv(o, corpus.hits); }));
    out.write(kTruthFile, text([&](std::ostream& o) { write_truth_csv(o, corpus.truth); }));
    out.write(kPlantedFile, text([&](std::ostream& o) { write_planted_csv(o, corpus.truth); }));
    if (cfg.json_reports) {
        out.write("users.json", text([&](std::ostream& o) { write_users_report(o, corpus.users); }));
        out.write("sessions.json", text([&](std::ostream& o) { write_sessions_report(o, corpus.sessions); }));
        out.write("hits.json", text([&](std::ostream& o) { write_hits_report(o, corpus.hits); }));
    }
    log << "synth: " << corpus.users.size() << " users, " << corpus.sessions.size() << " sessions, "
        << corpus.hits.size() << " hits -> " << out.dir().string() << '\n';
}

std::string format_drops(const JoinResult& r) {
    std::ostringstream s;
    s << "journeys: " << r.journeys.size() << '\n';
    std::size_t sessions = 0;
    for (const auto& j : r.journeys) sessions += j.sessions.size();
    s << "sessions: " << sessions << '\n';
    s << "hits: " << total_hits(r.journeys) << '\n';
    s << "duplicate_users: " << r.drops.duplicate_users << '\n';
    s << "sessions_without_hits: " << r.drops.sessions_without_hits << '\n';
    s << "sessions_without_user: " << r.drops.sessions_without_user << '\n';
    s << "orphan_hits: " << r.drops.orphan_hits << '\n';
    s << "users_without_sessions: " << r.drops.users_without_sessions << '\n';
    return s.str();
}

void cmd_ingest(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    const auto joined = load_corpus(cfg.data);
    std::vector<RawUserRow> users;
    std::vector<RawSessionRow> sessions;
    std::vector<RawHitRow> hits;
    for (const auto& j : joined.journeys) {
        users.push_back(j.user);
        for (const auto& s : j.sessions) {
            sessions.push_back(s.session);
            hits.insert(hits.end(), s.hits.begin(), s.hits.end());
        }
    }
    std::ostringstream u, se, h;
    write_users_csv(u, users);
    write_sessions_csv(se, sessions);
    write_hits_csv(h, hits);
    out.write(kUsersFile, u.str());
    out.write(kSessionsFile, se.str());
    out.write(kHitsFile, h.str());
    const auto drops = format_drops(joined);
    out.write("drops.txt", drops);
    log << drops;
}

std::string category_csv(const std::vector<CategoryRow>& rows) {
    std::ostringstream s;
    s << "name,users,transactions,total_revenue,revenue_per_transaction\n";
    for (const auto& r : rows) {
        const std::string fields[] = {r.name, std::to_string(r.users), std::to_string(r.transactions),
                                      csv::format_double(r.total_revenue),
                                      csv::format_double(r.revenue_per_transaction)};
        s << csv::join_row(fields) << '\n';
    }
    return s.str();
}

void cmd_stats(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    const auto joined = load_corpus(cfg.data);
    const auto hist = category_histograms(joined.journeys);
    out.write("browsers.csv", category_csv(hist.browsers));
    out.write("devices.csv", category_csv(hist.devices));

    const auto rpt = compute_rpt_stats(joined.journeys);
    const auto columns = correlation_columns();
    const auto corr = pearson_correlation_matrix(correlation_rows(joined.journeys, rpt));
    std::ostringstream c;
    c << "feature," << csv::join_row(columns) << '\n';
    for (std::size_t i = 0; i < corr.size(); ++i) {
        c << csv::escape(columns[i]);
        for (double v : corr[i]) c << ',' << fixed(v);
        c << '\n';
    }
    out.write("correlation.csv", c.str());

    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& j : joined.journeys) {
        for (const auto& s : j.sessions) ++counts[static_cast<std::size_t>(map_shopping_stage(s.session.shopping_stages))];
    }
    std::ostringstream k;
    k << "class_id,sessions\n";
    for (std::size_t i = 0; i < kNumClasses; ++i) k << i << ',' << counts[i] << '\n';
    out.write("class_counts.csv", k.str());
    const auto summary = format_drops(joined);
    out.write("summary.txt", summary);
    log << summary;
}

void cmd_label(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    const auto joined = load_corpus(cfg.data);
    std::ostringstream s;
    s << "client_id,session_index,class_id";
    for (std::size_t c = 0; c < kNumClasses; ++c) s << ",label_" << c;
    s << '\n';
    std::size_t rows = 0;
    for (const auto& j : joined.journeys) {
        std::vector<int> classes;
        for (const auto& sess : j.sessions) classes.push_back(map_shopping_stage(sess.session.shopping_stages));
        const auto labels = build_labels(classes, cfg.train.attribution, cfg.train.half_life_base);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            s << csv::escape(j.user.client_id) << ',' << i << ',' << classes[i];
            for (double v : labels[i]) s << ',' << csv::format_double(v);
            s << '\n';
            ++rows;
        }
    }
    out.write("labels.csv", s.str());
    log << "label: " << rows << " session rows (" << attribution_name(cfg.train.attribution) << ")\n";
}

void cmd_train(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    cfg.train.seed = cfg.seed;
    cfg.train.validate();
    const auto joined = load_corpus(cfg.data);
    const auto split = split_by_user(joined.journeys, cfg.val_fraction, cfg.seed);
    const auto pipeline = FeaturePipeline::fit(split.train, cfg.train.normalization);
    const auto train_set = make_examples(split.train, pipeline, cfg.train.attribution, cfg.train.half_life_base);
    const auto val_set = make_examples(split.val, pipeline, cfg.train.attribution, cfg.train.half_life_base);
    const auto result = train(train_set, val_set, cfg.train);
    const auto report = evaluate(result.params, val_set, cfg.train.attribution);
    const double base = baseline_mse(prevalence_baseline(train_set), val_set);

    out.write(kModelBin, serialize_params(result.params));
    out.write(kModelManifest, params_manifest(result.params));
    out.write(kPipelineFile, pipeline_to_json(pipeline));
    out.write(kTrainConfigFile, train_to_json(cfg.train, cfg.val_fraction).dump(2) + "\n");

    std::ostringstream hist;
    hist << "epoch,train_mse,val_mse\n";
    for (const auto& e : result.history)
        hist << e.epoch << ',' << csv::format_double(e.train_mse) << ',' << csv::format_double(e.val_mse) << '\n';
    out.write("history.csv", hist.str());

    std::ostringstream split_csv;
    split_csv << "client_id\n";
    for (const auto& j : split.val) split_csv << csv::escape(j.user.client_id) << '\n';
    out.write(kSplitFile, split_csv.str());

    std::string eval = format_eval_report(report, cfg.train.attribution, cfg.train.normalization);
    eval += "baseline_mse: " + fixed(base, 8) + "\n";
    eval += "best_epoch: " + std::to_string(result.best_epoch) + "\n";
    eval += "train_users: " + std::to_string(split.train.size()) + "\n";
    out.write("eval.txt", eval);
    log << eval;
}

std::string grid_header() { return "attribution  normalization  loss        acc_0.5_2.0  acc_0.8_1.25  baseline_loss  model\n"; }

void cmd_eval(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    const auto dirs = expand_models(cfg.models);
    const auto joined = load_corpus(cfg.data);
    std::ostringstream grid;
    grid << grid_header();
    for (const auto& dir : dirs) {
        const auto m = load_model(dir);
        const auto val = select_users(joined.journeys, m.val_ids);
        const auto examples = make_examples(val, m.pipeline, m.train.attribution, m.train.half_life_base);
        const auto report = evaluate(m.params, examples, m.train.attribution);

        std::vector<Journey> train_users;
        const std::set<std::string> val_ids(m.val_ids.begin(), m.val_ids.end());
        for (const auto& j : joined.journeys) {
            if (!val_ids.count(j.user.client_id)) train_users.push_back(j);
        }
        const auto train_set =
            make_examples(train_users, m.pipeline, m.train.attribution, m.train.half_life_base);
        const double base = baseline_mse(prevalence_baseline(train_set), examples);

        auto cell = [](std::string s, std::size_t w) {
            s.resize(std::max(w, s.size()), ' ');
            return s;
        };
        grid << cell(std::string(attribution_name(m.train.attribution)), 13)
             << cell(std::string(norm_method_name(m.train.normalization)), 15) << cell(fixed(report.mse, 8), 12)
             << cell(fixed(report.acc_wide, 4), 13) << cell(fixed(report.acc_tight, 4), 14)
             << cell(fixed(base, 8), 15) << dir.filename().string() << '\n';
    }
    out.write("eval_grid.txt", grid.str());
    log << grid.str();
}

struct MethodRun {
    std::string name;
    Simulation sim;
    ProfitCurve curve;
};

std::vector<ScoringKind> parse_methods(const std::string& spec) {
    if (spec == "all")
        return {ScoringKind::Random, ScoringKind::Statistical, ScoringKind::ModelLinear, ScoringKind::ModelTimeDecay};
    std::vector<ScoringKind> out;
    std::istringstream s(spec);
    std::string tok;
    while (std::getline(s, tok, ',')) {
        if (tok == "random") out.push_back(ScoringKind::Random);
        else if (tok == "statistical") out.push_back(ScoringKind::Statistical);
        else if (tok == "linear") out.push_back(ScoringKind::ModelLinear);
        else if (tok == "timedecay") out.push_back(ScoringKind::ModelTimeDecay);
        else throw Error(ErrorCode::InvalidConfig, "unknown method '" + tok + "' (all, random, statistical, linear, timedecay)");
    }
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no targeting method given");
    return out;
}

void cmd_target(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    const auto kinds = parse_methods(cfg.method);
    std::vector<LoadedModel> models;
    for (const auto& dir : cfg.models.empty() ? std::vector<fs::path>{} : expand_models(cfg.models))
        models.push_back(load_model(dir));
    const auto joined = load_corpus(cfg.data);
    const auto population = models.empty() ? split_by_user(joined.journeys, cfg.val_fraction, cfg.seed).val
                                           : select_users(joined.journeys, models.front().val_ids);
    const auto truth = last_session_truth(population);
    const auto grid = log_cost_grid();
    const auto sim_seed = derive_seed(cfg.seed, 0x7A26);

    std::vector<MethodRun> runs;
    for (auto kind : kinds) {
        ScoringMethod method{kind, std::nullopt, std::nullopt, 0.05};
        if (kind == ScoringKind::ModelLinear || kind == ScoringKind::ModelTimeDecay) {
            const auto want = kind == ScoringKind::ModelLinear ? AttributionModel::Linear : AttributionModel::TimeDecay;
            auto it = std::find_if(models.begin(), models.end(),
                                   [&](const LoadedModel& m) { return m.train.attribution == want; });
            if (it == models.end()) {
                if (cfg.method == "all") continue;
                throw Error(ErrorCode::MissingParams,
                            "method " + std::string(scoring_kind_name(kind)) + " needs a " +
                                std::string(attribution_name(want)) + " model (--model)");
            }
            method.params = it->params;
            method.pipeline = it->pipeline;
        }
        const auto scores = score_users(method, population, derive_seed(cfg.seed, 0x5C0E, static_cast<std::uint64_t>(kind)));
        MethodRun run;
        run.name = std::string(scoring_kind_name(kind));
        run.sim = simulate_targeting(scores, truth.bought, truth.revenue, cfg.trials, sim_seed);
        run.curve = profit_curve(run.name, run.sim.trials, grid);
        runs.push_back(std::move(run));
    }

    std::vector<MethodResult> rows;
    std::vector<ProfitCurve> curves;
    std::ostringstream trials;
    trials << "method,trial,tp,fp,tp_revenue,breaking_point\n";
    for (const auto& r : runs) {
        rows.push_back({r.name, r.sim.outcome});
        curves.push_back(r.curve);
        for (std::size_t t = 0; t < r.sim.trials.size(); ++t) {
            const auto& tr = r.sim.trials[t];
            trials << csv::escape(r.name) << ',' << t << ',' << tr.tp << ',' << tr.fp << ','
                   << csv::format_double(tr.tp_revenue) << ',' << csv::format_double(tr.breaking_point) << '\n';
        }
    }
    const auto table = format_targeting_table(rows);
    out.write(kTableFile, table);
    out.write("trials.csv", trials.str());

    std::ostringstream boot;
    auto bps = [](const MethodRun& r) {
        std::vector<double> v;
        for (const auto& t : r.sim.trials) v.push_back(t.breaking_point);
        return v;
    };
    const auto random = std::find_if(runs.begin(), runs.end(), [](const MethodRun& r) { return r.name == "Random"; });
    if (random != runs.end()) {
        for (const auto& r : runs) {
            if (&r == &*random) continue;
            const double p = bootstrap_prob_greater(bps(r), bps(*random), cfg.bootstrap_resamples,
                                                    derive_seed(cfg.seed, 0xB007));
            boot << "P(mean bp " << r.name << " > mean bp Random) = " << fixed(p, 4) << " (" << cfg.bootstrap_resamples
                 << " resamples)\n";
        }
    }
    out.write(kBootstrapFile, boot.str());

    const auto plots = render_plots(curves);
    out.write(kCurvesFile, plots.table_csv);
    out.write("profit_linear.svg", plots.linear_svg);
    out.write("profit_log.svg", plots.log_svg);
    log << table << boot.str();
}

void cmd_report(RunConfig& cfg, RunOutput& out, std::ostream& log) {
    const fs::path src(cfg.data);
    const auto curves = parse_curve_table(read_file(src / kCurvesFile));
    const auto plots = render_plots(curves);
    out.write("profit_linear.svg", plots.linear_svg);
    out.write("profit_log.svg", plots.log_svg);

    std::ostringstream md;
    md << "# Targeting report\n\n";
    if (fs::exists(src / kTableFile)) md << "## Simulated campaigns\n\n```\n" << read_file(src / kTableFile) << "```\n\n";
    if (fs::exists(src / kBootstrapFile)) md << "## Bootstrap\n\n```\n" << read_file(src / kBootstrapFile) << "```\n\n";
    md << "## Profit curves\n\n";
    md << "| method | best cost | best mean profit | zero crossing |\n|---|---|---|---|\n";
    for (const auto& c : curves) {
        auto best = std::max_element(c.points.begin(), c.points.end(),
                                     [](const CurvePoint& a, const CurvePoint& b) { return a.mean_profit < b.mean_profit; });
        std::string crossing = "none";
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            const auto& a = c.points[i - 1];
            const auto& b = c.points[i];
            if (a.mean_profit > 0.0 && b.mean_profit <= 0.0) {
                const double x = a.cost + (b.cost - a.cost) * a.mean_profit / (a.mean_profit - b.mean_profit);
                crossing = fixed(x, 2);
                break;
            }
        }
        md << "| " << c.method << " | " << fixed(best->cost, 2) << " | " << fixed(best->mean_profit, 2) << " | "
           << crossing << " |\n";
    }
    md << "\n![linear](profit_linear.svg)\n\n![log](profit_log.svg)\n";
    out.write("report.md", md.str());
    log << md.str();
}

// ---------------------------------------------------------------------------
// Flags

struct Flags {
    std::string config;
    std::string data;
    std::string out;
    std::vector<std::string> models;
    std::uint64_t seed = 0;
    std::string attribution;
    std::string norm;
    int epochs = 0;
    double lr = 0.0;
    std::size_t batch = 0;
    std::size_t trials = 0;
    std::size_t threads = 0;
    std::size_t users = 0;
    double val_fraction = 0.0;
    std::string method;
    bool json_reports = false;
    std::map<std::string, CLI::Option*> opts;
};

void add_flags(CLI::App& sub, Flags& f) {
    auto& o = f.opts;
    o["config"] = sub.add_option("--config", f.config, "JSON config file; flags override its keys");
    o["data"] = sub.add_option("--data", f.data, "input directory");
    o["out"] = sub.add_option("--out", f.out, "output directory");
    o["model"] = sub.add_option("--model", f.models, "model directory or directory of models (repeatable)");
    o["seed"] = sub.add_option("--seed", f.seed, "master seed");
    o["attribution"] = sub.add_option("--attribution", f.attribution, "linear | timedecay")
                           ->check(CLI::IsMember({"linear", "timedecay"}));
    o["norm"] = sub.add_option("--norm", f.norm, "minmax | standard")->check(CLI::IsMember({"minmax", "standard"}));
    o["epochs"] = sub.add_option("--epochs", f.epochs, "training epochs")->check(CLI::PositiveNumber);
    o["lr"] = sub.add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    o["batch"] = sub.add_option("--batch", f.batch, "journeys per mini-batch")->check(CLI::PositiveNumber);
    o["trials"] = sub.add_option("--trials", f.trials, "targeting trials")->check(CLI::PositiveNumber);
    o["threads"] = sub.add_option("--threads", f.threads, "worker thread cap")->check(CLI::PositiveNumber);
    o["users"] = sub.add_option("--users", f.users, "synthetic users")->check(CLI::PositiveNumber);
    o["val_fraction"] = sub.add_option("--val-fraction", f.val_fraction, "validation share of users")
                            ->check(CLI::Range(0.0, 1.0));
    o["method"] = sub.add_option("--method", f.method, "all or a comma list of random,statistical,linear,timedecay");
    o["json_reports"] = sub.add_flag("--json-reports", f.json_reports, "also write reporting-API JSON tables");
}

bool given(const Flags& f, const char* name) { return f.opts.at(name)->count() > 0; }

RunConfig resolve(const std::string& command, const Flags& f) {
    RunConfig c;
    c.command = command;
    if (given(f, "config")) {
        try {
            config_from_json(json::parse(read_file(f.config)), c);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, f.config + ": " + e.what());
        }
    }
    if (given(f, "data")) c.data = f.data;
    if (given(f, "out")) c.out = f.out;
    if (given(f, "model")) c.models = f.models;
    if (given(f, "seed")) c.seed = f.seed;
    if (given(f, "attribution")) c.train.attribution = parse_attribution(f.attribution);
    if (given(f, "norm")) c.train.normalization = parse_norm(f.norm);
    if (given(f, "epochs")) c.train.epochs = f.epochs;
    if (given(f, "lr")) c.train.learning_rate = f.lr;
    if (given(f, "batch")) c.train.batch_size = f.batch;
    if (given(f, "trials")) c.trials = f.trials;
    if (given(f, "threads")) c.train.threads = f.threads;
    if (given(f, "users")) c.synth.n_users = f.users;
    if (given(f, "val_fraction")) c.val_fraction = f.val_fraction;
    if (given(f, "method")) c.method = f.method;
    if (given(f, "json_reports")) c.json_reports = f.json_reports;
    c.train.seed = c.seed;
    c.synth.seed = c.seed;

    if (c.out.empty()) {
        if ((command == "eval" || command == "target") && !c.models.empty())
            c.out = (fs::path(c.models.front()) / command).string();
        else if (command == "report" && !c.data.empty())
            c.out = (fs::path(c.data) / "report").string();
        else
            throw UsageError("missing required flag --out");
    }
    if (command != "synth") require_path(c.data, "--data");
    if (command == "eval" && c.models.empty()) throw UsageError("eval needs at least one --model");
    return c;
}

std::string usage() {
    return "usage: shopstage <command> [flags]\n"
           "commands:\n"
           "  synth   generate a synthetic corpus            (--users --seed --out)\n"
           "  ingest  parse, validate and join tables        (--data --out)\n"
           "  stats   category histograms and correlations   (--data --out)\n"
           "  label   attribution labels per session         (--data --out --attribution)\n"
           "  train   fit the hierarchical model             (--data --out --attribution --norm ...)\n"
           "  eval    loss and band accuracies per model     (--data --model [--model ...])\n"
           "  target  simulated targeting campaigns          (--data --model --method --trials)\n"
           "  report  re-render plots and summary            (--data <target dir>)\n"
           "run 'shopstage <command> --help' for the flags of one command\n";
}

bool is_internal(ErrorCode code) {
    return code == ErrorCode::StaleTrace || code == ErrorCode::ShapeMismatch || code == ErrorCode::NotFitted;
}

} // namespace

JoinResult load_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "data directory " + dir.string() + " does not exist");
    auto pick = [&](const char* csv_name, const char* json_name) -> std::pair<fs::path, bool> {
        if (fs::is_regular_file(dir / csv_name)) return {dir / csv_name, true};
        if (fs::is_regular_file(dir / json_name)) return {dir / json_name, false};
        throw Error(ErrorCode::IoError, "neither " + std::string(csv_name) + " nor " + json_name + " in " + dir.string());
    };
    const auto [users_path, users_csv] = pick(kUsersFile, "users.json");
    const auto [sessions_path, sessions_csv] = pick(kSessionsFile, "sessions.json");
    const auto [hits_path, hits_csv] = pick(kHitsFile, "hits.json");
    auto in_u = open_in(users_path);
    auto in_s = open_in(sessions_path);
    auto in_h = open_in(hits_path);
    auto users = users_csv ? parse_users_csv(in_u) : parse_users_report(in_u).rows;
    auto sessions = sessions_csv ? parse_sessions_csv(in_s) : parse_sessions_report(in_s).rows;
    auto hits = hits_csv ? parse_hits_csv(in_h) : parse_hits_report(in_h).rows;
    return join_journeys(std::move(users), std::move(sessions), std::move(hits));
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    if (argc < 2) {
        err << "error: no command given\n" << usage();
        return kExitUserError;
    }
    const std::string command = argv[1];
    if (command == "--help" || command == "-h" || command == "help") {
        out << usage();
        return kExitOk;
    }
    if (std::find(std::begin(kCommands), std::end(kCommands), command) == std::end(kCommands)) {
        err << "error: unknown command '" << command << "'\n" << usage();
        return kExitUserError;
    }

    CLI::App app{"shopstage " + command, "shopstage " + command};
    Flags flags;
    add_flags(app, flags);
    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i >= 2; --i) args.emplace_back(argv[i]);
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: bad flag: " << e.what() << '\n' << usage();
        return kExitUserError;
    }

    try {
        RunConfig cfg = resolve(command, flags);
        RunOutput output(cfg.out);
        if (command == "synth") cmd_synth(cfg, output, out);
        else if (command == "ingest") cmd_ingest(cfg, output, out);
        else if (command == "stats") cmd_stats(cfg, output, out);
        else if (command == "label") cmd_label(cfg, output, out);
        else if (command == "train") cmd_train(cfg, output, out);
        else if (command == "eval") cmd_eval(cfg, output, out);
        else if (command == "target") cmd_target(cfg, output, out);
        else cmd_report(cfg, output, out);
        output.finish(command, config_to_json(cfg), cfg.seed);
        return kExitOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n' << usage();
        return kExitUserError;
    } catch (const Error& e) {
        err << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
        return is_internal(e.code()) ? kExitInternalError : kExitUserError;
    } catch (const fs::filesystem_error& e) {
        err << "error [IoError]: " << e.what() << '\n';
        return kExitUserError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternalError;
    }
}

} // namespace shopstage
