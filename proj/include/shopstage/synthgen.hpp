// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shopstage/ingest.hpp"

namespace shopstage {

enum class Archetype { Browser, Researcher, Buyer };

inline constexpr std::size_t kNumArchetypes = 3;

std::string_view archetype_name(Archetype a);
std::optional<Archetype> parse_archetype(std::string_view name);

/// Row-stochastic matrix over class ids: transitions[from][to].
using TransitionMatrix = std::array<std::array<double, 6>, 6>;
using ClassDistribution = std::array<double, 6>;

struct BrowserSpec {
    std::string name;
    double weight = 1.0;
    /// Planted revenue per transaction.
    double rpt = 100.0;
};

struct DeviceSpec {
    std::string name;
    DeviceCategory category = DeviceCategory::Desktop;
    double weight = 1.0;
    /// Rescaled so the weighted mean over the catalog is 1.
    double revenue_multiplier = 1.0;
};

struct ArchetypeSpec {
    double weight = 1.0;
    TransitionMatrix transitions{};
    /// Class distribution of the first session; stationary when unset.
    std::optional<ClassDistribution> initial;
};

struct SynthConfig {
    std::size_t n_users = 1000;
    std::array<ArchetypeSpec, kNumArchetypes> archetypes = default_archetypes();
    double sessions_per_user_mean = 4.0;
    double hits_per_session_mean = 5.0;
    std::vector<BrowserSpec> browsers = default_browsers();
    std::vector<DeviceSpec> devices = default_devices();
    double transactions_mean = 1.15;
    double revenue_sigma = 0.25;
    /// Lognormal location of the per-transaction noise; -sigma^2/2 when unset.
    std::optional<double> revenue_mu;
    double empty_user_rate = 0.0;
    double days_gap_mean = 3.0;
    std::uint64_t seed = 1;

    /// Throws InvalidConfig.
    void validate() const;

    static std::array<ArchetypeSpec, kNumArchetypes> default_archetypes();
    static std::vector<BrowserSpec> default_browsers();
    static std::vector<DeviceSpec> default_devices();
};

/// Power iteration from uniform; converges for the aperiodic chains used here.
ClassDistribution stationary_distribution(const TransitionMatrix& m);

struct UserTruth {
    std::string client_id;
    Archetype archetype = Archetype::Browser;
    std::vector<std::string> session_ids;
    std::vector<int> session_classes;
};

struct SynthTruth {
    std::vector<UserTruth> users;
    std::map<std::string, double> planted_browser_rpt;
    std::map<std::string, double> device_multiplier;

    std::size_t empty_users() const;
};

struct SynthCorpus {
    std::vector<RawUserRow> users;
    std::vector<RawSessionRow> sessions;
    std::vector<RawHitRow> hits;
    SynthTruth truth;
};

SynthCorpus generate(const SynthConfig& config);

inline constexpr const char* kUsersFile = "users.csv";
inline constexpr const char* kSessionsFile = "sessions.csv";
inline constexpr const char* kHitsFile = "hits.csv";
inline constexpr const char* kTruthFile = "truth.csv";
inline constexpr const char* kPlantedFile = "planted_rpt.csv";

void write_truth_csv(std::ostream& out, const SynthTruth& truth);
SynthTruth parse_truth_csv(std::istream& in);
void write_planted_csv(std::ostream& out, const SynthTruth& truth);

/// Writes the three tables, truth.csv and planted_rpt.csv into dir. With
/// json_reports the tables are also written as users.json, sessions.json and
/// hits.json. Returns the written paths in write order.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus,
                                                bool json_reports = false);

} // namespace shopstage
