// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shopstage/ingest.hpp"
#include "shopstage/synthgen.hpp"
#include "shopstage/training.hpp"

namespace shopstage {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

/// Everything a subcommand may read. Config-file keys mirror the flag names
/// (with '-' replaced by '_'); explicit flags win over the file.
struct RunConfig {
    std::string command;
    std::string data;
    std::string out;
    std::vector<std::string> models;
    std::uint64_t seed = 42;
    TrainConfig train;
    double val_fraction = 0.2;
    std::size_t trials = 200;
    std::string method = "all";
    SynthConfig synth;
    bool json_reports = false;
    std::size_t bootstrap_resamples = 10000;
};

/// Runs one subcommand: synth, ingest, stats, label, train, eval, target or
/// report. Returns 0 on success, 1 on a user error and 2 on an internal error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Reads users/sessions/hits from dir, preferring CSV over JSON reports, and
/// joins them.
JoinResult load_corpus(const std::filesystem::path& dir);

} // namespace shopstage
