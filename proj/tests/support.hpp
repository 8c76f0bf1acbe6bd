// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "shopstage/features.hpp"
#include "shopstage/ingest.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(fs::temp_directory_path() / ("shopstage_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Session of the given class with n_hits hits; timestamps follow `index`.
inline shopstage::SessionRecord make_session(const std::string& client, int index, int class_id, int n_hits,
                                             double revenue = 0.0) {
    shopstage::SessionRecord rec;
    auto& s = rec.session;
    s.client_id = client;
    s.session_id = "tok" + std::to_string(index) + "." + std::to_string(1556668800000LL + index * 3600000LL);
    s.duration_s = 30.0 * n_hits;
    s.unique_pageviews = n_hits;
    s.shopping_stages = shopstage::stages_for_class(class_id);
    if (class_id == 5) {
        s.transactions = 1;
        s.unique_purchases = 1;
        s.revenue = revenue;
    }
    for (int h = 0; h < n_hits; ++h) {
        shopstage::RawHitRow hit;
        hit.client_id = client;
        hit.session_id = s.session_id;
        hit.minute_of_day = (600 + 10 * index + h) % 1440;
        hit.time_on_page_s = 20.0 + h;
        hit.product_detail_view = class_id >= 1 && h == 0;
        rec.hits.push_back(hit);
    }
    return rec;
}

inline shopstage::Journey make_journey(const std::string& client, const std::vector<int>& classes, int n_hits = 2,
                                       const std::string& browser = "Chrome") {
    shopstage::Journey j;
    j.user.client_id = client;
    j.user.browser_name = browser;
    j.user.device_name = "(not set)";
    for (std::size_t i = 0; i < classes.size(); ++i) {
        j.sessions.push_back(make_session(client, static_cast<int>(i), classes[i], n_hits, 100.0));
    }
    return j;
}

} // namespace testing
