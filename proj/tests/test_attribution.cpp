// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <doctest.h>
#include <random>

#include "shopstage/attribution.hpp"
#include "shopstage/error.hpp"

using namespace shopstage;

namespace {

std::vector<double> prefix_mean_oracle(const std::vector<double>& v) {
    std::vector<double> t;
    for (std::size_t n = 1; n <= v.size(); ++n) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += v[i];
        t.push_back(sum / static_cast<double>(n));
    }
    return t;
}

// Weights recomputed per prefix: w(i) = base^-(n - i).
std::vector<double> half_life_oracle(const std::vector<double>& v, double base = 2.0) {
    std::vector<double> t;
    for (std::size_t n = 1; n <= v.size(); ++n) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            const double w = std::pow(base, -static_cast<double>(n - i));
            num += w * v[i - 1];
            den += w;
        }
        t.push_back(num / den);
    }
    return t;
}

std::vector<int> random_classes(std::mt19937_64& gen, std::size_t n) {
    std::uniform_int_distribution<int> cls(0, 5);
    std::vector<int> out(n);
    for (auto& c : out) c = cls(gen);
    return out;
}

} // namespace

TEST_SUITE("attribution") {

TEST_CASE("linear prefix means of the worked example") {
    const std::vector<double> v{0, 1, 0, 0, 1};
    const auto t = linear_attribution(v);
    const double expected[] = {0.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0, 2.0 / 5.0};
    REQUIRE(t.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(t[i] - expected[i]) <= 1e-12);
}

TEST_CASE("linear on an all-zero column") {
    const std::vector<double> v{0, 0, 0};
    for (double x : linear_attribution(v)) CHECK(x == 0.0);
}

TEST_CASE("linear matches cumulative-sum oracle on random columns") {
    std::mt19937_64 gen(11);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + gen() % 8;
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(gen() % 2);
        CHECK(linear_attribution(v) == prefix_mean_oracle(v));
    }
}

TEST_CASE("time decay worked example, positions 1 to 4") {
    const std::vector<double> v{0, 1, 0, 0, 1};
    const auto t = time_decay_attribution(v);
    const double exact[] = {0.0, 2.0 / 3.0, 2.0 / 7.0, 2.0 / 15.0};
    const double printed[] = {0.0, 0.66, 0.28, 0.13};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::fabs(t[i] - exact[i]) <= 1e-12);
        // The printed values are two-decimal truncations.
        CHECK(std::floor(t[i] * 100.0) / 100.0 == doctest::Approx(printed[i]).epsilon(1e-12));
    }
    CHECK(t[4] == doctest::Approx(1.125 / 1.9375).epsilon(1e-12));
}

TEST_CASE("time decay shifted example rounds to 0.65") {
    const std::vector<double> v{0, 0, 1, 0, 1};
    const auto t = time_decay_attribution(v);
    CHECK(std::fabs(t[4] - 1.25 / 1.9375) <= 1e-12);
    CHECK(std::round(t[4] * 100.0) / 100.0 == doctest::Approx(0.65));
}

TEST_CASE("time decay matches the per-prefix weight oracle") {
    std::mt19937_64 gen(12);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + gen() % 10;
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(gen() % 2);
        const auto t = time_decay_attribution(v);
        const auto o = half_life_oracle(v);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(t[i] - o[i]) <= 1e-12);
    }
}

TEST_CASE("time decay with unit base equals linear exactly") {
    std::mt19937_64 gen(13);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + gen() % 12;
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(gen() % 2);
        CHECK(time_decay_attribution(v, 1.0) == linear_attribution(v));
    }
}

TEST_CASE("time decay rejects a base below 1") {
    const std::vector<double> v{1, 0};
    CHECK_THROWS_AS(time_decay_attribution(v, 0.5), Error);
}

TEST_CASE("build_labels small cases") {
    const std::vector<int> one{5};
    for (auto m : {AttributionModel::Linear, AttributionModel::TimeDecay}) {
        const auto t = build_labels(one, m);
        REQUIRE(t.size() == 1);
        CHECK(t[0] == ClassRow{0, 0, 0, 0, 0, 1});
    }
    const std::vector<int> two{0, 5};
    const auto t = build_labels(two, AttributionModel::Linear);
    CHECK(t[0] == ClassRow{1, 0, 0, 0, 0, 0});
    CHECK(t[1] == ClassRow{0.5, 0, 0, 0, 0, 0.5});
}

TEST_CASE("build_labels decomposes into per-class columns") {
    std::mt19937_64 gen(14);
    for (int rep = 0; rep < 50; ++rep) {
        const auto classes = random_classes(gen, 6);
        for (auto m : {AttributionModel::Linear, AttributionModel::TimeDecay}) {
            const auto t = build_labels(classes, m);
            for (std::size_t c = 0; c < 6; ++c) {
                std::vector<double> col;
                for (int k : classes) col.push_back(k == static_cast<int>(c) ? 1.0 : 0.0);
                const auto expect = m == AttributionModel::Linear ? linear_attribution(col) : time_decay_attribution(col);
                for (std::size_t n = 0; n < classes.size(); ++n) CHECK(t[n][c] == expect[n]);
            }
        }
    }
}

TEST_CASE("indicator rows are one-hot") {
    const std::vector<int> classes{0, 3, 5, 1};
    const auto v = indicator_matrix(classes);
    for (std::size_t n = 0; n < classes.size(); ++n) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 6; ++c) sum += v[n][c];
        CHECK(sum == 1.0);
        CHECK(v[n][static_cast<std::size_t>(classes[n])] == 1.0);
    }
}

TEST_CASE("property: label rows sum to one") {
    std::mt19937_64 gen(15);
    for (int rep = 0; rep < 500; ++rep) {
        const auto classes = random_classes(gen, 1 + gen() % 20);
        for (auto m : {AttributionModel::Linear, AttributionModel::TimeDecay}) {
            for (const auto& row : build_labels(classes, m)) {
                double sum = 0.0;
                for (double x : row) {
                    CHECK(x >= 0.0);
                    CHECK(x <= 1.0);
                    sum += x;
                }
                CHECK(std::fabs(sum - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("property: all-ones column stays at one") {
    for (std::size_t n = 1; n <= 30; ++n) {
        const std::vector<double> v(n, 1.0);
        for (double x : linear_attribution(v)) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
        for (double x : time_decay_attribution(v)) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("property: causality under truncation") {
    std::mt19937_64 gen(16);
    for (int rep = 0; rep < 200; ++rep) {
        const auto classes = random_classes(gen, 2 + gen() % 12);
        const std::size_t cut = 1 + gen() % (classes.size() - 1);
        const std::vector<int> prefix(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(cut));
        for (auto m : {AttributionModel::Linear, AttributionModel::TimeDecay}) {
            const auto full = build_labels(classes, m);
            const auto part = build_labels(prefix, m);
            for (std::size_t n = 0; n < cut; ++n) CHECK(full[n] == part[n]);
        }
    }
}

} // TEST_SUITE
