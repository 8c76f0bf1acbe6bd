// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <doctest.h>

#include "shopstage/error.hpp"
#include "shopstage/params_io.hpp"
#include "support.hpp"

using namespace shopstage;

namespace {

ErrorCode code_of(const std::string& bytes) {
    try {
        deserialize_params(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

} // namespace

TEST_SUITE("params_io") {

TEST_CASE("round trip is exact") {
    ModelConfig c;
    c.hidden = 7;
    c.fc_hidden = 9;
    const auto p = init_params(c, 77);
    const auto bytes = serialize_params(p);
    CHECK(bytes.size() == 8 + 4 + 4 + 6 * 8 + 8 + 8 * parameter_count(c));
    CHECK(bytes.substr(0, 8) == "SHSTPRM1");
    const auto q = deserialize_params(bytes);
    CHECK(q == p);
    CHECK(serialize_params(q) == bytes);
}

TEST_CASE("corrupt containers are rejected") {
    const auto bytes = serialize_params(init_params(ModelConfig{}, 1));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(code_of(bad_magic) == ErrorCode::BadFormat);
    CHECK(code_of(bytes.substr(0, bytes.size() - 3)) == ErrorCode::BadFormat);
    CHECK(code_of(bytes.substr(0, 10)) == ErrorCode::BadFormat);
    CHECK(code_of(bytes + "x") == ErrorCode::BadFormat);
    auto bad_version = bytes;
    bad_version[8] = 9;
    CHECK(code_of(bad_version) == ErrorCode::BadFormat);
    CHECK(code_of("") == ErrorCode::BadFormat);
}

TEST_CASE("manifest lists every tensor") {
    const auto p = init_params(ModelConfig{}, 2);
    const auto m = params_manifest(p);
    for (const auto& t : p.layout()) CHECK(m.find(t.name) != std::string::npos);
    CHECK(m.find("15246") != std::string::npos);
    CHECK(m == params_manifest(p));
}

TEST_CASE("save and load through files") {
    testing::TempDir dir("params");
    const auto p = init_params(ModelConfig{}, 3);
    save_params(p, dir.path() / "model");
    CHECK(std::filesystem::exists(dir.path() / "model.bin"));
    CHECK(std::filesystem::exists(dir.path() / "model.manifest.txt"));
    CHECK(load_params(dir.path() / "model") == p);
    CHECK_THROWS_AS(load_params(dir.path() / "missing"), Error);
}

} // TEST_SUITE
