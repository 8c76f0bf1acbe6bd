// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "shopstage/model.hpp"

namespace shopstage {

inline constexpr std::uint32_t kParamsFormatVersion = 1;

/// Binary container:
///   8 bytes   magic "SHSTPRM1"
///   u32       format version
///   u32       number of dimension fields (6)
///   6 x u64   hit_dim, session_dim, user_dim, hidden, fc_hidden, out_dim
///   u64       parameter count
///   f64 * n   values in layout order
/// All integers and reals little-endian.
std::string serialize_params(const ModelParams& params);

/// Throws BadFormat on a bad magic, version, dimension set or truncation.
ModelParams deserialize_params(std::string_view bytes);

/// Text listing of tensors, shapes, offsets and the checksum of the binary.
std::string params_manifest(const ModelParams& params);

/// Writes <stem>.bin and <stem>.manifest.txt.
void save_params(const ModelParams& params, const std::filesystem::path& stem);
/// Reads <stem>.bin.
ModelParams load_params(const std::filesystem::path& stem);

} // namespace shopstage
