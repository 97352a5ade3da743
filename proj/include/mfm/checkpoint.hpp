// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <filesystem>
#include <string>

#include "mfm/model.hpp"

namespace mfm {

// Text manifest followed by little-endian float32 payloads:
//
//   MFMCKPT 1
//   <name> <rows> <cols> <frozen 0|1> <byte offset into payload>
//   ...
//   end
//   <payload>
template <typename Scalar>
std::string serialize_checkpoint(const ParameterStore<Scalar>& params);

// Validates names and shapes against the layout of `config`. Frozen flags
// are taken from the file.
template <typename Scalar>
ParameterStore<Scalar> deserialize_checkpoint(const std::string& bytes, const ModelConfig& config);

template <typename Scalar>
void save_checkpoint(const ParameterStore<Scalar>& params, const std::filesystem::path& path);

template <typename Scalar>
ParameterStore<Scalar> load_checkpoint(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace mfm
