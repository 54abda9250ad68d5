// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "infoplane/core/nn.hpp"

namespace infoplane {

// Binary tensor archive: magic "IPLT", format version, a UTF-8 metadata blob (JSON by
// convention) and named float32 tensors.
struct TensorArchive {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string metadata;
  std::map<std::string, Tensor> tensors;

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);
};

// Copies every parameter and buffer of `reg` into the archive.
void store_registry(const nn::ParamRegistry& reg, TensorArchive& archive);
// Overwrites registry values from the archive; missing names or shape changes are errors.
void restore_registry(nn::ParamRegistry& reg, const TensorArchive& archive);
// Digest over parameter names and values, used to prove that frozen weights did not move.
std::string registry_digest(const nn::ParamRegistry& reg);

}  // namespace infoplane
