// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "infoplane/core/tensor.hpp"

namespace infoplane {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string tensor_digest(const Tensor& t);

}  // namespace infoplane
