// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>

#include "infoplane/image.hpp"

namespace infoplane {

Image read_png(const std::filesystem::path& path);
// Returns nullopt for files that are not decodable PNGs.
std::optional<Image> try_read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace infoplane
