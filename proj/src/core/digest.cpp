// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/core/digest.hpp"

#include <openssl/sha.h>

#include <array>

namespace infoplane {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  SHA256(bytes.data(), bytes.size(), md.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * md.size());
  for (unsigned char b : md) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string tensor_digest(const Tensor& t) {
  std::string buf = shape_str(t.shape());
  buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  return sha256_hex(buf);
}

}  // namespace infoplane
