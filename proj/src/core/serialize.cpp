// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/core/serialize.hpp"

#include <cstring>
#include <fstream>

#include "infoplane/core/digest.hpp"
#include "infoplane/errors.hpp"

namespace infoplane {

namespace {

constexpr char kMagic[4] = {'I', 'P', 'L', 'T'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated tensor archive");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1ULL << 32)) throw IoError("corrupt tensor archive (string length)");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("truncated tensor archive");
  return s;
}

}  // namespace

void TensorArchive::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kFormatVersion);
    put_string(os, metadata);
    put<std::uint64_t>(os, tensors.size());
    for (const auto& [name, t] : tensors) {
      put_string(os, name);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
      for (int d : t.shape()) put<std::int32_t>(os, d);
      os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!os) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path.string() + " is not a tensor archive");
  const auto version = get<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw IoError(path.string() + ": unsupported archive version " + std::to_string(version));
  }
  TensorArchive a;
  a.metadata = get_string(is);
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(is);
    const auto nd = get<std::uint32_t>(is);
    if (nd > 8) throw IoError("corrupt tensor archive (rank)");
    Shape shape(nd);
    for (auto& d : shape) d = get<std::int32_t>(is);
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!is) throw IoError("truncated tensor archive");
    a.tensors.emplace(std::move(name), std::move(t));
  }
  return a;
}

void store_registry(const nn::ParamRegistry& reg, TensorArchive& archive) {
  for (const auto& p : reg.params()) archive.tensors[p.name] = p.var.value();
  for (const auto& b : reg.buffers()) archive.tensors[b.name] = b.var.value();
}

void restore_registry(nn::ParamRegistry& reg, const TensorArchive& archive) {
  auto restore = [&](const nn::NamedVar& nv) {
    auto it = archive.tensors.find(nv.name);
    if (it == archive.tensors.end()) throw IoError("archive is missing tensor " + nv.name);
    if (it->second.shape() != nv.var.shape()) {
      throw ShapeError("archive tensor " + nv.name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                       shape_str(nv.var.shape()));
    }
    Var v = nv.var;
    v.mutable_value() = it->second;
  };
  for (const auto& p : reg.params()) restore(p);
  for (const auto& b : reg.buffers()) restore(b);
}

std::string registry_digest(const nn::ParamRegistry& reg) {
  std::string acc;
  for (const auto& p : reg.params()) acc += p.name + ":" + tensor_digest(p.var.value()) + ";";
  for (const auto& b : reg.buffers()) acc += b.name + ":" + tensor_digest(b.var.value()) + ";";
  return sha256_hex(acc);
}

}  // namespace infoplane
