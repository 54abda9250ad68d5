// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "infoplane/core/tensor.hpp"
#include "infoplane/image.hpp"
#include "infoplane/mi.hpp"

namespace infoplane::data {

struct LabeledImage {
  Image image;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledImage> items;
  std::vector<std::string> class_names;

  std::size_t size() const { return items.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<int> labels() const;
  // Class frequencies, used as the prior for forward MI.
  std::vector<double> class_prior() const;
};

// Content hash of one example's pixels and shape; labels are not part of the content.
std::string example_digest(const LabeledImage& ex);
// Order-sensitive digest over all example digests.
std::string dataset_digest(const Dataset& ds);

struct SplitDataset {
  Dataset encoding;
  Dataset decoding;
  Dataset evaluation;
  std::string encoding_digest;
  std::string decoding_digest;
  std::string evaluation_digest;
  std::uint64_t seed = 0;
  std::size_t truncated = 0;  // source items dropped to reach a multiple of three
};

// Seeded partition into three equal disjoint subsets. Fails hard when two source items share
// content, since a duplicate could land in two subsets.
SplitDataset three_way_split(const Dataset& source, std::uint64_t seed);

// Throws DataError unless the three subsets are pairwise disjoint by content hash.
void verify_disjoint(const SplitDataset& split);

struct FolderLoadReport {
  std::size_t skipped_files = 0;
  std::vector<std::string> subsets;
};

// Loads root/<subset>/<class>/<image>.png. Every subset must carry the same class set; files
// that are not decodable PNGs are skipped and counted.
Dataset load_image_folder(const std::filesystem::path& root, FolderLoadReport* report = nullptr);

// Writes dataset as root/<subset>/<class>/<index>.png.
void write_image_folder(const Dataset& ds, const std::filesystem::path& root, const std::string& subset);

// Binary-pixel template data with a closed-form joint distribution.
struct TemplateDatasetSpec {
  int image_size = 4;
  int num_templates = 4;
  double noise_rate = 0.1;
  std::vector<int> template_labels;  // label per template; empty -> label = template index
  int num_samples = 1000;
  // Explicit binary patterns (image_size^2 entries each); empty -> random distinct patterns.
  std::vector<std::vector<std::uint8_t>> templates;
};

struct TemplateDataset {
  Dataset samples;
  std::vector<int> template_of;           // template index per sample
  std::vector<std::vector<std::uint8_t>> templates;  // binary patterns, image_size^2 each
  // Closed-form joint p(x, template) over all 2^(image_size^2) binary images; rows index x as
  // a bit pattern in raster order (pixel 0 = least significant bit), columns index templates.
  mi::JointHistogram joint;
};

// Generates templates (random distinct patterns) and noisy samples x = template XOR noise.
TemplateDataset generate_template_dataset(const TemplateDatasetSpec& spec, std::uint64_t seed);

// Desk-scale stand-in for a 10-class natural image corpus: procedurally drawn shapes with
// class-irrelevant colour, position, scale and texture variation.
struct ShapesSpec {
  int image_size = 16;
  int num_classes = 10;
  int num_samples = 3000;
  double pixel_noise = 12.0;
};
Dataset generate_shapes_dataset(const ShapesSpec& spec, std::uint64_t seed);

struct Normalization {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};
};

Normalization compute_normalization(const Dataset& ds);

// NCHW float batch, normalized per channel.
Tensor to_tensor(const Dataset& ds, std::span<const int> indices, const Normalization& norm);
// NCHW float batch in [-1, 1].
Tensor to_unit_range(std::span<const Image* const> images);

}  // namespace infoplane::data
