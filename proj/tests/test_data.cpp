// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "infoplane/data.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/image_io.hpp"

using namespace infoplane;
using namespace infoplane::data;

namespace {

Dataset distinct_items(int n) {
  Dataset ds;
  ds.class_names = {"a", "b", "c"};
  for (int i = 0; i < n; ++i) {
    LabeledImage ex{Image(2, 2), i % 3};
    ex.image.rgb[0] = static_cast<std::uint8_t>(i % 256);
    ex.image.rgb[1] = static_cast<std::uint8_t>(i / 256);
    ds.items.push_back(ex);
  }
  return ds;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("three way split") {
  const Dataset src = distinct_items(9);
  const SplitDataset a = three_way_split(src, 42);
  const SplitDataset b = three_way_split(src, 42);
  CHECK(a.encoding.size() == 3);
  CHECK(a.decoding.size() == 3);
  CHECK(a.evaluation.size() == 3);
  CHECK(a.encoding_digest == b.encoding_digest);
  CHECK(a.evaluation_digest == b.evaluation_digest);
  CHECK_NOTHROW(verify_disjoint(a));
  CHECK(three_way_split(src, 43).encoding_digest != a.encoding_digest);

  const SplitDataset t = three_way_split(distinct_items(11), 1);
  CHECK(t.truncated == 2);
  CHECK(t.encoding.size() == 3);

  Dataset dup = distinct_items(9);
  dup.items[7].image = dup.items[2].image;
  CHECK_THROWS_AS(three_way_split(dup, 42), DataError);

  SplitDataset bad = a;
  bad.decoding.items[0] = bad.encoding.items[0];
  CHECK_THROWS_AS(verify_disjoint(bad), DataError);
}

TEST_CASE("split sizes scale") {
  const SplitDataset s = three_way_split(distinct_items(2700), 3);
  CHECK(s.encoding.size() == 900);
  CHECK(s.decoding.size() == 900);
  CHECK(s.evaluation.size() == 900);
}

TEST_CASE("image folder loading") {
  const auto root = fresh_dir("infoplane_folder_test");
  Dataset ds = distinct_items(6);
  write_image_folder(ds, root, "train");
  write_image_folder(ds, root, "test");
  std::ofstream(root / "train" / "a" / "notes.txt") << "not an image";
  FolderLoadReport report;
  const Dataset loaded = load_image_folder(root, &report);
  CHECK(loaded.size() == 12);
  CHECK(loaded.class_names == std::vector<std::string>{"a", "b", "c"});
  CHECK(report.skipped_files == 1);
  CHECK(report.subsets.size() == 2);

  std::filesystem::create_directories(root / "test" / "d");
  CHECK_THROWS_AS(load_image_folder(root), DataError);
  std::filesystem::create_directories(root / "train" / "d");
  try {
    load_image_folder(root);
    FAIL("expected empty-class error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("empty") != std::string::npos);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("template dataset closed form") {
  TemplateDatasetSpec spec;
  spec.noise_rate = 0.0;
  spec.num_samples = 50;
  TemplateDataset t = generate_template_dataset(spec, 1);
  CHECK(mi::exact_mi_discrete(t.joint) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  spec.noise_rate = 0.5;
  t = generate_template_dataset(spec, 1);
  CHECK(mi::exact_mi_discrete(t.joint) < 1e-12);

  // Two complementary 2x2 templates, enumerated by hand over all 16 images.
  spec = TemplateDatasetSpec{};
  spec.image_size = 2;
  spec.num_templates = 2;
  spec.noise_rate = 0.1;
  spec.templates = {{0, 0, 0, 0}, {1, 1, 1, 1}};
  t = generate_template_dataset(spec, 2);
  double expected = 0;
  for (int x = 0; x < 16; ++x) {
    const int ones = std::popcount(static_cast<unsigned>(x));
    const double p0 = 0.5 * std::pow(0.1, ones) * std::pow(0.9, 4 - ones);
    const double p1 = 0.5 * std::pow(0.9, ones) * std::pow(0.1, 4 - ones);
    const double px = p0 + p1;
    expected += p0 * std::log(p0 / (px * 0.5)) + p1 * std::log(p1 / (px * 0.5));
  }
  CHECK(mi::exact_mi_discrete(t.joint) == doctest::Approx(expected).epsilon(1e-12));

  spec.image_size = 5;
  spec.templates.clear();
  CHECK_THROWS(generate_template_dataset(spec, 2));
}

TEST_CASE("template samples converge to the closed-form MI") {
  TemplateDatasetSpec spec;
  spec.image_size = 2;
  spec.num_templates = 3;
  spec.noise_rate = 0.2;
  spec.num_samples = 60000;
  const TemplateDataset t = generate_template_dataset(spec, 5);
  mi::JointHistogram emp(16, 3);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    int code = 0;
    for (int p = 0; p < 4; ++p) code |= (t.samples.items[i].image.rgb[p * 3] > 127 ? 1 : 0) << p;
    emp.at(code, t.template_of[i]) += 1;
  }
  // Plug-in bias is about (cells - 1) / (2N); allow a generous band around it.
  CHECK(std::abs(mi::exact_mi_discrete(emp) - mi::exact_mi_discrete(t.joint)) < 0.01);
}

TEST_CASE("shapes dataset and normalization") {
  ShapesSpec spec;
  spec.num_samples = 200;
  const Dataset a = generate_shapes_dataset(spec, 3);
  const Dataset b = generate_shapes_dataset(spec, 3);
  CHECK(a.size() == 200);
  CHECK(dataset_digest(a) == dataset_digest(b));
  CHECK(a.num_classes() == 10);
  const std::vector<int> all = a.labels();
  std::set<int> labels(all.begin(), all.end());
  CHECK(labels.size() == 10);
  const auto prior = a.class_prior();
  double s = 0;
  for (double p : prior) s += p;
  CHECK(s == doctest::Approx(1.0));

  const Normalization n = compute_normalization(a);
  std::vector<int> idx(a.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  const Tensor t = to_tensor(a, idx, n);
  double mean = 0;
  for (int i = 0; i < static_cast<int>(a.size()); ++i)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) mean += t.at(i, 1, y, x);
  CHECK(std::abs(mean / (a.size() * 256.0)) < 1e-3);
}

TEST_CASE("png round trip") {
  const auto dir = fresh_dir("infoplane_png_test");
  Image img(3, 5);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  write_png(dir / "x.png", img);
  CHECK(read_png(dir / "x.png") == img);
  std::ofstream(dir / "y.png") << "garbage";
  CHECK_FALSE(try_read_png(dir / "y.png").has_value());
  std::filesystem::remove_all(dir);
}
