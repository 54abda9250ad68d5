// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "infoplane/core/digest.hpp"
#include "infoplane/core/rng.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/image_io.hpp"

namespace infoplane::data {

namespace fs = std::filesystem;

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.label);
  return out;
}

std::vector<double> Dataset::class_prior() const {
  std::vector<double> p(std::max(num_classes(), 1), 0.0);
  for (const auto& it : items) {
    if (it.label >= static_cast<int>(p.size())) p.resize(it.label + 1, 0.0);
    p[it.label] += 1.0;
  }
  const double n = static_cast<double>(items.size());
  if (n > 0) {
    for (auto& v : p) v /= n;
  }
  return p;
}

std::string example_digest(const LabeledImage& ex) {
  std::string buf = fmt::format("{}x{}:", ex.image.height, ex.image.width);
  buf.append(reinterpret_cast<const char*>(ex.image.rgb.data()), ex.image.rgb.size());
  return sha256_hex(buf);
}

std::string dataset_digest(const Dataset& ds) {
  std::string acc;
  acc.reserve(ds.size() * 72);
  for (const auto& ex : ds.items) acc += example_digest(ex) + fmt::format(":{};", ex.label);
  return sha256_hex(acc);
}

SplitDataset three_way_split(const Dataset& source, std::uint64_t seed) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < source.items.size(); ++i) {
    auto [it, inserted] = seen.emplace(example_digest(source.items[i]), i);
    if (!inserted) {
      throw DataError(fmt::format("duplicate source items {} and {} share content; refusing to split", it->second, i));
    }
  }
  std::vector<std::size_t> order(source.items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "three_way_split"));
  std::shuffle(order.begin(), order.end(), rng);

  SplitDataset split;
  split.seed = seed;
  const std::size_t third = source.items.size() / 3;
  split.truncated = source.items.size() - 3 * third;
  Dataset* parts[3] = {&split.encoding, &split.decoding, &split.evaluation};
  for (int p = 0; p < 3; ++p) {
    parts[p]->class_names = source.class_names;
    parts[p]->items.reserve(third);
    for (std::size_t i = 0; i < third; ++i) parts[p]->items.push_back(source.items[order[p * third + i]]);
  }
  split.encoding_digest = dataset_digest(split.encoding);
  split.decoding_digest = dataset_digest(split.decoding);
  split.evaluation_digest = dataset_digest(split.evaluation);
  verify_disjoint(split);
  return split;
}

void verify_disjoint(const SplitDataset& split) {
  std::unordered_map<std::string, int> owner;
  const Dataset* parts[3] = {&split.encoding, &split.decoding, &split.evaluation};
  static constexpr const char* kNames[3] = {"encoding", "decoding", "evaluation"};
  for (int p = 0; p < 3; ++p) {
    for (const auto& ex : parts[p]->items) {
      auto [it, inserted] = owner.emplace(example_digest(ex), p);
      if (!inserted && it->second != p) {
        throw DataError(fmt::format("example shared between {} and {} subsets", kNames[it->second], kNames[p]));
      }
    }
  }
}

Dataset load_image_folder(const fs::path& root, FolderLoadReport* report) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> subsets;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) subsets.push_back(e.path());
  }
  std::sort(subsets.begin(), subsets.end());
  if (subsets.empty()) throw DataError("no subset directories under " + root.string());

  std::map<fs::path, std::set<std::string>> classes_per_subset;
  std::set<std::string> all_classes;
  for (const auto& s : subsets) {
    for (const auto& e : fs::directory_iterator(s)) {
      if (!e.is_directory()) continue;
      classes_per_subset[s].insert(e.path().filename().string());
      all_classes.insert(e.path().filename().string());
    }
  }
  std::string mismatch;
  for (const auto& s : subsets) {
    for (const auto& c : all_classes) {
      if (!classes_per_subset[s].count(c)) {
        mismatch += fmt::format(" class '{}' missing from subset '{}';", c, s.filename().string());
      }
    }
  }
  if (!mismatch.empty()) throw DataError("class sets differ across subsets:" + mismatch);

  Dataset ds;
  ds.class_names.assign(all_classes.begin(), all_classes.end());
  std::size_t skipped = 0;
  int height = -1, width = -1;
  for (const auto& s : subsets) {
    for (int label = 0; label < ds.num_classes(); ++label) {
      const fs::path dir = s / ds.class_names[label];
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      std::size_t loaded = 0;
      for (const auto& f : files) {
        auto img = try_read_png(f);
        if (!img) {
          ++skipped;
          continue;
        }
        if (height < 0) {
          height = img->height;
          width = img->width;
        } else if (img->height != height || img->width != width) {
          throw DataError(fmt::format("{} is {}x{}, expected {}x{}", f.string(), img->height, img->width, height, width));
        }
        ds.items.push_back({std::move(*img), label});
        ++loaded;
      }
      if (loaded == 0) throw DataError("empty class directory: " + dir.string());
    }
  }
  if (report) {
    report->skipped_files = skipped;
    report->subsets.clear();
    for (const auto& s : subsets) report->subsets.push_back(s.filename().string());
  }
  return ds;
}

void write_image_folder(const Dataset& ds, const fs::path& root, const std::string& subset) {
  std::vector<int> counter(ds.num_classes(), 0);
  for (const auto& ex : ds.items) {
    const std::string cls = ds.class_names.at(ex.label);
    write_png(root / subset / cls / fmt::format("{:06d}.png", counter[ex.label]++), ex.image);
  }
}

TemplateDataset generate_template_dataset(const TemplateDatasetSpec& spec, std::uint64_t seed) {
  const int pixels = spec.image_size * spec.image_size;
  if (spec.image_size < 1 || pixels > 20) {
    throw InvalidParameter(fmt::format("template space of 2^{} images is not enumerable (limit 2^20)", pixels));
  }
  if (spec.num_templates < 1 || spec.num_templates > (1 << pixels)) throw InvalidParameter("bad template count");
  if (spec.noise_rate < 0 || spec.noise_rate > 1) throw InvalidParameter("noise_rate must lie in [0, 1]");
  if (!spec.template_labels.empty() && static_cast<int>(spec.template_labels.size()) != spec.num_templates) {
    throw InvalidParameter("template_labels must have one entry per template");
  }

  Rng rng(derive_seed(seed, "template_dataset"));
  TemplateDataset out;
  if (!spec.templates.empty()) {
    if (static_cast<int>(spec.templates.size()) != spec.num_templates) {
      throw InvalidParameter("explicit templates must match num_templates");
    }
    for (const auto& t : spec.templates) {
      if (static_cast<int>(t.size()) != pixels) throw InvalidParameter("template has wrong pixel count");
    }
    out.templates = spec.templates;
  } else {
    std::set<std::uint32_t> used;
    std::uniform_int_distribution<std::uint32_t> bits(0, (1u << pixels) - 1);
    while (static_cast<int>(out.templates.size()) < spec.num_templates) {
      const std::uint32_t code = bits(rng);
      if (!used.insert(code).second) continue;
      std::vector<std::uint8_t> t(pixels);
      for (int i = 0; i < pixels; ++i) t[i] = (code >> i) & 1u;
      out.templates.push_back(std::move(t));
    }
  }

  int num_labels = spec.num_templates;
  if (!spec.template_labels.empty()) {
    num_labels = *std::max_element(spec.template_labels.begin(), spec.template_labels.end()) + 1;
  }
  out.samples.class_names.resize(num_labels);
  for (int i = 0; i < num_labels; ++i) out.samples.class_names[i] = fmt::format("class{}", i);

  // p(x, t) = (1/T) * prod_i q^[x_i != t_i] (1-q)^[x_i == t_i]
  const std::uint32_t outcomes = 1u << pixels;
  out.joint = mi::JointHistogram(static_cast<int>(outcomes), spec.num_templates);
  const double q = spec.noise_rate;
  for (int t = 0; t < spec.num_templates; ++t) {
    std::uint32_t code = 0;
    for (int i = 0; i < pixels; ++i) code |= static_cast<std::uint32_t>(out.templates[t][i]) << i;
    for (std::uint32_t x = 0; x < outcomes; ++x) {
      const int flips = std::popcount(x ^ code);
      out.joint.at(static_cast<int>(x), t) =
          std::pow(q, flips) * std::pow(1.0 - q, pixels - flips) / spec.num_templates;
    }
  }

  std::uniform_int_distribution<int> pick(0, spec.num_templates - 1);
  std::bernoulli_distribution flip(q);
  out.samples.items.reserve(spec.num_samples);
  for (int n = 0; n < spec.num_samples; ++n) {
    const int t = pick(rng);
    Image img(spec.image_size, spec.image_size);
    for (int i = 0; i < pixels; ++i) {
      const std::uint8_t bit = out.templates[t][i] ^ (flip(rng) ? 1 : 0);
      for (int c = 0; c < 3; ++c) img.rgb[static_cast<std::size_t>(i) * 3 + c] = bit ? 255 : 0;
    }
    const int label = spec.template_labels.empty() ? t : spec.template_labels[t];
    out.samples.items.push_back({std::move(img), label});
    out.template_of.push_back(t);
  }
  return out;
}

namespace {

// Coverage of the class shape at normalized coordinates (u, v) in [-1, 1] relative to the
// shape centre and radius.
bool shape_contains(int cls, double u, double v) {
  const double r = std::hypot(u, v);
  switch (cls % 10) {
    case 0: return r <= 1.0;                                                  // disk
    case 1: return r <= 1.0 && r >= 0.55;                                     // ring
    case 2: return std::abs(u) <= 0.85 && std::abs(v) <= 0.85;                // square
    case 3: return std::max(std::abs(u), std::abs(v)) <= 0.95 && std::max(std::abs(u), std::abs(v)) >= 0.55;
    case 4: return std::abs(v) <= 0.35 && std::abs(u) <= 1.0;                 // horizontal bar
    case 5: return std::abs(u) <= 0.35 && std::abs(v) <= 1.0;                 // vertical bar
    case 6: return (std::abs(u) <= 0.3 || std::abs(v) <= 0.3) && std::max(std::abs(u), std::abs(v)) <= 1.0;
    case 7: return (std::abs(u - v) <= 0.4 || std::abs(u + v) <= 0.4) && std::max(std::abs(u), std::abs(v)) <= 1.0;
    case 8: return v <= 0.9 && v >= -0.9 && std::abs(u) <= (v + 0.9) * 0.55;  // triangle
    default: return std::hypot(u - 0.5, v - 0.5) <= 0.45 || std::hypot(u + 0.5, v + 0.5) <= 0.45;  // two dots
  }
}

}  // namespace

Dataset generate_shapes_dataset(const ShapesSpec& spec, std::uint64_t seed) {
  if (spec.image_size < 4 || spec.num_classes < 2 || spec.num_classes > 10 || spec.num_samples < 0) {
    throw InvalidParameter("bad shapes dataset spec");
  }
  static constexpr const char* kNames[10] = {"disk",  "ring",  "square", "frame",    "hbar",
                                             "vbar",  "plus",  "cross",  "triangle", "dots"};
  Dataset ds;
  for (int c = 0; c < spec.num_classes; ++c) ds.class_names.emplace_back(kNames[c]);
  Rng rng(derive_seed(seed, "shapes_dataset"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.pixel_noise);
  const double s = spec.image_size;
  for (int n = 0; n < spec.num_samples; ++n) {
    const int cls = n % spec.num_classes;
    const double cx = s / 2 + (unit(rng) - 0.5) * s * 0.3;
    const double cy = s / 2 + (unit(rng) - 0.5) * s * 0.3;
    const double radius = s * (0.22 + 0.12 * unit(rng));
    std::array<double, 3> bg{}, fg{}, grad{};
    const bool dark_bg = unit(rng) < 0.5;
    for (int c = 0; c < 3; ++c) {
      bg[c] = dark_bg ? 20 + 90 * unit(rng) : 145 + 90 * unit(rng);
      fg[c] = dark_bg ? 145 + 100 * unit(rng) : 10 + 100 * unit(rng);
      grad[c] = (unit(rng) - 0.5) * 40;
    }
    Image img(spec.image_size, spec.image_size);
    for (int y = 0; y < spec.image_size; ++y) {
      for (int x = 0; x < spec.image_size; ++x) {
        int hits = 0;
        for (int sy = 0; sy < 2; ++sy)
          for (int sx = 0; sx < 2; ++sx) {
            const double u = (x + 0.25 + 0.5 * sx - cx) / radius;
            const double v = (y + 0.25 + 0.5 * sy - cy) / radius;
            hits += shape_contains(cls, u, v) ? 1 : 0;
          }
        const double cover = hits / 4.0;
        for (int c = 0; c < 3; ++c) {
          const double base = bg[c] + grad[c] * (y / s - 0.5);
          const double v = cover * fg[c] + (1 - cover) * base + noise(rng);
          img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
    ds.items.push_back({std::move(img), cls});
  }
  return ds;
}

Normalization compute_normalization(const Dataset& ds) {
  Normalization n;
  if (ds.items.empty()) return n;
  std::array<double, 3> sum{}, sum2{};
  double count = 0;
  for (const auto& ex : ds.items) {
    const auto& px = ex.image.rgb;
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const double v = px[i + c] / 255.0;
        sum[c] += v;
        sum2[c] += v * v;
      }
      count += 1;
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(sum2[c] / count - mean * mean, 1e-8);
    n.mean[c] = static_cast<float>(mean);
    n.stddev[c] = static_cast<float>(std::sqrt(var));
  }
  return n;
}

Tensor to_tensor(const Dataset& ds, std::span<const int> indices, const Normalization& norm) {
  if (indices.empty()) throw InvalidParameter("empty batch");
  const Image& first = ds.items.at(indices[0]).image;
  const int h = first.height, w = first.width;
  Tensor t({static_cast<int>(indices.size()), 3, h, w});
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const Image& img = ds.items.at(indices[n]).image;
    if (img.height != h || img.width != w) throw ShapeError("mixed image sizes in batch");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          t.at(static_cast<int>(n), c, y, x) = (img.at(y, x, c) / 255.0f - norm.mean[c]) / norm.stddev[c];
        }
  }
  return t;
}

Tensor to_unit_range(std::span<const Image* const> images) {
  if (images.empty()) throw InvalidParameter("empty batch");
  const int h = images[0]->height, w = images[0]->width;
  Tensor t({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->height != h || images[n]->width != w) throw ShapeError("mixed image sizes in batch");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) t.at(static_cast<int>(n), c, y, x) = images[n]->at(y, x, c) / 127.5f - 1.0f;
  }
  return t;
}

}  // namespace infoplane::data
