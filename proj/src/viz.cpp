// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/viz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "infoplane/errors.hpp"
#include "infoplane/experiment.hpp"
#include "infoplane/pixelcnn.hpp"

namespace infoplane::viz {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 80, kRight = 150, kTop = 40, kBottom = 60;

struct Rgb {
  double r, g, b;
};

constexpr std::array<Rgb, 6> kPalette = {{{31, 119, 180},
                                          {214, 39, 40},
                                          {44, 160, 44},
                                          {148, 103, 189},
                                          {255, 127, 14},
                                          {23, 190, 207}}};

// t = 0 is faint (mostly white), t = 1 is the full, slightly darkened colour.
std::string ramp(const Rgb& c, double t) {
  const double white = 0.8 * (1.0 - t);
  const double dark = 0.25 * t;
  auto ch = [&](double v) {
    const double mixed = v * (1.0 - white) + 255.0 * white;
    return static_cast<int>(std::lround(mixed * (1.0 - dark)));
  };
  return fmt::format("#{:02x}{:02x}{:02x}", ch(c.r), ch(c.g), ch(c.b));
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

// Round tick step (1, 2 or 5 times a power of ten) giving about five ticks.
double tick_step(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double p = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * p >= raw) return m * p;
  }
  return 10.0 * p;
}

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double d = std::max(1.0, std::abs(lo) * 0.1);
    return {lo - d, hi + d};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string line_plot_svg(std::span<const Series> series, const PlotLabels& labels) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw InvalidParameter("series '" + s.label + "': x and y differ in length");
    if (!s.epochs.empty() && s.epochs.size() != s.x.size()) {
      throw InvalidParameter("series '" + s.label + "': epochs and points differ in length");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) throw InvalidParameter("nothing to plot");
  std::tie(x0, x1) = padded_range(x0, x1);
  std::tie(y0, y1) = padded_range(y0, y1);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)", kWidth,
                   kHeight, kWidth, kHeight)
    << '\n';
  o << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  o << fmt::format(R"(<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>)",
                   num(kLeft + pw / 2), escape(labels.title))
    << '\n';
  o << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>)", num(kLeft), num(kTop),
                   num(pw), num(ph))
    << '\n';
  const double xs = tick_step(x0, x1), ys = tick_step(y0, y1);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-12; t += xs) {
    o << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#444"/>)", num(px(t)), num(kTop + ph),
                     num(kTop + ph + 5))
      << '\n';
    o << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>)",
                     num(px(t)), num(kTop + ph + 18), fmt::format("{:.4g}", std::abs(t) < xs * 1e-9 ? 0.0 : t))
      << '\n';
  }
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-12; t += ys) {
    o << fmt::format(R"(<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#444"/>)", num(kLeft - 5), num(kLeft),
                     num(py(t)))
      << '\n';
    o << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>)",
                     num(kLeft - 8), num(py(t) + 4), fmt::format("{:.4g}", std::abs(t) < ys * 1e-9 ? 0.0 : t))
      << '\n';
  }
  o << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>)",
                   num(kLeft + pw / 2), num(kHeight - 15), escape(labels.x_label))
    << '\n';
  o << fmt::format(
           R"svg(<text x="20" y="{0}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>)svg",
           num(kTop + ph / 2), escape(labels.y_label))
    << '\n';

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const Rgb& c = kPalette[k % kPalette.size()];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(s.x[i])) + "," + num(py(s.y[i]));
    }
    o << fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)", pts, ramp(c, 0.6))
      << '\n';
    if (!s.epochs.empty()) {
      const auto [lo, hi] = std::minmax_element(s.epochs.begin(), s.epochs.end());
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        const double t = *hi > *lo ? static_cast<double>(s.epochs[i] - *lo) / (*hi - *lo) : 1.0;
        o << fmt::format(R"(<circle cx="{}" cy="{}" r="5" fill="{}" stroke="#222" stroke-width="0.5"><title>epoch {}</title></circle>)",
                         num(px(s.x[i])), num(py(s.y[i])), ramp(c, t), s.epochs[i])
          << '\n';
      }
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    o << fmt::format(R"(<rect x="{}" y="{}" width="12" height="12" fill="{}"/>)", num(kWidth - kRight + 12),
                     num(ly - 10), ramp(c, 1.0))
      << '\n';
    o << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>)",
                     num(kWidth - kRight + 30), num(ly), escape(s.label))
      << '\n';
  }
  if (std::any_of(series.begin(), series.end(), [](const Series& s) { return !s.epochs.empty(); })) {
    const double ly = kTop + 14 + 18 * static_cast<double>(series.size()) + 10;
    o << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#555">faint = early epoch</text>)",
                     num(kWidth - kRight + 12), num(ly))
      << '\n';
    o << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#555">dark = late epoch</text>)",
                     num(kWidth - kRight + 12), num(ly + 14))
      << '\n';
  }
  o << "</svg>\n";
  return o.str();
}

std::string unit_label(mi::EstimatorKind e) {
  return e == mi::EstimatorKind::kInverseRelative ? "nats (relative)" : "nats";
}

mi::EstimatorKind select_estimator(std::span<const mi::MIRecord> records, mi::Direction direction,
                                   std::optional<mi::EstimatorKind> requested) {
  std::set<mi::EstimatorKind> present;
  for (const auto& r : records) {
    if (r.direction == direction) present.insert(r.estimator);
  }
  if (requested) {
    if (mi::direction_of(*requested) != direction) {
      throw InvalidParameter("estimator " + mi::to_string(*requested) + " is not a " + mi::to_string(direction) +
                             " estimator");
    }
    if (!present.count(*requested)) throw InvalidParameter("no records for estimator " + mi::to_string(*requested));
    return *requested;
  }
  if (present.empty()) throw InvalidParameter("no " + mi::to_string(direction) + " records");
  if (present.size() > 1) {
    std::string names;
    for (auto e : present) names += (names.empty() ? "" : ", ") + mi::to_string(e);
    throw InvalidParameter("records mix " + mi::to_string(direction) + " estimators (" + names +
                           "); select one explicitly");
  }
  return *present.begin();
}

namespace {

// value per (tap, epoch) for one estimator.
std::map<std::string, std::map<int, double>> by_tap(std::span<const mi::MIRecord> records, mi::EstimatorKind e) {
  std::map<std::string, std::map<int, double>> out;
  for (const auto& r : records) {
    if (r.estimator == e) out[r.tap][r.epoch] = r.value_nats;
  }
  return out;
}

void check_budgets(std::span<const mi::MIRecord> records, mi::EstimatorKind e) {
  std::set<int> budgets;
  for (const auto& r : records) {
    if (r.estimator == e) budgets.insert(r.decoder_budget);
  }
  if (budgets.size() > 1) throw BudgetMismatch("records for " + mi::to_string(e) + " mix decoder budgets");
}

}  // namespace

std::string info_plane_svg(std::span<const mi::MIRecord> records, std::optional<mi::EstimatorKind> forward,
                           std::optional<mi::EstimatorKind> inverse) {
  const auto fe = select_estimator(records, mi::Direction::kForward, forward);
  const auto ie = select_estimator(records, mi::Direction::kInverse, inverse);
  check_budgets(records, fe);
  check_budgets(records, ie);
  const auto fwd = by_tap(records, fe);
  const auto inv = by_tap(records, ie);
  std::vector<Series> series;
  for (const auto& [tap, points] : inv) {
    const auto f = fwd.find(tap);
    if (f == fwd.end()) continue;
    Series s;
    s.label = tap;
    for (const auto& [epoch, xv] : points) {
      const auto yv = f->second.find(epoch);
      if (yv == f->second.end()) continue;
      s.x.push_back(xv);
      s.y.push_back(yv->second);
      s.epochs.push_back(epoch);
    }
    if (!s.x.empty()) series.push_back(std::move(s));
  }
  if (series.empty()) throw InvalidParameter("no (epoch, tap) pairs carry both forward and inverse records");
  PlotLabels labels{"Information plane (" + mi::to_string(fe) + " / " + mi::to_string(ie) + ")",
                    "I(x; h) [" + unit_label(ie) + "]", "I(y; h) [" + unit_label(fe) + "]"};
  return line_plot_svg(series, labels);
}

std::string mi_curves_svg(std::span<const mi::MIRecord> records, mi::Direction direction,
                          std::optional<mi::EstimatorKind> estimator) {
  const auto e = select_estimator(records, direction, estimator);
  check_budgets(records, e);
  std::vector<Series> series;
  for (const auto& [tap, points] : by_tap(records, e)) {
    Series s;
    s.label = tap;
    for (const auto& [epoch, v] : points) {
      s.x.push_back(epoch);
      s.y.push_back(v);
      s.epochs.push_back(epoch);
    }
    series.push_back(std::move(s));
  }
  const std::string sym = direction == mi::Direction::kForward ? "I(y; h)" : "I(x; h)";
  return line_plot_svg(series, {sym + " over training (" + mi::to_string(e) + ")", "encoder epoch",
                                sym + " [" + unit_label(e) + "]"});
}

Series read_loss_csv(const std::filesystem::path& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Series s;
  s.label = label;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',')) {
      throw DataError("malformed loss row in " + path.string() + ": " + line);
    }
    try {
      s.x.push_back(std::stod(a));
      s.y.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw DataError("malformed loss row in " + path.string() + ": " + line);
    }
  }
  return s;
}

std::string loss_curves_svg(std::span<const Series> series) {
  return line_plot_svg(series, {"Training loss", "epoch", "loss"});
}

Image compose_grid(std::span<const Image> originals, const std::vector<std::vector<Image>>& columns, int pad) {
  if (originals.empty()) throw InvalidParameter("sample grid needs at least one source image");
  const int h = originals[0].height, w = originals[0].width;
  auto check = [&](const Image& im) {
    if (im.height != h || im.width != w) throw ShapeError("sample grid images differ in size");
  };
  for (const auto& im : originals) check(im);
  for (const auto& col : columns) {
    if (col.size() != originals.size()) throw ShapeError("sample grid column has the wrong number of rows");
    for (const auto& im : col) check(im);
  }
  const int rows = static_cast<int>(originals.size());
  const int cols = 1 + static_cast<int>(columns.size());
  Image grid(rows * h + (rows + 1) * pad, cols * w + (cols + 1) * pad);
  std::fill(grid.rgb.begin(), grid.rgb.end(), 255);
  auto blit = [&](const Image& im, int r, int c) {
    const int oy = pad + r * (h + pad), ox = pad + c * (w + pad);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch) grid.at(oy + y, ox + x, ch) = im.at(y, x, ch);
  };
  for (int r = 0; r < rows; ++r) {
    blit(originals[r], r, 0);
    for (std::size_t c = 0; c < columns.size(); ++c) blit(columns[c][r], r, static_cast<int>(c) + 1);
  }
  return grid;
}

Image run_sample_grid(const std::filesystem::path& run_dir, Tap tap, int rows, std::uint64_t seed,
                      std::span<const int> epochs) {
  if (rows < 1) throw InvalidParameter("sample grid needs at least one row");
  const experiment::RunManifest m = experiment::load_manifest(run_dir / "manifest.json");
  const data::SplitDataset split = experiment::prepare_split(m);
  if (m.split_digests.count("evaluation") && m.split_digests.at("evaluation") != split.evaluation_digest) {
    throw DigestMismatch("evaluation split differs from the one recorded in the manifest");
  }
  data::Dataset sources;
  sources.class_names = split.evaluation.class_names;
  const int n = std::min<int>(rows, static_cast<int>(split.evaluation.size()));
  sources.items.assign(split.evaluation.items.begin(), split.evaluation.items.begin() + n);
  const data::Normalization norm = m.normalization ? *m.normalization : data::compute_normalization(split.encoding);

  std::vector<Image> originals;
  for (const auto& it : sources.items) originals.push_back(it.image);
  std::vector<std::vector<Image>> columns;
  const std::vector<int> wanted = epochs.empty() ? m.resolved_query_epochs() : std::vector<int>(epochs.begin(), epochs.end());
  for (int epoch : wanted) {
    const auto dec_path = experiment::inverse_decoder_path(run_dir, epoch, tap);
    if (!std::filesystem::exists(dec_path)) {
      if (epochs.empty()) continue;
      throw DataError(fmt::format("no inverse decoder for epoch {} tap {} in {}", epoch, to_string(tap), run_dir.string()));
    }
    const Encoder enc = load_encoder(experiment::checkpoint_path(run_dir, epoch), &m.encoder);
    const Tensor h = compute_tap(enc, tap, sources, norm);
    const pixelcnn::ConditionalPixelCNN model = pixelcnn::load_pixelcnn(dec_path);
    Rng rng(derive_seed(seed, fmt::format("grid.e{}", epoch)));
    columns.push_back(pixelcnn::conditional_sample(model, &h, n, rng));
  }
  if (columns.empty()) throw DataError("no inverse decoders for tap " + to_string(tap) + " in " + run_dir.string());
  return compose_grid(originals, columns);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace infoplane::viz
