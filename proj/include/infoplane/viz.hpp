// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infoplane/encoder.hpp"
#include "infoplane/image.hpp"
#include "infoplane/mi.hpp"

// Plots (SVG) and sample grids (PNG). Output is byte-identical for identical input.
namespace infoplane::viz {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<int> epochs;  // optional; drives the faint-to-dark marker ramp
};

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

// Generic line plot with markers. Series with epochs get markers shaded from faint (earliest)
// to dark (latest).
std::string line_plot_svg(std::span<const Series> series, const PlotLabels& labels);

// Axis unit for an estimator: "nats" or "nats (relative)".
std::string unit_label(mi::EstimatorKind e);

// Picks the single estimator of `direction` present in `records`, or checks `requested`.
// Throws InvalidParameter when several are present and none was requested, or when none is.
mi::EstimatorKind select_estimator(std::span<const mi::MIRecord> records, mi::Direction direction,
                                   std::optional<mi::EstimatorKind> requested);

// x = inverse-direction MI, y = forward-direction MI, one trajectory per tap over epochs.
std::string info_plane_svg(std::span<const mi::MIRecord> records, std::optional<mi::EstimatorKind> forward = {},
                           std::optional<mi::EstimatorKind> inverse = {});

// MI against encoder epoch, one curve per tap, for a single estimator.
std::string mi_curves_svg(std::span<const mi::MIRecord> records, mi::Direction direction,
                          std::optional<mi::EstimatorKind> estimator = {});

// Reads an "epoch,loss,..." CSV into a series (the first two columns).
Series read_loss_csv(const std::filesystem::path& path, const std::string& label);
std::string loss_curves_svg(std::span<const Series> series);

// Rows are sources; column 0 holds `originals`, column 1 + e holds `columns[e]`.
Image compose_grid(std::span<const Image> originals, const std::vector<std::vector<Image>>& columns, int pad = 1);

// Sample grid for a finished run: evaluation images as sources, then one sample per stored
// inverse decoder at `tap`, for `epochs` (empty: every epoch with a stored decoder).
Image run_sample_grid(const std::filesystem::path& run_dir, Tap tap, int rows, std::uint64_t seed,
                      std::span<const int> epochs = {});

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace infoplane::viz
