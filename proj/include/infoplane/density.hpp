// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "infoplane/core/rng.hpp"
#include "infoplane/image.hpp"

// Discretized mixture-of-logistics likelihood over 8-bit RGB pixels.
//
// Intensities live on the integer grid 0..255 and each value owns the bin [x - 0.5, x + 0.5];
// the two outermost bins extend to -inf and +inf so the pmf sums to one. Green and blue
// component means are shifted by the already-known red (and green) values. The shift is
// applied in the [-1, 1] rescaled intensity space, i.e. a coefficient c moves the mean by
// c * kCouplingScale * scaled(x) intensity units.
namespace infoplane::density {

inline constexpr int kMaxIntensity = 255;
inline constexpr int kDefaultComponents = 10;
inline constexpr double kLogScaleFloor = -7.0;
inline constexpr double kCouplingScale = 127.5;

// Coupling slots per component.
enum Coupling : int { kGreenFromRed = 0, kBlueFromRed = 1, kBlueFromGreen = 2 };

// x in 0..255 -> [-1, 1].
inline double scaled_intensity(int x) { return x / 127.5 - 1.0; }

struct MixtureParams {
  std::vector<double> logits;                      // K unnormalized weights
  std::array<std::vector<double>, 3> means;        // [channel][k], intensity units
  std::array<std::vector<double>, 3> log_scales;   // [channel][k], clamped at kLogScaleFloor on use
  std::vector<std::array<double, 3>> coupling;     // [k][Coupling]

  explicit MixtureParams(int components = 1);

  int components() const { return static_cast<int>(logits.size()); }
  // Throws InvalidParameter on inconsistent sizes or non-finite entries.
  void validate() const;
  // Normalized mixture weights.
  std::vector<double> weights() const;

  // Every channel shares one logistic (mu, s); no coupling.
  static MixtureParams single(double mu, double s);
};

double bin_probability(int x, double mu, double s);
// Numerically stable log of bin_probability, with partial derivatives w.r.t. mu and log(s).
double log_bin_probability(int x, double mu, double s, double* d_mu = nullptr, double* d_log_s = nullptr);

// log sum_k pi_k * bin(x; mu_ck, s_ck) for one channel, ignoring coupling. When `grad` is
// given it receives d/d(params) with the same layout (entries of other channels stay zero).
double mixture_log_pmf(int x, const MixtureParams& params, int channel, MixtureParams* grad = nullptr);

// Joint log-pmf of one RGB pixel with a shared mixture indicator and mean coupling.
double coupled_pixel_log_pmf(std::array<int, 3> rgb, const MixtureParams& params, MixtureParams* grad = nullptr);

struct LogLikelihood {
  double total_nats = 0.0;
  long num_dims = 0;

  double bits_per_dim() const;
};

// Sums coupled pixel log-pmfs in raster order; params_map holds one entry per pixel.
LogLikelihood image_log_likelihood(const Image& image, std::span<const MixtureParams> params_map);

// Ancestral draw R -> G -> B from the mixture.
std::array<int, 3> sample_pixel(const MixtureParams& params, Rng& rng);

}  // namespace infoplane::density
