// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "infoplane/errors.hpp"

namespace infoplane::density {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_intensity(int x) {
  if (x < 0 || x > kMaxIntensity) throw InvalidParameter("intensity " + std::to_string(x) + " outside 0..255");
}

double effective_log_scale(double ls, bool* clamped = nullptr) {
  const bool c = ls < kLogScaleFloor;
  if (clamped) *clamped = c;
  return c ? kLogScaleFloor : ls;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (double l : logits) s += std::exp(l - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

MixtureParams zero_like(const MixtureParams& p) {
  MixtureParams z(p.components());
  return z;
}

// Shared-indicator mixture over `channels`. With coupled == false every listed channel uses
// its raw mean.
double mixture_impl(std::span<const int> xs, std::span<const int> channels, const MixtureParams& params, bool coupled,
                    MixtureParams* grad) {
  params.validate();
  for (int x : xs) check_intensity(x);
  const int k_count = params.components();
  const auto log_pi = log_softmax(params.logits);

  std::vector<double> scaled(3, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) scaled[channels[i]] = scaled_intensity(xs[i]);

  std::vector<double> terms(k_count);
  // Per component, per listed channel: dlp/dmu and dlp/dlogs.
  std::vector<std::array<double, 3>> dmu(k_count), dls(k_count);
  for (int k = 0; k < k_count; ++k) {
    double t = log_pi[k];
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const int c = channels[i];
      double mu = params.means[c][k];
      if (coupled && c == 1) mu += kCouplingScale * params.coupling[k][kGreenFromRed] * scaled[0];
      if (coupled && c == 2) {
        mu += kCouplingScale *
              (params.coupling[k][kBlueFromRed] * scaled[0] + params.coupling[k][kBlueFromGreen] * scaled[1]);
      }
      bool clamped = false;
      const double ls = effective_log_scale(params.log_scales[c][k], &clamped);
      double d_mu = 0, d_ls = 0;
      t += log_bin_probability(xs[i], mu, std::exp(ls), &d_mu, &d_ls);
      dmu[k][i] = d_mu;
      dls[k][i] = clamped ? 0.0 : d_ls;
    }
    terms[k] = t;
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0;
  for (double t : terms) s += std::exp(t - mx);
  const double result = mx + std::log(s);

  if (grad) {
    if (grad->components() != k_count) *grad = zero_like(params);
    for (int k = 0; k < k_count; ++k) {
      const double r = std::exp(terms[k] - result);
      grad->logits[k] += r - std::exp(log_pi[k]);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const int c = channels[i];
        grad->means[c][k] += r * dmu[k][i];
        grad->log_scales[c][k] += r * dls[k][i];
        if (coupled && c == 1) grad->coupling[k][kGreenFromRed] += r * dmu[k][i] * kCouplingScale * scaled[0];
        if (coupled && c == 2) {
          grad->coupling[k][kBlueFromRed] += r * dmu[k][i] * kCouplingScale * scaled[0];
          grad->coupling[k][kBlueFromGreen] += r * dmu[k][i] * kCouplingScale * scaled[1];
        }
      }
    }
  }
  return result;
}

}  // namespace

MixtureParams::MixtureParams(int components) {
  if (components < 1) throw InvalidParameter("mixture needs at least one component");
  logits.assign(components, 0.0);
  for (auto& m : means) m.assign(components, 0.0);
  for (auto& l : log_scales) l.assign(components, 0.0);
  coupling.assign(components, {0.0, 0.0, 0.0});
}

void MixtureParams::validate() const {
  const std::size_t k = logits.size();
  if (k < 1) throw InvalidParameter("mixture needs at least one component");
  for (int c = 0; c < 3; ++c) {
    if (means[c].size() != k || log_scales[c].size() != k) throw InvalidParameter("mixture parameter size mismatch");
  }
  if (coupling.size() != k) throw InvalidParameter("coupling size mismatch");
  auto finite = [](double v) { return std::isfinite(v); };
  bool ok = std::all_of(logits.begin(), logits.end(), finite);
  for (int c = 0; c < 3; ++c) {
    ok = ok && std::all_of(means[c].begin(), means[c].end(), finite);
    ok = ok && std::all_of(log_scales[c].begin(), log_scales[c].end(), finite);
  }
  for (const auto& cc : coupling) ok = ok && std::all_of(cc.begin(), cc.end(), finite);
  if (!ok) throw InvalidParameter("non-finite mixture parameter");
}

std::vector<double> MixtureParams::weights() const {
  auto lp = log_softmax(logits);
  for (auto& v : lp) v = std::exp(v);
  return lp;
}

MixtureParams MixtureParams::single(double mu, double s) {
  if (!(s > 0)) throw InvalidParameter("logistic scale must be positive");
  MixtureParams p(1);
  for (int c = 0; c < 3; ++c) {
    p.means[c][0] = mu;
    p.log_scales[c][0] = std::log(s);
  }
  return p;
}

double bin_probability(int x, double mu, double s) {
  check_intensity(x);
  if (!(s > 0) || !std::isfinite(s)) throw InvalidParameter("logistic scale must be positive and finite");
  const double upper = x == kMaxIntensity ? 1.0 : sigmoid((x + 0.5 - mu) / s);
  const double lower = x == 0 ? 0.0 : sigmoid((x - 0.5 - mu) / s);
  return upper - lower;
}

double log_bin_probability(int x, double mu, double s, double* d_mu, double* d_log_s) {
  check_intensity(x);
  if (!(s > 0) || !std::isfinite(s)) throw InvalidParameter("logistic scale must be positive and finite");
  const double a = (x + 0.5 - mu) / s;
  const double b = (x - 0.5 - mu) / s;
  double lp = 0, dlp_da = 0, dlp_db = 0;
  if (x == 0) {
    lp = -softplus(-a);
    dlp_da = sigmoid(-a);
  } else if (x == kMaxIntensity) {
    lp = -softplus(b);
    dlp_db = -sigmoid(b);
  } else {
    // sigma(a) - sigma(b) = (e^a - e^b) / ((1 + e^a)(1 + e^b)); pick the form whose
    // exponentials cannot overflow.
    const double log_gap = std::log(-std::expm1(b - a));
    if (a + b <= 0) {
      lp = a + log_gap - softplus(a) - softplus(b);
    } else {
      lp = -b + log_gap - softplus(-a) - softplus(-b);
    }
    dlp_da = std::exp(-softplus(a) - softplus(-a) - lp);
    dlp_db = -std::exp(-softplus(b) - softplus(-b) - lp);
  }
  if (d_mu) *d_mu = -(dlp_da + dlp_db) / s;
  if (d_log_s) *d_log_s = -(dlp_da * a + dlp_db * b);
  return lp;
}

double mixture_log_pmf(int x, const MixtureParams& params, int channel, MixtureParams* grad) {
  if (channel < 0 || channel > 2) throw InvalidParameter("channel index must be 0, 1 or 2");
  const int xs[1] = {x};
  const int cs[1] = {channel};
  return mixture_impl(xs, cs, params, false, grad);
}

double coupled_pixel_log_pmf(std::array<int, 3> rgb, const MixtureParams& params, MixtureParams* grad) {
  static constexpr int cs[3] = {0, 1, 2};
  return mixture_impl(rgb, cs, params, true, grad);
}

double LogLikelihood::bits_per_dim() const {
  if (num_dims <= 0) throw InvalidParameter("log-likelihood over zero dimensions");
  return -total_nats / (static_cast<double>(num_dims) * std::numbers::ln2);
}

LogLikelihood image_log_likelihood(const Image& image, std::span<const MixtureParams> params_map) {
  const std::size_t pixels = static_cast<std::size_t>(image.height) * image.width;
  if (pixels == 0 || params_map.size() != pixels) {
    throw ShapeError("params_map has " + std::to_string(params_map.size()) + " entries for a " +
                     std::to_string(image.height) + "x" + std::to_string(image.width) + " image");
  }
  LogLikelihood ll;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::array<int, 3> rgb = {image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)};
      ll.total_nats += coupled_pixel_log_pmf(rgb, params_map[static_cast<std::size_t>(y) * image.width + x]);
    }
  }
  ll.num_dims = static_cast<long>(pixels) * 3;
  return ll;
}

std::array<int, 3> sample_pixel(const MixtureParams& params, Rng& rng) {
  params.validate();
  const auto w = params.weights();
  std::discrete_distribution<int> pick(w.begin(), w.end());
  const int k = pick(rng);
  std::uniform_real_distribution<double> unif(1e-5, 1.0 - 1e-5);
  std::array<int, 3> out{};
  std::array<double, 3> scaled{};
  for (int c = 0; c < 3; ++c) {
    double mu = params.means[c][k];
    if (c == 1) mu += kCouplingScale * params.coupling[k][kGreenFromRed] * scaled[0];
    if (c == 2) {
      mu += kCouplingScale * (params.coupling[k][kBlueFromRed] * scaled[0] + params.coupling[k][kBlueFromGreen] * scaled[1]);
    }
    const double s = std::exp(effective_log_scale(params.log_scales[c][k]));
    const double u = unif(rng);
    const double v = mu + s * (std::log(u) - std::log1p(-u));
    out[c] = static_cast<int>(std::clamp(std::nearbyint(v), 0.0, static_cast<double>(kMaxIntensity)));
    scaled[c] = scaled_intensity(out[c]);
  }
  return out;
}

}  // namespace infoplane::density
