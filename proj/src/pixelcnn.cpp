// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/pixelcnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "infoplane/core/optim.hpp"
#include "infoplane/core/serialize.hpp"
#include "infoplane/errors.hpp"

namespace infoplane::pixelcnn {

namespace {

constexpr const char* kFormat = "infoplane.pixelcnn";
constexpr int kVersion = 1;
const double kLogHalfRange = std::log(127.5);

bool is_pow2(int v) { return v > 0 && std::has_single_bit(static_cast<unsigned>(v)); }

ops::ConvOptions shifted_options(ShiftedKind kind, int kw, int stride) {
  // Rows come only from above; columns are centred (down) or come only from the left.
  if (kind == ShiftedKind::kDown) return {stride, 1, 0, (kw - 1) / 2, (kw - 1) / 2};
  return {stride, 1, 0, kw - 1, 0};
}

nn::Conv2d shifted_conv(nn::ParamRegistry& reg, const std::string& name, ShiftedKind kind, int cin, int cout,
                        int stride, Rng& rng) {
  const int kw = kind == ShiftedKind::kDown ? 3 : 2;
  return nn::make_conv(reg, name, cin, cout, 2, kw, shifted_options(kind, kw, stride), rng, nn::Init::kUniformFanIn);
}

// Stride-2 transposed conv followed by the crop that keeps the shift structure.
Var shifted_deconv(const nn::ConvTranspose2d& d, ShiftedKind kind, const Var& x) {
  Var y = d(x, 1, 1);
  const int h = x.dim(2) * 2, w = x.dim(3) * 2;
  return ops::crop(y, 0, kind == ShiftedKind::kDown ? 1 : 0, h, w);
}

Tensor gather_rows(const Tensor& t, std::span<const int> rows) {
  Shape s = t.shape();
  const std::size_t stride = t.size() / static_cast<std::size_t>(s[0]);
  s[0] = static_cast<int>(rows.size());
  Tensor out(s);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(t.data() + static_cast<std::size_t>(rows[i]) * stride, stride, out.data() + i * stride);
  }
  return out;
}

void check_h(const ConditionalPixelCNN& model, const Tensor* h, std::size_t n) {
  if (!model.conditioning()) return;
  if (!h) throw InvalidParameter("conditional decoder needs conditioning activations");
  const Shape want = model.conditioning()->batch_shape(static_cast<int>(n));
  if (h->shape() != want) {
    throw ShapeError("conditioning shape " + shape_str(h->shape()) + ", expected " + shape_str(want));
  }
}

}  // namespace

void PixelCNNConfig::validate() const {
  if (levels < 1) throw ConfigError("pixelcnn.levels", "must be at least 1");
  if (image_size < 1 || image_size % (1 << (levels - 1)) != 0) {
    throw ConfigError("pixelcnn.image_size", fmt::format("must be divisible by {}", 1 << (levels - 1)));
  }
  if (filters < 1) throw ConfigError("pixelcnn.filters", "must be positive");
  if (gated_blocks < 1) throw ConfigError("pixelcnn.gated_blocks", "must be positive");
  if (components < 1) throw ConfigError("pixelcnn.components", "must be positive");
}

std::vector<int> PixelCNNConfig::internal_resolutions() const {
  std::vector<int> r;
  for (int i = 0; i < levels; ++i) r.push_back(image_size >> i);
  return r;
}

void to_json(nlohmann::json& j, const PixelCNNConfig& c) {
  j = {{"image_size", c.image_size},
       {"filters", c.filters},
       {"gated_blocks", c.gated_blocks},
       {"levels", c.levels},
       {"components", c.components}};
}

void from_json(const nlohmann::json& j, PixelCNNConfig& c) {
  PixelCNNConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.filters = j.value("filters", d.filters);
  c.gated_blocks = j.value("gated_blocks", d.gated_blocks);
  c.levels = j.value("levels", d.levels);
  c.components = j.value("components", d.components);
}

std::string to_string(AdapterCase c) {
  switch (c) {
    case AdapterCase::kDownsample: return "downsample";
    case AdapterCase::kUpsample: return "upsample";
    case AdapterCase::kSame: return "same";
    case AdapterCase::kVector: return "vector";
  }
  return "?";
}

AdapterCase adapter_case(const TapShape& source, int target_spatial) {
  if (source.is_vector) return AdapterCase::kVector;
  if (source.spatial == target_spatial) return AdapterCase::kSame;
  const int big = std::max(source.spatial, target_spatial), small = std::min(source.spatial, target_spatial);
  if (small < 1 || big % small != 0 || !is_pow2(big / small)) {
    throw ShapeError(fmt::format("no adapter from {}x{} to {}x{}", source.spatial, source.spatial, target_spatial,
                                 target_spatial));
  }
  return source.spatial > target_spatial ? AdapterCase::kDownsample : AdapterCase::kUpsample;
}

Var CondAdapter::operator()(const Var& h) const {
  switch (kind) {
    case AdapterCase::kVector: {
      Var v = (*affine)(h);
      Var zeros(Tensor({h.dim(0), v.dim(1), target_spatial, target_spatial}));
      return ops::add_channel_bias(zeros, v);
    }
    case AdapterCase::kSame: return convs[0](h);
    case AdapterCase::kUpsample: return ops::pixel_shuffle(convs[0](h), shuffle);
    case AdapterCase::kDownsample: {
      Var y = h;
      for (const auto& c : convs) y = c(y);
      return pool ? ops::avg_pool2d(y, 2) : y;
    }
  }
  throw InvalidParameter("unknown adapter case");
}

CondAdapter make_adapter(nn::ParamRegistry& reg, const std::string& name, const TapShape& source, int target_channels,
                         int target_spatial, Rng& rng) {
  CondAdapter a;
  a.kind = adapter_case(source, target_spatial);
  a.target_spatial = target_spatial;
  switch (a.kind) {
    case AdapterCase::kVector:
      a.affine = nn::make_linear(reg, name + ".affine", source.channels, target_channels, rng);
      break;
    case AdapterCase::kSame:
      a.convs.push_back(nn::make_conv(reg, name + ".conv", source.channels, target_channels, 1, 1, {}, rng,
                                      nn::Init::kUniformFanIn, false));
      break;
    case AdapterCase::kUpsample: {
      a.shuffle = target_spatial / source.spatial;
      a.convs.push_back(nn::make_conv(reg, name + ".conv", source.channels, a.shuffle * a.shuffle * target_channels, 3,
                                      3, ops::ConvOptions::same(3), rng, nn::Init::kUniformFanIn, false));
      break;
    }
    case AdapterCase::kDownsample: {
      // Stride-2 convolutions first; a final factor of two left over is handled by pooling.
      int ratio = source.spatial / target_spatial;
      int cin = source.channels;
      do {
        a.convs.push_back(nn::make_conv(reg, fmt::format("{}.conv{}", name, a.convs.size()), cin, target_channels, 3,
                                        3, ops::ConvOptions::same(3, 2), rng, nn::Init::kUniformFanIn, false));
        cin = target_channels;
        ratio /= 2;
      } while (ratio > 2);
      a.pool = ratio == 2;
      break;
    }
  }
  return a;
}

Var gated_residual_block(const GatedBlock& block, const Var& x, const Var& skip, const Var& cond) {
  Var c1 = block.conv_in(ops::concat_elu(x));
  if (skip) {
    if (!block.nin_skip) throw InvalidParameter("gated block has no skip projection");
    c1 = ops::add(c1, (*block.nin_skip)(ops::concat_elu(skip)));
  } else if (block.nin_skip) {
    throw InvalidParameter("gated block expects a skip input");
  }
  Var c2 = block.conv_out(ops::concat_elu(c1));
  if (cond) c2 = ops::add(c2, cond);
  const int channels = c2.dim(1);
  if (channels % 2 != 0) throw ShapeError("gated block needs an even channel count");
  Var a = ops::slice_channels(c2, 0, channels / 2);
  Var b = ops::slice_channels(c2, channels / 2, channels);
  return ops::add(x, ops::mul(a, ops::sigmoid(b)));
}

ConditionalPixelCNN::ConditionalPixelCNN(const PixelCNNConfig& config, std::optional<TapShape> conditioning,
                                         std::uint64_t seed)
    : config_(config), conditioning_(conditioning), seed_(seed) {
  config_.validate();
  Rng rng(derive_seed(seed, "pixelcnn.init"));
  const int f = config_.filters;
  const int nr = config_.gated_blocks;
  const int levels = config_.levels;

  // Input carries a constant ones channel so zero padding is distinguishable from data.
  u_init_ = nn::make_conv(reg_, "u_init", 4, f, 2, 3, {1, 1, 0, 1, 1}, rng, nn::Init::kUniformFanIn);
  ul_init_down_ = nn::make_conv(reg_, "ul_init_down", 4, f, 1, 3, {1, 0, 0, 1, 1}, rng, nn::Init::kUniformFanIn);
  ul_init_right_ = nn::make_conv(reg_, "ul_init_right", 4, f, 2, 1, {1, 1, 0, 0, 0}, rng, nn::Init::kUniformFanIn);

  for (int i = 0; i < levels; ++i) {
    Level lv;
    for (int b = 0; b < nr; ++b) {
      lv.u.push_back(make_block(fmt::format("up{}.u{}", i, b), ShiftedKind::kDown, 0, rng));
      block_spatial_.push_back(config_.image_size >> i);
      lv.ul.push_back(make_block(fmt::format("up{}.ul{}", i, b), ShiftedKind::kDownRight, f, rng));
      block_spatial_.push_back(config_.image_size >> i);
    }
    up_.push_back(std::move(lv));
    if (i + 1 < levels) {
      downsize_u_.push_back(shifted_conv(reg_, fmt::format("down{}.u", i), ShiftedKind::kDown, f, f, 2, rng));
      downsize_ul_.push_back(
          shifted_conv(reg_, fmt::format("down{}.ul", i), ShiftedKind::kDownRight, f, f, 2, rng));
    }
  }
  for (int i = 0; i < levels; ++i) {
    Level lv;
    const int spatial = config_.image_size >> (levels - 1 - i);
    const int count = i == 0 ? nr : nr + 1;
    for (int b = 0; b < count; ++b) {
      lv.u.push_back(make_block(fmt::format("dn{}.u{}", i, b), ShiftedKind::kDown, f, rng));
      block_spatial_.push_back(spatial);
      lv.ul.push_back(make_block(fmt::format("dn{}.ul{}", i, b), ShiftedKind::kDownRight, 2 * f, rng));
      block_spatial_.push_back(spatial);
    }
    down_.push_back(std::move(lv));
    if (i + 1 < levels) {
      upsize_u_.push_back(nn::make_conv_transpose(reg_, fmt::format("upsize{}.u", i), f, f, 2, 3, 2, rng));
      upsize_ul_.push_back(nn::make_conv_transpose(reg_, fmt::format("upsize{}.ul", i), f, f, 2, 2, 2, rng));
    }
  }
  out_ = nn::make_conv(reg_, "out", f, config_.output_channels(), 1, 1, {}, rng, nn::Init::kUniformFanIn);

  if (conditioning_) {
    for (std::size_t i = 0; i < block_spatial_.size(); ++i) {
      adapters_.push_back(
          make_adapter(reg_, fmt::format("cond{}", i), *conditioning_, 2 * f, block_spatial_[i], rng));
    }
  }
}

GatedBlock ConditionalPixelCNN::make_block(const std::string& name, ShiftedKind kind, int skip_channels, Rng& rng) {
  const int f = config_.filters;
  GatedBlock b;
  b.kind = kind;
  b.conv_in = shifted_conv(reg_, name + ".conv_in", kind, 2 * f, f, 1, rng);
  if (skip_channels > 0) {
    b.nin_skip =
        nn::make_conv(reg_, name + ".nin_skip", 2 * skip_channels, f, 1, 1, {}, rng, nn::Init::kUniformFanIn);
  }
  b.conv_out = shifted_conv(reg_, name + ".conv_out", kind, 2 * f, 2 * f, 1, rng);
  return b;
}

Var ConditionalPixelCNN::run_block(std::size_t index, const GatedBlock& b, const Var& x, const Var& skip,
                                   const Var& h) const {
  Var cond;
  if (conditioning_) cond = adapters_[index](h);
  return gated_residual_block(b, x, skip, cond);
}

Var ConditionalPixelCNN::forward(const Tensor& images, const Tensor* h) const {
  const int s = config_.image_size;
  if (images.ndim() != 4 || images.dim(1) != 3 || images.dim(2) != s || images.dim(3) != s) {
    throw ShapeError(fmt::format("pixelcnn expects [N, 3, {0}, {0}] input, got {1}", s, shape_str(images.shape())));
  }
  const int n = images.dim(0);
  check_h(*this, h, static_cast<std::size_t>(n));
  Var hv = conditioning_ ? Var(*h) : Var();

  Var x = ops::concat_channels(Var(images), Var(Tensor({n, 1, s, s}, 1.0f)));
  std::vector<Var> u_list, ul_list;
  Var u = ops::shift(u_init_(x), 1, 0);
  Var ul = ops::add(ops::shift(ul_init_down_(x), 1, 0), ops::shift(ul_init_right_(x), 0, 1));
  u_list.push_back(u);
  ul_list.push_back(ul);

  std::size_t block = 0;
  const int levels = config_.levels;
  for (int i = 0; i < levels; ++i) {
    for (std::size_t b = 0; b < up_[i].u.size(); ++b) {
      u = run_block(block++, up_[i].u[b], u, Var(), hv);
      ul = run_block(block++, up_[i].ul[b], ul, u, hv);
      u_list.push_back(u);
      ul_list.push_back(ul);
    }
    if (i + 1 < levels) {
      u = downsize_u_[i](u);
      ul = downsize_ul_[i](ul);
      u_list.push_back(u);
      ul_list.push_back(ul);
    }
  }

  u = u_list.back();
  u_list.pop_back();
  ul = ul_list.back();
  ul_list.pop_back();
  for (int i = 0; i < levels; ++i) {
    for (std::size_t b = 0; b < down_[i].u.size(); ++b) {
      u = run_block(block++, down_[i].u[b], u, u_list.back(), hv);
      u_list.pop_back();
      ul = run_block(block++, down_[i].ul[b], ul, ops::concat_channels(u, ul_list.back()), hv);
      ul_list.pop_back();
    }
    if (i + 1 < levels) {
      u = shifted_deconv(upsize_u_[i], ShiftedKind::kDown, u);
      ul = shifted_deconv(upsize_ul_[i], ShiftedKind::kDownRight, ul);
    }
  }
  return out_(ops::elu(ul));
}

density::MixtureParams params_at(const Tensor& raw, int n, int y, int x, int components) {
  const int k = components;
  density::MixtureParams p(k);
  auto v = [&](int ch) { return static_cast<double>(raw.at(n, ch, y, x)); };
  for (int i = 0; i < k; ++i) {
    p.logits[i] = v(i);
    for (int c = 0; c < 3; ++c) {
      p.means[c][i] = 127.5 * (1.0 + v(k + c * k + i));
      p.log_scales[c][i] = v(4 * k + c * k + i) + kLogHalfRange;
    }
    for (int j = 0; j < 3; ++j) p.coupling[i][j] = std::tanh(v(7 * k + j * k + i));
  }
  return p;
}

Var mixture_nll(const Var& raw, std::span<const Image* const> images, int components,
                std::vector<double>* per_example) {
  const Tensor& r = raw.value();
  const int n = r.dim(0), h = r.dim(2), w = r.dim(3), k = components;
  if (r.dim(1) != 10 * k || static_cast<int>(images.size()) != n) {
    throw ShapeError("mixture_nll: output " + shape_str(r.shape()) + " does not match the batch");
  }
  const bool need_grad = raw.requires_grad() && grad_enabled();
  Tensor g = need_grad ? Tensor(r.shape()) : Tensor();
  std::vector<double> ll(n, 0.0);
  density::MixtureParams grad(k);
  for (int b = 0; b < n; ++b) {
    const Image& img = *images[b];
    if (img.height != h || img.width != w) throw ShapeError("mixture_nll: image size mismatch");
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto p = params_at(r, b, y, x, k);
        const std::array<int, 3> rgb = {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
        if (!need_grad) {
          ll[b] += density::coupled_pixel_log_pmf(rgb, p);
          continue;
        }
        std::fill(grad.logits.begin(), grad.logits.end(), 0.0);
        for (int c = 0; c < 3; ++c) {
          std::fill(grad.means[c].begin(), grad.means[c].end(), 0.0);
          std::fill(grad.log_scales[c].begin(), grad.log_scales[c].end(), 0.0);
        }
        std::fill(grad.coupling.begin(), grad.coupling.end(), std::array<double, 3>{0, 0, 0});
        ll[b] += density::coupled_pixel_log_pmf(rgb, p, &grad);
        // Loss is -mean_n log q, so each slot gets -dlogq / N.
        const double scale = -1.0 / n;
        for (int i = 0; i < k; ++i) {
          g.at(b, i, y, x) = static_cast<float>(scale * grad.logits[i]);
          for (int c = 0; c < 3; ++c) {
            g.at(b, k + c * k + i, y, x) = static_cast<float>(scale * grad.means[c][i] * 127.5);
            g.at(b, 4 * k + c * k + i, y, x) = static_cast<float>(scale * grad.log_scales[c][i]);
          }
          for (int j = 0; j < 3; ++j) {
            g.at(b, 7 * k + j * k + i, y, x) =
                static_cast<float>(scale * grad.coupling[i][j] * (1.0 - p.coupling[i][j] * p.coupling[i][j]));
          }
        }
      }
    }
  }
  const double mean_ll = std::accumulate(ll.begin(), ll.end(), 0.0) / n;
  if (per_example) *per_example = ll;
  Tensor loss({1}, static_cast<float>(-mean_ll));
  if (!need_grad) return Var(loss);
  return make_result(std::move(loss), {raw}, [g = std::move(g)](Node& self) {
    Tensor& gi = self.inputs[0]->grad_buffer();
    const float up = self.grad[0];
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += up * g[i];
  });
}

mi::LikelihoodSummary evaluate_log_likelihood(const ConditionalPixelCNN& model, const data::Dataset& ds,
                                              const Tensor* h, int batch_size) {
  if (ds.size() == 0) throw DataError("empty evaluation set");
  check_h(model, h, ds.size());
  NoGradGuard guard;
  mi::LikelihoodSummary out;
  for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(ds.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Image*> imgs;
    std::vector<int> rows;
    for (std::size_t i = start; i < end; ++i) {
      imgs.push_back(&ds.items[i].image);
      rows.push_back(static_cast<int>(i));
    }
    Tensor hb;
    if (model.conditioning()) hb = gather_rows(*h, rows);
    Var raw = model.forward(data::to_unit_range(imgs), model.conditioning() ? &hb : nullptr);
    std::vector<double> ll;
    mixture_nll(raw, imgs, model.config().components, &ll);
    out.per_example.insert(out.per_example.end(), ll.begin(), ll.end());
  }
  out.mean = std::accumulate(out.per_example.begin(), out.per_example.end(), 0.0) /
             static_cast<double>(out.per_example.size());
  out.std_error = mi::standard_error(out.per_example);
  return out;
}

InverseTrainResult train_inverse_decoder(ConditionalPixelCNN& model, const data::Dataset& decoding,
                                         const Tensor* h_decoding, const data::Dataset& evaluation,
                                         const Tensor* h_evaluation, const InverseTrainOptions& options) {
  if (decoding.size() == 0) throw DataError("empty decoding set");
  if (options.epochs < 0 || options.batch_size < 1) throw InvalidParameter("invalid inverse decoder schedule");
  check_h(model, h_decoding, decoding.size());
  const bool cond = model.conditioning().has_value();
  optim::Adam adam(model.registry().trainable());
  InverseTrainResult result;
  std::vector<int> order(decoding.size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(options.shuffle_seed, fmt::format("inverse.epoch{}", epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = options.lr * std::pow(options.lr_decay, epoch);
    double total = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      std::span<const int> rows(order.data() + start, end - start);
      std::vector<const Image*> imgs;
      for (int r : rows) imgs.push_back(&decoding.items[r].image);
      Tensor hb;
      if (cond) hb = gather_rows(*h_decoding, rows);
      adam.zero_grad();
      Var raw = model.forward(data::to_unit_range(imgs), cond ? &hb : nullptr);
      Var loss = mixture_nll(raw, imgs, model.config().components);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw TrainingDiverged(epoch + 1, "non-finite decoder likelihood");
      backward(loss);
      adam.step(lr);
      total += value * static_cast<double>(rows.size());
      seen += rows.size();
    }
    result.epoch_losses.push_back(total / static_cast<double>(seen));
    if (options.on_epoch) options.on_epoch(epoch + 1, result.epoch_losses.back());
  }
  result.evaluation = evaluate_log_likelihood(model, evaluation, h_evaluation);
  result.evaluation.budget = options.epochs;
  return result;
}

std::vector<Image> conditional_sample(const ConditionalPixelCNN& model, const Tensor* h, int count, Rng& rng) {
  const bool cond = model.conditioning().has_value();
  if (cond) {
    if (!h) throw InvalidParameter("conditional decoder needs conditioning activations");
    count = h->dim(0);
    check_h(model, h, static_cast<std::size_t>(count));
  }
  const int s = model.config().image_size, k = model.config().components;
  std::vector<Image> out(static_cast<std::size_t>(count), Image(s, s));
  Tensor x({count, 3, s, s});
  NoGradGuard guard;
  for (int y = 0; y < s; ++y) {
    for (int xx = 0; xx < s; ++xx) {
      const Tensor raw = model.forward(x, cond ? h : nullptr).value();
      for (int n = 0; n < count; ++n) {
        const auto rgb = density::sample_pixel(params_at(raw, n, y, xx, k), rng);
        for (int c = 0; c < 3; ++c) {
          out[n].at(y, xx, c) = static_cast<std::uint8_t>(rgb[c]);
          x.at(n, c, y, xx) = static_cast<float>(rgb[c] / 127.5 - 1.0);
        }
      }
    }
  }
  return out;
}

void save_pixelcnn(const ConditionalPixelCNN& model, const std::filesystem::path& path) {
  nlohmann::json meta = {{"format", kFormat}, {"version", kVersion}, {"config", model.config()},
                         {"seed", model.seed()}};
  if (const auto& c = model.conditioning()) {
    meta["conditioning"] = {{"is_vector", c->is_vector}, {"channels", c->channels}, {"spatial", c->spatial}};
  } else {
    meta["conditioning"] = nullptr;
  }
  TensorArchive archive;
  archive.metadata = meta.dump();
  store_registry(model.registry(), archive);
  archive.save(path);
}

ConditionalPixelCNN load_pixelcnn(const std::filesystem::path& path) {
  const TensorArchive archive = TensorArchive::load(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(archive.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": unreadable decoder metadata");
  }
  if (meta.value("format", "") != kFormat || meta.value("version", 0) != kVersion) {
    throw IoError(path.string() + ": not a pixelcnn archive of a supported version");
  }
  std::optional<TapShape> cond;
  if (!meta["conditioning"].is_null()) {
    const auto& c = meta["conditioning"];
    cond = TapShape{c.at("is_vector").get<bool>(), c.at("channels").get<int>(), c.at("spatial").get<int>()};
  }
  ConditionalPixelCNN model(meta.at("config").get<PixelCNNConfig>(), cond, meta.at("seed").get<std::uint64_t>());
  restore_registry(model.registry(), archive);
  return model;
}

}  // namespace infoplane::pixelcnn
