// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "infoplane/core/digest.hpp"
#include "infoplane/core/optim.hpp"
#include "infoplane/core/serialize.hpp"
#include "infoplane/errors.hpp"

namespace infoplane {

std::string to_string(Tap t) { return fmt::format("h{}", static_cast<int>(t) + 1); }

Tap parse_tap(const std::string& s) {
  if (s == "h1") return Tap::kH1;
  if (s == "h2") return Tap::kH2;
  if (s == "h3") return Tap::kH3;
  if (s == "h4") return Tap::kH4;
  throw InvalidParameter("unknown tap '" + s + "' (expected h1..h4)");
}

void EncoderConfig::validate() const {
  if (input_size <= 0 || input_size % 16 != 0) {
    throw ConfigError("encoder.input_size", "must be a positive multiple of 16 so h3 tiles the 4x4 pooling");
  }
  for (int i = 0; i < 3; ++i) {
    if (hyper_layer_channels[i] <= 0) {
      throw ConfigError(fmt::format("encoder.hyper_layer_channels[{}]", i), "must be positive");
    }
  }
  if (blocks_per_hyper_layer < 1) throw ConfigError("encoder.blocks_per_hyper_layer", "must be at least 1");
  if (num_classes < 2) throw ConfigError("encoder.num_classes", "must be at least 2");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("encoder.leaky_slope", "must lie in [0, 1)");
}

std::string EncoderConfig::digest() const {
  nlohmann::json j = *this;
  return sha256_hex(j.dump());
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"input_size", c.input_size},
                     {"hyper_layer_channels", c.hyper_layer_channels},
                     {"blocks_per_hyper_layer", c.blocks_per_hyper_layer},
                     {"num_classes", c.num_classes},
                     {"leaky_slope", c.leaky_slope},
                     {"mode", c.mode == EncoderMode::kClassifier ? "classifier" : "autoencoder"}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  EncoderConfig d;
  c.input_size = j.value("input_size", d.input_size);
  c.hyper_layer_channels = j.value("hyper_layer_channels", d.hyper_layer_channels);
  c.blocks_per_hyper_layer = j.value("blocks_per_hyper_layer", d.blocks_per_hyper_layer);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.leaky_slope = j.value("leaky_slope", d.leaky_slope);
  const std::string mode = j.value("mode", std::string("classifier"));
  if (mode == "classifier") {
    c.mode = EncoderMode::kClassifier;
  } else if (mode == "autoencoder") {
    c.mode = EncoderMode::kAutoencoder;
  } else {
    throw ConfigError("encoder.mode", "must be 'classifier' or 'autoencoder'");
  }
}

TapShape tap_shape(const EncoderConfig& c, Tap tap) {
  switch (tap) {
    case Tap::kH1: return {false, c.hyper_layer_channels[0], c.input_size};
    case Tap::kH2: return {false, c.hyper_layer_channels[1], c.input_size / 2};
    case Tap::kH3: return {false, c.hyper_layer_channels[2], c.input_size / 4};
    case Tap::kH4: {
      const int pooled = c.input_size / 16;
      return {true, c.hyper_layer_channels[2] * pooled * pooled, 0};
    }
  }
  throw InvalidParameter("bad tap");
}

double TrainSchedule::lr(int epoch) const { return optim::cosine_lr(lr0, epoch, epochs); }

void to_json(nlohmann::json& j, const TrainSchedule& s) {
  j = nlohmann::json{{"lr0", s.lr0},
                     {"epochs", s.epochs},
                     {"momentum", s.momentum},
                     {"weight_decay", s.weight_decay},
                     {"batch_size", s.batch_size}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s) {
  TrainSchedule d;
  s.lr0 = j.value("lr0", d.lr0);
  s.epochs = j.value("epochs", d.epochs);
  s.momentum = j.value("momentum", d.momentum);
  s.weight_decay = j.value("weight_decay", d.weight_decay);
  s.batch_size = j.value("batch_size", d.batch_size);
}

Encoder::Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  Rng rng(derive_seed(seed, "encoder_init"));
  const auto& ch = config_.hyper_layer_channels;
  const int blocks = config_.blocks_per_hyper_layer;

  stem_ = nn::make_conv(stages_[0], "stem.conv", 3, ch[0], 3, 3, ops::ConvOptions::same(3), rng, nn::Init::kHeNormal,
                        false);
  stem_bn_ = nn::make_batch_norm(stages_[0], "stem.bn", ch[0]);
  for (int h = 0; h < 3; ++h) {
    for (int b = 0; b < blocks; ++b) {
      const int cin = b == 0 ? (h == 0 ? ch[0] : ch[h - 1]) : ch[h];
      const int stride = (b == 0 && h > 0) ? 2 : 1;
      hyper_[h].push_back(make_block(stages_[h], fmt::format("h{}.block{}", h + 1, b), cin, ch[h], stride, 1, rng));
    }
  }
  if (config_.mode == EncoderMode::kClassifier) {
    head_ = nn::make_linear(stages_[3], "head.fc", tap_shape(config_, Tap::kH4).channels, config_.num_classes, rng);
  } else {
    // Mirror of the encoder: hyper-layers in reverse with upsampling in place of strides.
    for (int h = 2; h >= 0; --h) {
      for (int b = 0; b < blocks; ++b) {
        const bool last = b == blocks - 1;
        const int cout = (last && h > 0) ? ch[h - 1] : ch[h];
        const int up = (last && h > 0) ? 2 : 1;
        decoder_blocks_.push_back(
            make_block(stages_[4], fmt::format("decoder.h{}.block{}", h + 1, b), ch[h], cout, 1, up, rng));
      }
    }
    decoder_out_ =
        nn::make_conv(stages_[4], "decoder.out", ch[0], 3, 3, 3, ops::ConvOptions::same(3), rng, nn::Init::kHeNormal);
  }
  for (const auto& s : stages_) all_.extend(s, "");
}

Encoder::ResBlock Encoder::make_block(nn::ParamRegistry& reg, const std::string& name, int cin, int cout, int stride,
                                      int upsample, Rng& rng) {
  ResBlock b;
  b.upsample = upsample;
  b.conv1 = nn::make_conv(reg, name + ".conv1", cin, cout, 3, 3, ops::ConvOptions::same(3, stride), rng,
                          nn::Init::kHeNormal, false);
  b.bn1 = nn::make_batch_norm(reg, name + ".bn1", cout);
  b.conv2 = nn::make_conv(reg, name + ".conv2", cout, cout, 3, 3, ops::ConvOptions::same(3), rng, nn::Init::kHeNormal,
                          false);
  b.bn2 = nn::make_batch_norm(reg, name + ".bn2", cout);
  if (stride != 1 || cin != cout || upsample != 1) {
    b.proj = nn::make_conv(reg, name + ".proj", cin, cout, 1, 1, ops::ConvOptions{stride, 0, 0, 0, 0}, rng,
                           nn::Init::kHeNormal, false);
    b.proj_bn = nn::make_batch_norm(reg, name + ".proj_bn", cout);
  }
  return b;
}

Var Encoder::run_block(const ResBlock& b, const Var& x, bool training) const {
  const float slope = static_cast<float>(config_.leaky_slope);
  Var in = b.upsample > 1 ? ops::upsample_nearest(x, b.upsample) : x;
  Var y = ops::leaky_relu(b.bn1(b.conv1(in), training), slope);
  y = b.bn2(b.conv2(y), training);
  Var skip = b.proj ? (*b.proj_bn)((*b.proj)(in), training) : in;
  return ops::leaky_relu(ops::add(y, skip), slope);
}

Var Encoder::forward_to(Tap tap, const Var& x, bool training) const {
  const float slope = static_cast<float>(config_.leaky_slope);
  Var y = ops::leaky_relu(stem_bn_(stem_(x), training), slope);
  for (int h = 0; h < 3; ++h) {
    for (const auto& b : hyper_[h]) y = run_block(b, y, training);
    if (static_cast<int>(tap) == h) return y;
  }
  y = ops::avg_pool2d(y, 4);
  return ops::reshape(y, {y.dim(0), y.dim(1) * y.dim(2) * y.dim(3)});
}

Var Encoder::forward_from(Tap tap, const Var& h, bool training) const {
  if (!head_) throw InvalidParameter("forward_from requires a classifier head");
  Var y = h;
  for (int s = static_cast<int>(tap) + 1; s < 3; ++s) {
    for (const auto& b : hyper_[s]) y = run_block(b, y, training);
  }
  if (tap != Tap::kH4) {
    y = ops::avg_pool2d(y, 4);
    y = ops::reshape(y, {y.dim(0), y.dim(1) * y.dim(2) * y.dim(3)});
  }
  return (*head_)(y);
}

Var Encoder::run_decoder(const Var& h4, bool training) const {
  const int c3 = config_.hyper_layer_channels[2];
  const int pooled = config_.input_size / 16;
  Var y = ops::reshape(h4, {h4.dim(0), c3, pooled, pooled});
  y = ops::upsample_nearest(y, 4);
  for (const auto& b : decoder_blocks_) y = run_block(b, y, training);
  return (*decoder_out_)(y);
}

Encoder::Output Encoder::forward(const Tensor& batch, bool training) const {
  if (batch.ndim() != 4 || batch.dim(1) != 3 || batch.dim(2) != config_.input_size ||
      batch.dim(3) != config_.input_size) {
    throw ShapeError(fmt::format("encoder expects [N, 3, {0}, {0}], got {1}", config_.input_size,
                                 shape_str(batch.shape())));
  }
  const float slope = static_cast<float>(config_.leaky_slope);
  Output out;
  Var y = ops::leaky_relu(stem_bn_(stem_(Var(batch)), training), slope);
  for (int h = 0; h < 3; ++h) {
    for (const auto& b : hyper_[h]) y = run_block(b, y, training);
    out.taps[h] = y;
  }
  Var pooled = ops::avg_pool2d(y, 4);
  out.taps[3] = ops::reshape(pooled, {pooled.dim(0), pooled.dim(1) * pooled.dim(2) * pooled.dim(3)});
  out.output = head_ ? (*head_)(out.taps[3]) : run_decoder(out.taps[3], training);
  return out;
}

std::pair<Tensor, std::array<TapActivation, 4>> Encoder::forward_with_taps(const Tensor& batch, int epoch) const {
  NoGradGuard guard;
  Output out = forward(batch, false);
  std::array<TapActivation, 4> taps;
  for (int i = 0; i < 4; ++i) {
    const Tap t = kAllTaps[i];
    const TapShape ts = tap_shape(config_, t);
    taps[i].tap = t;
    taps[i].values = out.taps[i].value();
    taps[i].channels = ts.channels;
    if (!ts.is_vector) taps[i].spatial_size = ts.spatial;
    taps[i].epoch = epoch;
  }
  return {out.output.value(), std::move(taps)};
}

nn::ParamRegistry Encoder::prefix_registry(Tap tap) const {
  nn::ParamRegistry reg;
  const int last = std::min(static_cast<int>(tap), 2);
  for (int s = 0; s <= last; ++s) reg.extend(stages_[s], "");
  return reg;
}

nn::ParamRegistry Encoder::suffix_registry(Tap tap) const {
  nn::ParamRegistry reg;
  for (int s = static_cast<int>(tap) + 1; s < 3; ++s) reg.extend(stages_[s], "");
  reg.extend(stages_[3], "");
  return reg;
}

int Encoder::conv_layer_count() const {
  int n = 1;
  for (const auto& h : hyper_) {
    for (const auto& b : h) n += 2 + (b.proj ? 1 : 0);
  }
  return n;
}

void save_encoder(const Encoder& enc, int epoch, const data::Normalization& norm, const std::filesystem::path& path) {
  TensorArchive a;
  nlohmann::json meta = {{"format", EncoderCheckpoint::kFormat},
                         {"version", EncoderCheckpoint::kVersion},
                         {"config", enc.config()},
                         {"config_digest", enc.config().digest()},
                         {"seed", enc.seed()},
                         {"epoch", epoch},
                         {"normalization", {{"mean", norm.mean}, {"std", norm.stddev}}}};
  a.metadata = meta.dump();
  store_registry(enc.registry(), a);
  a.save(path);
}

Encoder load_encoder(const std::filesystem::path& path, const EncoderConfig* expected, EncoderCheckpoint* info) {
  TensorArchive a = TensorArchive::load(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(a.metadata);
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": bad checkpoint metadata: " + e.what());
  }
  if (meta.value("format", "") != EncoderCheckpoint::kFormat) throw IoError(path.string() + " is not an encoder checkpoint");
  if (meta.value("version", 0) != EncoderCheckpoint::kVersion) {
    throw IoError(path.string() + ": unsupported encoder checkpoint version");
  }
  EncoderConfig cfg = meta.at("config").get<EncoderConfig>();
  const std::string stored = meta.at("config_digest").get<std::string>();
  if (stored != cfg.digest()) throw DigestMismatch(path.string() + ": embedded config does not match its digest");
  if (expected && expected->digest() != stored) {
    throw DigestMismatch(path.string() + ": checkpoint config digest " + stored.substr(0, 12) +
                         " does not match expected " + expected->digest().substr(0, 12));
  }
  Encoder enc(cfg, meta.at("seed").get<std::uint64_t>());
  restore_registry(enc.registry(), a);
  if (info) {
    info->config = cfg;
    info->seed = enc.seed();
    info->epoch = meta.at("epoch").get<int>();
    info->normalization.mean = meta.at("normalization").at("mean").get<std::array<float, 3>>();
    info->normalization.stddev = meta.at("normalization").at("std").get<std::array<float, 3>>();
  }
  return enc;
}

std::string checkpoint_name(int epoch) { return fmt::format("encoder_e{:04d}.ckpt", epoch); }

std::vector<EpochLog> train_encoder(Encoder& enc, const data::Dataset& encoding, const data::Normalization& norm,
                                    const TrainSchedule& schedule, const EncoderTrainOptions& options) {
  if (schedule.epochs < 1 || schedule.batch_size < 1) throw ConfigError("schedule", "epochs and batch_size must be >= 1");
  if (encoding.size() == 0) throw DataError("empty encoding split");
  for (int e : options.checkpoint_epochs) {
    if (e < 0 || e > schedule.epochs) {
      throw ConfigError("query_epochs", fmt::format("checkpoint epoch {} outside [0, {}]", e, schedule.epochs));
    }
  }
  auto wants = [&](int e) {
    return std::find(options.checkpoint_epochs.begin(), options.checkpoint_epochs.end(), e) !=
           options.checkpoint_epochs.end();
  };
  if (wants(0)) save_encoder(enc, 0, norm, options.checkpoint_dir / checkpoint_name(0));

  const bool classifier = enc.config().mode == EncoderMode::kClassifier;
  optim::Sgd opt(enc.registry().trainable(), schedule.momentum, schedule.weight_decay);
  std::vector<int> order(encoding.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    Rng rng(derive_seed(options.shuffle_seed, fmt::format("encoder_shuffle_{}", epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = schedule.lr(epoch);
    double loss_sum = 0;
    long correct = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      std::span<const int> idx(order.data() + start, end - start);
      Tensor batch = data::to_tensor(encoding, idx, norm);
      auto out = enc.forward(batch, true);
      Var loss;
      if (classifier) {
        std::vector<int> labels;
        for (int i : idx) labels.push_back(encoding.items[i].label);
        loss = ops::softmax_cross_entropy(out.output, labels);
        const Tensor& logits = out.output.value();
        const int k = logits.dim(1);
        for (std::size_t n = 0; n < labels.size(); ++n) {
          const float* row = logits.data() + n * k;
          if (std::max_element(row, row + k) - row == labels[n]) ++correct;
        }
      } else {
        loss = ops::mse(out.output, batch);
      }
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingDiverged(epoch + 1, "non-finite encoder loss");
      loss_sum += lv * static_cast<double>(idx.size());
      backward(loss);
      opt.step(lr);
      opt.zero_grad();
    }
    EpochLog log;
    log.epoch = epoch + 1;
    log.lr = lr;
    log.loss = loss_sum / static_cast<double>(order.size());
    log.accuracy = classifier ? static_cast<double>(correct) / static_cast<double>(order.size()) : 0.0;
    logs.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
    if (wants(epoch + 1)) save_encoder(enc, epoch + 1, norm, options.checkpoint_dir / checkpoint_name(epoch + 1));
  }
  return logs;
}

Tensor compute_tap(const Encoder& enc, Tap tap, const data::Dataset& ds, const data::Normalization& norm,
                   int batch_size) {
  NoGradGuard guard;
  std::vector<Tensor> parts;
  std::vector<int> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t end = std::min(ds.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), static_cast<int>(start));
    parts.push_back(enc.forward_to(tap, Var(data::to_tensor(ds, idx, norm)), false).value());
  }
  return concat_batch(parts);
}

}  // namespace infoplane
