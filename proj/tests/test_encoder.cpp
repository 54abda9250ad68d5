// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "infoplane/core/ops.hpp"
#include "infoplane/encoder.hpp"
#include "infoplane/errors.hpp"

using namespace infoplane;

namespace {

Tensor random_batch(int n, int size, Rng& rng) {
  Tensor t({n, 3, size, size});
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

EncoderConfig tiny(EncoderMode mode = EncoderMode::kClassifier) {
  EncoderConfig c;
  c.input_size = 16;
  c.hyper_layer_channels = {4, 8, 16};
  c.blocks_per_hyper_layer = 1;
  c.mode = mode;
  return c;
}

}  // namespace

TEST_CASE("default tap shapes and layer count") {
  EncoderConfig c;
  CHECK(tap_shape(c, Tap::kH1) == TapShape{false, 16, 32});
  CHECK(tap_shape(c, Tap::kH2) == TapShape{false, 32, 16});
  CHECK(tap_shape(c, Tap::kH3) == TapShape{false, 64, 8});
  CHECK(tap_shape(c, Tap::kH4) == TapShape{true, 256, 0});
  Encoder enc(c, 1);
  CHECK(enc.conv_layer_count() == 21);

  c.input_size = 16;
  CHECK(tap_shape(c, Tap::kH3) == TapShape{false, 64, 4});
  CHECK(tap_shape(c, Tap::kH4).flat_size() == 64);

  EncoderConfig shallow;
  shallow.blocks_per_hyper_layer = 1;
  CHECK(Encoder(shallow, 1).registry().num_parameters() < enc.registry().num_parameters());
}

TEST_CASE("config validation names the field") {
  EncoderConfig c;
  c.input_size = 30;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "encoder.input_size");
  }
  c = EncoderConfig{};
  c.hyper_layer_channels[1] = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(EncoderConfig{}.digest() == EncoderConfig{}.digest());
  CHECK(tiny().digest() != EncoderConfig{}.digest());
}

TEST_CASE("tap shape contract over random configs") {
  Rng rng(2);
  for (int t = 0; t < 6; ++t) {
    EncoderConfig c;
    c.input_size = 16 * (1 + static_cast<int>(rng() % 2));
    for (auto& ch : c.hyper_layer_channels) ch = 2 + static_cast<int>(rng() % 6);
    c.blocks_per_hyper_layer = 1 + static_cast<int>(rng() % 2);
    c.num_classes = 2 + static_cast<int>(rng() % 5);
    Encoder enc(c, t);
    const Tensor x = random_batch(3, c.input_size, rng);
    const auto [out, taps] = enc.forward_with_taps(x);
    CHECK(out.shape() == Shape{3, c.num_classes});
    for (Tap tap : kAllTaps) CHECK(taps[static_cast<int>(tap)].values.shape() == tap_shape(c, tap).batch_shape(3));
  }
}

TEST_CASE("forward_with_taps is deterministic and h4 pools h3") {
  Encoder enc(tiny(), 3);
  Rng rng(3);
  const Tensor x = random_batch(2, 16, rng);
  const auto a = enc.forward_with_taps(x);
  const auto b = enc.forward_with_taps(x);
  for (int i = 0; i < 4; ++i) CHECK(a.second[i].values == b.second[i].values);
  NoGradGuard g;
  const Tensor pooled = ops::avg_pool2d(Var(a.second[2].values), 4).value();
  CHECK(pooled.reshaped({2, 16}) == a.second[3].values);
  CHECK(enc.forward_from(Tap::kH2, Var(a.second[1].values), false).value() == a.first);
  CHECK(enc.forward_to(Tap::kH3, Var(x), false).value() == a.second[2].values);
}

TEST_CASE("autoencoder shapes") {
  EncoderConfig c;
  c.mode = EncoderMode::kAutoencoder;
  Encoder ae(c, 4);
  Rng rng(4);
  const auto [out, taps] = ae.forward_with_taps(random_batch(1, 32, rng));
  CHECK(out.shape() == Shape{1, 3, 32, 32});
  CHECK(taps[3].values.shape() == Shape{1, 256});
}

TEST_CASE("checkpoint round trip and digest refusal") {
  const auto dir = std::filesystem::temp_directory_path() / "infoplane_encoder_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  data::ShapesSpec spec;
  spec.num_samples = 60;
  const data::Dataset ds = data::generate_shapes_dataset(spec, 5);
  const data::Normalization norm = data::compute_normalization(ds);

  Encoder enc(tiny(), 5);
  Encoder fresh(tiny(), 5);
  TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 16;
  EncoderTrainOptions opt;
  opt.checkpoint_epochs = {0, 2};
  opt.checkpoint_dir = dir;
  const auto logs = train_encoder(enc, ds, norm, sched, opt);
  CHECK(logs.size() == 2);

  Rng rng(6);
  const Tensor x = random_batch(2, 16, rng);
  EncoderConfig expected = tiny();
  EncoderCheckpoint info;
  Encoder e0 = load_encoder(dir / checkpoint_name(0), &expected, &info);
  CHECK(info.epoch == 0);
  CHECK(e0.forward_with_taps(x).second[3].values == fresh.forward_with_taps(x).second[3].values);
  Encoder e2 = load_encoder(dir / checkpoint_name(2), &expected, &info);
  CHECK(info.epoch == 2);
  CHECK(e2.forward_with_taps(x).second[1].values == enc.forward_with_taps(x).second[1].values);
  CHECK(info.normalization.mean == norm.mean);

  EncoderConfig other = tiny();
  other.leaky_slope = 0.2;
  CHECK_THROWS_AS(load_encoder(dir / checkpoint_name(2), &other), DigestMismatch);
  CHECK_THROWS_AS(load_encoder(dir / "missing.ckpt"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("classifier beats chance within five epochs; autoencoder loss falls") {
  data::ShapesSpec spec;
  spec.num_samples = 600;
  const data::Dataset ds = data::generate_shapes_dataset(spec, 7);
  const data::Normalization norm = data::compute_normalization(ds);
  TrainSchedule sched;
  sched.epochs = 5;
  sched.batch_size = 32;
  sched.lr0 = 0.05;
  Encoder clf(tiny(), 7);
  const auto logs = train_encoder(clf, ds, norm, sched, {});
  CHECK(logs.back().accuracy > 0.1);
  CHECK(std::abs(TrainSchedule{}.lr(100) - 0.05) < 1e-12);

  Encoder ae(tiny(EncoderMode::kAutoencoder), 7);
  const auto ae_logs = train_encoder(ae, ds, norm, sched, {});
  CHECK(ae_logs[2].loss < ae_logs[0].loss);
  CHECK(ae_logs.back().loss < ae_logs.front().loss);
}
