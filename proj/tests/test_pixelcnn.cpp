// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "infoplane/errors.hpp"
#include "infoplane/pixelcnn.hpp"

using namespace infoplane;
using namespace infoplane::pixelcnn;

namespace {

Tensor random_tensor(const Shape& s, Rng& rng) {
  Tensor t(s);
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

Tensor random_images(int n, int size, Rng& rng) {
  Tensor t({n, 3, size, size});
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& v : t.values()) v = static_cast<float>(d(rng) / 127.5 - 1.0);
  return t;
}

PixelCNNConfig small_config(int size) {
  PixelCNNConfig c;
  c.image_size = size;
  c.filters = 8;
  c.gated_blocks = 1;
  c.components = 3;
  return c;
}

}  // namespace

TEST_CASE("config validation and hyper-layer count") {
  PixelCNNConfig c;
  CHECK(c.num_hyper_layers() == 5);
  c.image_size = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.image_size = 16;
  CHECK(c.internal_resolutions() == std::vector<int>{16, 8, 4});
}

TEST_CASE("adapter cases") {
  CHECK(adapter_case({false, 32, 16}, 8) == AdapterCase::kDownsample);
  CHECK(adapter_case({false, 64, 8}, 32) == AdapterCase::kUpsample);
  CHECK(adapter_case({false, 64, 8}, 8) == AdapterCase::kSame);
  CHECK(adapter_case({true, 256, 0}, 16) == AdapterCase::kVector);
  CHECK_THROWS_AS(adapter_case({false, 8, 12}, 8), ShapeError);

  Rng rng(1);
  nn::ParamRegistry reg;
  SUBCASE("h2 16x16x32 to 8x8 uses one strided conv") {
    CondAdapter a = make_adapter(reg, "a", {false, 32, 16}, 20, 8, rng);
    CHECK(a.convs.size() == 1);
    CHECK_FALSE(a.pool);
    CHECK(a(Var(random_tensor({2, 32, 16, 16}, rng))).shape() == Shape{2, 20, 8, 8});
  }
  SUBCASE("ratio four adds one pooling step") {
    CondAdapter a = make_adapter(reg, "a", {false, 16, 32}, 20, 8, rng);
    CHECK(a.convs.size() == 1);
    CHECK(a.pool);
    CHECK(a(Var(random_tensor({1, 16, 32, 32}, rng))).shape() == Shape{1, 20, 8, 8});
  }
  SUBCASE("h3 8x8x64 to 32x32 shuffles with r = 4") {
    CondAdapter a = make_adapter(reg, "a", {false, 64, 8}, 6, 32, rng);
    CHECK(a.shuffle == 4);
    CHECK(a(Var(random_tensor({1, 64, 8, 8}, rng))).shape() == Shape{1, 6, 32, 32});
  }
  SUBCASE("vector h4 broadcasts") {
    CondAdapter a = make_adapter(reg, "a", {true, 256, 0}, 6, 16, rng);
    const Tensor out = a(Var(random_tensor({2, 256}, rng))).value();
    REQUIRE(out.shape() == Shape{2, 6, 16, 16});
    CHECK(out.at(1, 3, 0, 0) == out.at(1, 3, 15, 7));
  }
}

TEST_CASE("adapter totality for the default encoder taps") {
  EncoderConfig enc;
  PixelCNNConfig pc;
  pc.image_size = enc.input_size;
  pc.filters = 4;
  pc.gated_blocks = 1;
  pc.components = 2;
  Rng rng(2);
  for (Tap tap : kAllTaps) {
    const TapShape ts = tap_shape(enc, tap);
    nn::ParamRegistry reg;
    for (int res : pc.internal_resolutions()) {
      CondAdapter a = make_adapter(reg, "a", ts, 8, res, rng);
      NoGradGuard g;
      CHECK(a(Var(random_tensor(ts.batch_shape(1), rng))).shape() == Shape{1, 8, res, res});
    }
  }
}

TEST_CASE("gated residual block") {
  Rng rng(3);
  nn::ParamRegistry reg;
  GatedBlock b;
  b.conv_in = nn::make_conv(reg, "i", 8, 4, 2, 3, {1, 1, 0, 1, 1}, rng);
  b.conv_out = nn::make_conv(reg, "o", 8, 8, 2, 3, {1, 1, 0, 1, 1}, rng);
  const Var x(random_tensor({2, 4, 5, 5}, rng));
  NoGradGuard g;
  const Tensor plain = gated_residual_block(b, x, Var(), Var()).value();
  CHECK(plain.shape() == x.shape());
  CHECK(gated_residual_block(b, x, Var(), Var(Tensor({2, 8, 5, 5}))).value() == plain);

  // Driving the gate half to -inf removes the update entirely.
  Tensor gate({2, 8, 5, 5});
  for (int n = 0; n < 2; ++n)
    for (int c = 4; c < 8; ++c)
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) gate.at(n, c, i, j) = -1e30f;
  CHECK(gated_residual_block(b, x, Var(), Var(gate)).value() == x.value());
}

TEST_CASE("autoregressive masking is exact at every resolution") {
  const int size = 8;
  PixelCNNConfig c = small_config(size);
  const TapShape cond{true, 5, 0};
  ConditionalPixelCNN model(c, cond, 4);
  Rng rng(5);
  const Tensor h = random_tensor({1, 5}, rng);
  const Tensor base = random_images(1, size, rng);
  NoGradGuard g;
  const Tensor ref = model.forward(base, &h).value();
  std::uniform_int_distribution<int> pos(0, size * size - 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = pos(rng);
    Tensor moved = base;
    for (int ch = 0; ch < 3; ++ch) moved.at(0, ch, p / size, p % size) += 0.7f;
    const Tensor out = model.forward(moved, &h).value();
    bool same_before = true, changed_after = false;
    for (int m = 0; m < size * size; ++m)
      for (int ch = 0; ch < ref.dim(1); ++ch) {
        const bool eq = out.at(0, ch, m / size, m % size) == ref.at(0, ch, m / size, m % size);
        if (m <= p && !eq) same_before = false;
        if (m > p && !eq) changed_after = true;
      }
    CHECK(same_before);
    if (p < size * size - 1) CHECK(changed_after);
  }
  // Conditioning reaches every position.
  const Tensor h2 = random_tensor({1, 5}, rng);
  const Tensor out = model.forward(base, &h2).value();
  for (int ch = 0; ch < 3; ++ch) CHECK(out.at(0, ch, 0, 0) != ref.at(0, ch, 0, 0));
}

TEST_CASE("mixture_nll gradient matches finite differences") {
  Rng rng(6);
  const int k = 2;
  Tensor raw = random_tensor({2, 10 * k, 2, 2}, rng);
  for (auto& v : raw.values()) v *= 0.3f;
  std::vector<Image> imgs(2, Image(2, 2));
  for (auto& im : imgs)
    for (auto& v : im.rgb) v = static_cast<std::uint8_t>(rng() % 256);
  const std::vector<const Image*> ptrs = {&imgs[0], &imgs[1]};
  Var r(raw, true);
  std::vector<double> per;
  Var loss = mixture_nll(r, ptrs, k, &per);
  CHECK(loss.value()[0] == doctest::Approx(-(per[0] + per[1]) / 2).epsilon(1e-5));
  backward(loss);
  const double eps = 1e-3;
  for (std::size_t i = 0; i < raw.size(); i += 3) {
    Tensor a = raw, b = raw;
    a[i] += static_cast<float>(eps);
    b[i] -= static_cast<float>(eps);
    std::vector<double> pa, pb;
    mixture_nll(Var(a), ptrs, k, &pa);
    mixture_nll(Var(b), ptrs, k, &pb);
    const double numeric = (-(pa[0] + pa[1]) / 2 + (pb[0] + pb[1]) / 2) / (2 * eps);
    CHECK(r.grad()[i] == doctest::Approx(numeric).epsilon(2e-2).scale(1.0));
  }
}

TEST_CASE("training lowers the likelihood below uniform and save/load round-trips") {
  data::ShapesSpec spec;
  spec.image_size = 8;
  spec.num_samples = 96;
  const data::Dataset ds = data::generate_shapes_dataset(spec, 7);
  data::Dataset train, eval;
  for (std::size_t i = 0; i < ds.size(); ++i) (i < 64 ? train : eval).items.push_back(ds.items[i]);
  train.class_names = eval.class_names = ds.class_names;

  PixelCNNConfig c = small_config(8);
  ConditionalPixelCNN model(c, std::nullopt, 8);
  InverseTrainOptions opt;
  opt.epochs = 20;
  opt.batch_size = 16;
  opt.lr = 2e-3;
  const InverseTrainResult res = train_inverse_decoder(model, train, nullptr, eval, nullptr, opt);
  REQUIRE(res.epoch_losses.size() == 20);
  CHECK(res.epoch_losses.back() < res.epoch_losses.front());
  const double bpd = -res.evaluation.mean / (8 * 8 * 3 * std::log(2.0));
  CHECK(bpd < 8.0);
  CHECK(res.evaluation.budget == 20);

  const auto path = std::filesystem::temp_directory_path() / "infoplane_pixelcnn_test.ckpt";
  save_pixelcnn(model, path);
  const ConditionalPixelCNN loaded = load_pixelcnn(path);
  Rng rng(9);
  const Tensor x = random_images(2, 8, rng);
  NoGradGuard g;
  CHECK(loaded.forward(x, nullptr).value() == model.forward(x, nullptr).value());
  std::filesystem::remove(path);

  Rng a(11), b(11);
  const auto s1 = conditional_sample(model, nullptr, 2, a);
  const auto s2 = conditional_sample(model, nullptr, 2, b);
  CHECK(s1 == s2);
  CHECK_FALSE(s1[0] == s1[1]);
}

TEST_CASE("training is bit-reproducible within one process") {
  data::TemplateDatasetSpec spec;
  spec.image_size = 4;
  spec.num_samples = 120;
  const auto tds = data::generate_template_dataset(spec, 3);
  data::Dataset train, eval;
  for (std::size_t i = 0; i < tds.samples.size(); ++i) (i < 80 ? train : eval).items.push_back(tds.samples.items[i]);
  train.class_names = eval.class_names = tds.samples.class_names;

  PixelCNNConfig c = small_config(4);
  c.levels = 2;
  c.gated_blocks = 2;
  InverseTrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 32;
  opt.lr = 2e-3;
  std::vector<double> means;
  std::vector<std::vector<char>> heap_noise;
  for (int run = 0; run < 3; ++run) {
    heap_noise.emplace_back(static_cast<std::size_t>(13 + 7 * run));
    ConditionalPixelCNN model(c, std::nullopt, 21);
    means.push_back(train_inverse_decoder(model, train, nullptr, eval, nullptr, opt).evaluation.mean);
  }
  CHECK(means[0] == means[1]);
  CHECK(means[0] == means[2]);
}
