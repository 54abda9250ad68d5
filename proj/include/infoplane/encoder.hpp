// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoplane/core/nn.hpp"
#include "infoplane/data.hpp"

namespace infoplane {

enum class Tap { kH1 = 0, kH2 = 1, kH3 = 2, kH4 = 3 };
inline constexpr std::array<Tap, 4> kAllTaps = {Tap::kH1, Tap::kH2, Tap::kH3, Tap::kH4};

std::string to_string(Tap t);
Tap parse_tap(const std::string& s);

enum class EncoderMode { kClassifier, kAutoencoder };

struct EncoderConfig {
  int input_size = 32;
  std::array<int, 3> hyper_layer_channels = {16, 32, 64};
  int blocks_per_hyper_layer = 3;
  int num_classes = 10;
  double leaky_slope = 0.01;
  EncoderMode mode = EncoderMode::kClassifier;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Digest of the canonical JSON form; archives embed it.
  std::string digest() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Per-example shape of a tap: [C, S, S] for spatial taps, [D] for h4.
struct TapShape {
  bool is_vector = false;
  int channels = 0;
  int spatial = 0;  // 0 for vectors

  int flat_size() const { return is_vector ? channels : channels * spatial * spatial; }
  Shape batch_shape(int n) const { return is_vector ? Shape{n, channels} : Shape{n, channels, spatial, spatial}; }
  bool operator==(const TapShape&) const = default;
};

TapShape tap_shape(const EncoderConfig& config, Tap tap);

struct TapActivation {
  Tap tap = Tap::kH1;
  Tensor values;                      // [N, C, S, S] or [N, D]
  std::optional<int> spatial_size;    // empty for h4
  int channels = 0;
  int epoch = 0;
};

struct TrainSchedule {
  double lr0 = 0.1;
  int epochs = 200;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;

  double lr(int epoch) const;
};

void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

// Tapped ResNet: stem conv, three hyper-layers of residual blocks (the first block of
// hyper-layers 2 and 3 halves resolution, with a strided 1x1 projection on the skip path),
// h4 = flatten(avgpool4(h3)), then a linear classifier or a mirrored upsampling decoder.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  struct Output {
    Var output;               // logits [N, classes] or reconstruction [N, 3, S, S]
    std::array<Var, 4> taps;  // h1..h4
  };

  Output forward(const Tensor& batch, bool training) const;
  // Input -> activation at `tap`.
  Var forward_to(Tap tap, const Var& x, bool training) const;
  // Activation at `tap` -> class logits (classifier head only).
  Var forward_from(Tap tap, const Var& h, bool training) const;
  // Evaluation-mode pass without tape recording.
  std::pair<Tensor, std::array<TapActivation, 4>> forward_with_taps(const Tensor& batch, int epoch = 0) const;

  nn::ParamRegistry& registry() { return all_; }
  const nn::ParamRegistry& registry() const { return all_; }
  // Parameters strictly upstream of `tap`, and the classifier-path parameters downstream of it.
  nn::ParamRegistry prefix_registry(Tap tap) const;
  nn::ParamRegistry suffix_registry(Tap tap) const;

  // Convolutions in the encoder path, counting projection shortcuts.
  int conv_layer_count() const;

 private:
  struct ResBlock {
    nn::Conv2d conv1, conv2;
    nn::BatchNorm2d bn1, bn2;
    std::optional<nn::Conv2d> proj;
    std::optional<nn::BatchNorm2d> proj_bn;
    int upsample = 1;
  };

  ResBlock make_block(nn::ParamRegistry& reg, const std::string& name, int cin, int cout, int stride, int upsample,
                      Rng& rng);
  Var run_block(const ResBlock& b, const Var& x, bool training) const;
  Var run_decoder(const Var& h4, bool training) const;

  EncoderConfig config_;
  std::uint64_t seed_;
  nn::ParamRegistry all_;
  // Stage 0: stem + hyper-layer 1; 1, 2: hyper-layers 2, 3; 3: classifier head; 4: decoder.
  std::array<nn::ParamRegistry, 5> stages_;
  nn::Conv2d stem_;
  nn::BatchNorm2d stem_bn_;
  std::array<std::vector<ResBlock>, 3> hyper_;
  std::optional<nn::Linear> head_;
  std::vector<ResBlock> decoder_blocks_;
  std::optional<nn::Conv2d> decoder_out_;
};

struct EncoderCheckpoint {
  static constexpr const char* kFormat = "infoplane.encoder";
  static constexpr int kVersion = 1;

  EncoderConfig config;
  std::uint64_t seed = 0;
  int epoch = 0;
  data::Normalization normalization;
};

void save_encoder(const Encoder& enc, int epoch, const data::Normalization& norm, const std::filesystem::path& path);
// Loads a checkpoint; when `expected` is given, refuses on config digest mismatch.
Encoder load_encoder(const std::filesystem::path& path, const EncoderConfig* expected = nullptr,
                     EncoderCheckpoint* info = nullptr);

struct EpochLog {
  int epoch = 0;  // 1-based count of completed epochs
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;  // classifier only
};

struct EncoderTrainOptions {
  std::vector<int> checkpoint_epochs;
  std::filesystem::path checkpoint_dir;
  std::uint64_t shuffle_seed = 0;
  std::function<void(const EpochLog&)> on_epoch;
};

// Checkpoint file name for an epoch, e.g. "encoder_e0010.ckpt".
std::string checkpoint_name(int epoch);

// Trains on `encoding` and writes a checkpoint after each requested epoch (epoch 0 is the
// initialization). Returns one log row per epoch.
std::vector<EpochLog> train_encoder(Encoder& enc, const data::Dataset& encoding, const data::Normalization& norm,
                                    const TrainSchedule& schedule, const EncoderTrainOptions& options);

// Evaluation-mode activations at `tap` for a whole dataset, in batches.
Tensor compute_tap(const Encoder& enc, Tap tap, const data::Dataset& ds, const data::Normalization& norm,
                   int batch_size = 256);

}  // namespace infoplane
