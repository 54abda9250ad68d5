// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoplane/core/nn.hpp"
#include "infoplane/data.hpp"
#include "infoplane/density.hpp"
#include "infoplane/encoder.hpp"
#include "infoplane/mi.hpp"

// Conditional PixelCNN++ used as the inverse decoder q(x | h).
//
// Two shifted streams (u sees rows above, ul sees rows above and pixels to the left) run
// through a downsampling pass and a mirrored upsampling pass with skip connections. Every
// gated residual block receives the conditioning signal, adapted to its resolution.
namespace infoplane::pixelcnn {

struct PixelCNNConfig {
  int image_size = 16;
  int filters = 32;
  int gated_blocks = 6;  // per hyper-layer of the downsampling pass
  int levels = 3;        // internal resolutions: image_size, /2, /4
  int components = density::kDefaultComponents;

  void validate() const;
  // Downsampling levels plus the mirrored upsampling levels share the bottom resolution.
  int num_hyper_layers() const { return 2 * levels - 1; }
  std::vector<int> internal_resolutions() const;
  int output_channels() const { return 10 * components; }
};

void to_json(nlohmann::json& j, const PixelCNNConfig& c);
void from_json(const nlohmann::json& j, PixelCNNConfig& c);

enum class AdapterCase { kDownsample, kUpsample, kSame, kVector };

std::string to_string(AdapterCase c);

// Which transformation maps a tap of shape `source` onto a block at `target_spatial`.
// Throws ShapeError when the spatial ratio is not a power of two.
AdapterCase adapter_case(const TapShape& source, int target_spatial);

// Maps a tap activation to a [N, channels, S, S] additive conditioning term.
struct CondAdapter {
  AdapterCase kind = AdapterCase::kSame;
  std::vector<nn::Conv2d> convs;  // strided convs (downsample) or the single pre-shuffle conv
  bool pool = false;
  int shuffle = 1;
  std::optional<nn::Linear> affine;
  int target_spatial = 0;

  Var operator()(const Var& h) const;
};

CondAdapter make_adapter(nn::ParamRegistry& reg, const std::string& name, const TapShape& source, int target_channels,
                         int target_spatial, Rng& rng);

// Shifted convolution flavours of PixelCNN++.
enum class ShiftedKind { kDown, kDownRight };

struct GatedBlock {
  ShiftedKind kind = ShiftedKind::kDown;
  nn::Conv2d conv_in;            // 2F -> F, shifted
  std::optional<nn::Conv2d> nin_skip;  // 1x1 from concat_elu(skip)
  nn::Conv2d conv_out;           // 2F -> 2F, shifted
};

// x + a * sigmoid(b), where [a, b] = conv_out(concat_elu(conv_in(concat_elu(x)) + nin(skip))) + cond.
// `skip` and `cond` may be empty Vars.
Var gated_residual_block(const GatedBlock& block, const Var& x, const Var& skip, const Var& cond);

class ConditionalPixelCNN {
 public:
  // `conditioning` empty builds the unconditional model.
  ConditionalPixelCNN(const PixelCNNConfig& config, std::optional<TapShape> conditioning, std::uint64_t seed);

  const PixelCNNConfig& config() const { return config_; }
  const std::optional<TapShape>& conditioning() const { return conditioning_; }
  std::uint64_t seed() const { return seed_; }

  // images: [N, 3, S, S] in [-1, 1]; h: [N, ...] tap batch (ignored when unconditional).
  // Returns raw network output [N, 10K, S, S].
  Var forward(const Tensor& images, const Tensor* h) const;

  // Adapter per gated block, in execution order.
  const std::vector<CondAdapter>& adapters() const { return adapters_; }

  nn::ParamRegistry& registry() { return reg_; }
  const nn::ParamRegistry& registry() const { return reg_; }

 private:
  GatedBlock make_block(const std::string& name, ShiftedKind kind, int skip_channels, Rng& rng);
  Var run_block(std::size_t index, const GatedBlock& b, const Var& x, const Var& skip, const Var& h) const;

  PixelCNNConfig config_;
  std::optional<TapShape> conditioning_;
  std::uint64_t seed_;
  nn::ParamRegistry reg_;

  nn::Conv2d u_init_, ul_init_down_, ul_init_right_;
  struct Level {
    std::vector<GatedBlock> u, ul;
  };
  std::vector<Level> up_, down_;
  std::vector<nn::Conv2d> downsize_u_, downsize_ul_;
  std::vector<nn::ConvTranspose2d> upsize_u_, upsize_ul_;
  nn::Conv2d out_;
  std::vector<CondAdapter> adapters_;
  std::vector<int> block_spatial_;
};

// Mixture parameters for pixel (y, x) of example n from the raw network output.
density::MixtureParams params_at(const Tensor& raw, int n, int y, int x, int components);

// Negative log-likelihood in nats per image, averaged over the batch. `per_example` receives
// log q(x_n | h_n) for each image.
Var mixture_nll(const Var& raw, std::span<const Image* const> images, int components,
                std::vector<double>* per_example = nullptr);

struct InverseTrainOptions {
  int epochs = 10;
  int batch_size = 16;
  double lr = 2e-4;
  double lr_decay = 0.9999;  // per epoch
  std::uint64_t shuffle_seed = 0;
  std::function<void(int epoch, double train_nats)> on_epoch;
};

struct InverseTrainResult {
  std::vector<double> epoch_losses;  // mean training NLL per image, nats
  mi::LikelihoodSummary evaluation;  // log-likelihood per image on the evaluation set
};

// Fits q(x | h) by maximum likelihood on (decoding, h_decoding) and reports the evaluation
// mean log-likelihood. h tensors are ignored for unconditional models. Throws
// TrainingDiverged on a non-finite loss.
InverseTrainResult train_inverse_decoder(ConditionalPixelCNN& model, const data::Dataset& decoding,
                                         const Tensor* h_decoding, const data::Dataset& evaluation,
                                         const Tensor* h_evaluation, const InverseTrainOptions& options);

mi::LikelihoodSummary evaluate_log_likelihood(const ConditionalPixelCNN& model, const data::Dataset& ds,
                                              const Tensor* h, int batch_size = 32);

// Raster-order ancestral sampling; one image per row of h (or `count` images when unconditional).
std::vector<Image> conditional_sample(const ConditionalPixelCNN& model, const Tensor* h, int count, Rng& rng);

void save_pixelcnn(const ConditionalPixelCNN& model, const std::filesystem::path& path);
ConditionalPixelCNN load_pixelcnn(const std::filesystem::path& path);

}  // namespace infoplane::pixelcnn
