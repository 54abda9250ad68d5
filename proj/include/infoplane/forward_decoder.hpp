// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "infoplane/data.hpp"
#include "infoplane/encoder.hpp"

// Forward decoders bound I(y; h) with the cross-entropy of a classifier reading h.
namespace infoplane::forward {

// Frozen encoder prefix up to `tap` plus a freshly initialized classifier suffix.
class ForwardDecoder {
 public:
  ForwardDecoder(std::shared_ptr<const Encoder> source, Tap tap, std::uint64_t seed);

  Tap tap() const { return tap_; }
  const Encoder& source() const { return *source_; }
  Encoder& suffix_model() { return suffix_; }

  // Activations at the tap from the frozen prefix (evaluation mode).
  Tensor tap_activations(const data::Dataset& ds, const data::Normalization& norm) const;
  // Class logits from tap activations.
  Var logits(const Tensor& h, bool training) const;

  nn::ParamRegistry trainable() const { return suffix_.suffix_registry(tap_); }
  // Digest of the frozen prefix parameters and statistics.
  std::string prefix_digest() const;

 private:
  std::shared_ptr<const Encoder> source_;
  Tap tap_;
  Encoder suffix_;
};

// Loads the checkpoint (refusing on config digest mismatch when `expected` is given) and
// builds a decoder reading `tap`.
ForwardDecoder make_forward_decoder(const std::filesystem::path& checkpoint, Tap tap, std::uint64_t seed,
                                    const EncoderConfig* expected = nullptr);

struct ForwardTrainOptions {
  TrainSchedule schedule = [] {
    TrainSchedule s;
    s.epochs = 50;
    return s;
  }();
  std::uint64_t shuffle_seed = 0;
  std::function<void(const EpochLog&)> on_epoch;
};

struct ClassifierEvaluation {
  double mean_nll = 0.0;  // nats per example
  double std_error = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_example_nll;
  int budget = 0;  // training epochs
};

// Mean NLL and accuracy of `logits` [N, K] against labels.
ClassifierEvaluation evaluate_logits(const Tensor& logits, std::span<const int> labels);

struct ForwardTrainResult {
  ClassifierEvaluation evaluation;
  std::vector<EpochLog> logs;
};

// Trains the suffix on the decoding split and evaluates on the evaluation split. Throws
// TrainingDiverged on a non-finite loss.
ForwardTrainResult train_forward_decoder(ForwardDecoder& decoder, const data::Dataset& decoding,
                                         const data::Dataset& evaluation, const data::Normalization& norm,
                                         const ForwardTrainOptions& options);

struct ProbeOptions {
  int epochs = 30;
  double lr0 = 0.1;
  double momentum = 0.9;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

// Affine classifier on the flattened tap, trained with SGD and no weight decay. Features are
// standardized with decoding-split statistics, which keeps the map affine.
ClassifierEvaluation linear_probe(const Encoder& encoder, Tap tap, const data::Dataset& decoding,
                                  const data::Dataset& evaluation, const data::Normalization& norm,
                                  const ProbeOptions& options);

}  // namespace infoplane::forward
