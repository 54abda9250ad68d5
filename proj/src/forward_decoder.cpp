// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/forward_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "infoplane/core/optim.hpp"
#include "infoplane/core/serialize.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/mi.hpp"

namespace infoplane::forward {

namespace {

EncoderConfig classifier_config(EncoderConfig c) {
  c.mode = EncoderMode::kClassifier;
  return c;
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

std::vector<int> gather_labels(std::span<const int> labels, std::span<const int> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(labels[r]);
  return out;
}

// Runs `fn(rows)` over shuffled minibatches.
template <typename Fn>
void for_each_batch(std::vector<int>& order, int batch_size, std::uint64_t seed, int epoch, Fn&& fn) {
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, fmt::format("forward.epoch{}", epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    fn(std::span<const int>(order.data() + start, end - start));
  }
}

}  // namespace

ForwardDecoder::ForwardDecoder(std::shared_ptr<const Encoder> source, Tap tap, std::uint64_t seed)
    : source_(std::move(source)), tap_(tap), suffix_(classifier_config(source_->config()), seed) {}

Tensor ForwardDecoder::tap_activations(const data::Dataset& ds, const data::Normalization& norm) const {
  return compute_tap(*source_, tap_, ds, norm);
}

Var ForwardDecoder::logits(const Tensor& h, bool training) const { return suffix_.forward_from(tap_, Var(h), training); }

std::string ForwardDecoder::prefix_digest() const { return registry_digest(source_->prefix_registry(tap_)); }

ForwardDecoder make_forward_decoder(const std::filesystem::path& checkpoint, Tap tap, std::uint64_t seed,
                                    const EncoderConfig* expected) {
  auto enc = std::make_shared<const Encoder>(load_encoder(checkpoint, expected));
  return ForwardDecoder(enc, tap, seed);
}

ClassifierEvaluation evaluate_logits(const Tensor& logits, std::span<const int> labels) {
  if (logits.ndim() != 2 || logits.dim(0) != static_cast<int>(labels.size())) {
    throw ShapeError("evaluate_logits: logits " + shape_str(logits.shape()) + " do not match labels");
  }
  const int n = logits.dim(0), k = logits.dim(1);
  const Tensor logp = ops::log_softmax_rows(logits);
  ClassifierEvaluation ev;
  ev.per_example_nll.resize(n);
  long correct = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) throw InvalidParameter("label out of range");
    ev.per_example_nll[i] = -static_cast<double>(logp[static_cast<std::size_t>(i) * k + labels[i]]);
    const float* row = logits.data() + static_cast<std::size_t>(i) * k;
    if (std::max_element(row, row + k) - row == labels[i]) ++correct;
  }
  ev.mean_nll = std::accumulate(ev.per_example_nll.begin(), ev.per_example_nll.end(), 0.0) / n;
  ev.std_error = mi::standard_error(ev.per_example_nll);
  ev.accuracy = static_cast<double>(correct) / n;
  return ev;
}

ForwardTrainResult train_forward_decoder(ForwardDecoder& decoder, const data::Dataset& decoding,
                                         const data::Dataset& evaluation, const data::Normalization& norm,
                                         const ForwardTrainOptions& options) {
  const TrainSchedule& sched = options.schedule;
  if (sched.epochs < 0 || sched.batch_size < 1) throw ConfigError("forward.schedule", "invalid epochs or batch size");
  if (decoding.size() == 0 || evaluation.size() == 0) throw DataError("empty decoding or evaluation split");

  // The prefix is frozen, so its activations are computed once.
  const Tensor h_train = decoder.tap_activations(decoding, norm);
  const Tensor h_eval = decoder.tap_activations(evaluation, norm);
  const std::vector<int> labels = decoding.labels();

  nn::ParamRegistry params = decoder.trainable();
  optim::Sgd opt(params.trainable(), sched.momentum, sched.weight_decay);
  ForwardTrainResult result;
  std::vector<int> order(decoding.size());
  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    const double lr = sched.lr(epoch);
    double loss_sum = 0;
    long correct = 0;
    for_each_batch(order, sched.batch_size, options.shuffle_seed, epoch, [&](std::span<const int> rows) {
      const std::vector<int> y = gather_labels(labels, rows);
      Var logits = decoder.logits(gather_rows(h_train, rows), true);
      Var loss = ops::softmax_cross_entropy(logits, y);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw TrainingDiverged(epoch + 1, "non-finite forward decoder loss");
      backward(loss);
      opt.step(lr);
      opt.zero_grad();
      loss_sum += lv * static_cast<double>(rows.size());
      const int k = logits.dim(1);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const float* row = logits.value().data() + i * k;
        if (std::max_element(row, row + k) - row == y[i]) ++correct;
      }
    });
    EpochLog log{epoch + 1, lr, loss_sum / static_cast<double>(order.size()),
                 static_cast<double>(correct) / static_cast<double>(order.size())};
    result.logs.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  }

  NoGradGuard guard;
  const std::vector<int> eval_labels = evaluation.labels();
  std::vector<Tensor> parts;
  for (int start = 0; start < h_eval.dim(0); start += 256) {
    const int end = std::min(h_eval.dim(0), start + 256);
    parts.push_back(decoder.logits(h_eval.slice_batch(start, end), false).value());
  }
  result.evaluation = evaluate_logits(concat_batch(parts), eval_labels);
  result.evaluation.budget = sched.epochs;
  return result;
}

ClassifierEvaluation linear_probe(const Encoder& encoder, Tap tap, const data::Dataset& decoding,
                                  const data::Dataset& evaluation, const data::Normalization& norm,
                                  const ProbeOptions& options) {
  if (options.epochs < 0 || options.batch_size < 1) throw ConfigError("probe", "invalid epochs or batch size");
  auto flatten = [](const Tensor& t) {
    return t.reshaped({t.dim(0), static_cast<int>(t.size() / static_cast<std::size_t>(t.dim(0)))});
  };
  Tensor train = flatten(compute_tap(encoder, tap, decoding, norm));
  Tensor eval = flatten(compute_tap(encoder, tap, evaluation, norm));
  const int n = train.dim(0), d = train.dim(1);

  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mean[j] += train[static_cast<std::size_t>(i) * d + j];
  for (auto& m : mean) m /= n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double v = train[static_cast<std::size_t>(i) * d + j] - mean[j];
      sd[j] += v * v;
    }
  for (auto& s : sd) s = std::sqrt(s / n) + 1e-6;
  auto standardize = [&](Tensor& t) {
    for (int i = 0; i < t.dim(0); ++i)
      for (int j = 0; j < d; ++j) {
        float& v = t[static_cast<std::size_t>(i) * d + j];
        v = static_cast<float>((v - mean[j]) / sd[j]);
      }
  };
  standardize(train);
  standardize(eval);

  const int classes = encoder.config().num_classes;
  nn::ParamRegistry reg;
  Rng rng(derive_seed(options.seed, "probe.init"));
  nn::Linear probe = nn::make_linear(reg, "probe", d, classes, rng);
  optim::Sgd opt(reg.trainable(), options.momentum, 0.0);
  const std::vector<int> labels = decoding.labels();
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double lr = optim::cosine_lr(options.lr0, epoch, options.epochs);
    for_each_batch(order, options.batch_size, options.seed, epoch, [&](std::span<const int> rows) {
      Var loss = ops::softmax_cross_entropy(probe(Var(gather_rows(train, rows))), gather_labels(labels, rows));
      if (!std::isfinite(loss.value()[0])) throw TrainingDiverged(epoch + 1, "non-finite probe loss");
      backward(loss);
      opt.step(lr);
      opt.zero_grad();
    });
  }
  NoGradGuard guard;
  ClassifierEvaluation ev = evaluate_logits(probe(Var(eval)).value(), evaluation.labels());
  ev.budget = options.epochs;
  return ev;
}

}  // namespace infoplane::forward
