// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: prints one PASS/FAIL line per criterion. Criteria can be selected by
// number on the command line (default: all). Work files go to $INFOPLANE_ACCEPTANCE_DIR or a
// temp directory and are kept for inspection.
//
// The exit status is non-zero only when the harness itself breaks (an exception escapes a
// criterion); a criterion that runs to completion and misses its threshold prints FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "infoplane/core/ops.hpp"
#include "infoplane/data.hpp"
#include "infoplane/density.hpp"
#include "infoplane/encoder.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/experiment.hpp"
#include "infoplane/mi.hpp"
#include "infoplane/pixelcnn.hpp"
#include "infoplane/viz.hpp"

using namespace infoplane;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path work_dir() {
  if (const char* d = std::getenv("INFOPLANE_ACCEPTANCE_DIR")) return d;
  return fs::temp_directory_path() / "infoplane_acceptance";
}

void note(const std::string& s) { std::cerr << "  " << s << std::endl; }

density::MixtureParams random_params(Rng& rng, int k) {
  std::uniform_real_distribution<double> logit(-3, 3), mean(-30, 285), log_s(-4, 4), coup(-1, 1);
  density::MixtureParams p(k);
  for (int i = 0; i < k; ++i) {
    p.logits[i] = logit(rng);
    for (int c = 0; c < 3; ++c) {
      p.means[c][i] = mean(rng);
      p.log_scales[c][i] = log_s(rng);
    }
    p.coupling[i] = {coup(rng), coup(rng), coup(rng)};
  }
  return p;
}

// 1. Every channel pmf sums to one.
Outcome density_normalization() {
  Rng rng(101);
  std::uniform_int_distribution<int> comps(1, 10);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_params(rng, comps(rng));
    for (int c = 0; c < 3; ++c) {
      double sum = 0;
      for (int x = 0; x <= density::kMaxIntensity; ++x) sum += std::exp(density::mixture_log_pmf(x, p, c));
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-6 && secs < 10.0, fmt::format("max |sum - 1| = {:.2e} over 3000 channel pmfs, {:.2f} s", worst, secs)};
}

// 2. Analytic vs central-difference gradients of the channel log-pmf.
Outcome gradient_check() {
  Rng rng(202);
  std::uniform_int_distribution<int> comps(1, 5), pixel(0, 255), chan(0, 2);
  std::uniform_real_distribution<double> logit(-2, 2), log_s(-2.5, 3), offset(-25, 25);
  double worst = 0;
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const int k = comps(rng), x = pixel(rng), c = chan(rng);
    density::MixtureParams p(k);
    for (int i = 0; i < k; ++i) {
      p.logits[i] = logit(rng);
      for (int ch = 0; ch < 3; ++ch) {
        // Means near the evaluated bin keep the log-pmf away from underflow.
        p.means[ch][i] = x + offset(rng);
        p.log_scales[ch][i] = log_s(rng);
      }
    }
    density::MixtureParams grad(k);
    density::mixture_log_pmf(x, p, c, &grad);
    const double h = 1e-6;
    auto fd = [&](double& slot) {
      const double keep = slot;
      slot = keep + h;
      const double up = density::mixture_log_pmf(x, p, c);
      slot = keep - h;
      const double down = density::mixture_log_pmf(x, p, c);
      slot = keep;
      return (up - down) / (2 * h);
    };
    auto compare = [&](double analytic, double numeric) {
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-2});
      worst = std::max(worst, rel);
      ++checked;
    };
    for (int i = 0; i < k; ++i) {
      compare(grad.logits[i], fd(p.logits[i]));
      compare(grad.means[c][i], fd(p.means[c][i]));
      compare(grad.log_scales[c][i], fd(p.log_scales[c][i]));
    }
  }
  return {worst <= 1e-4, fmt::format("max relative error {:.2e} over {} partials at 100 points", worst, checked)};
}

// 3. Output at raster position m ignores every pixel at positions >= m.
Outcome autoregressive_masking() {
  const int size = 8;
  pixelcnn::PixelCNNConfig c;
  c.image_size = size;
  c.filters = 16;
  c.gated_blocks = 2;
  c.levels = 3;
  c.components = 3;
  // Spatial conditioning exercises the upsampling adapters as well.
  pixelcnn::ConditionalPixelCNN model(c, TapShape{false, 4, 4}, 303);
  Rng rng(303);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor h({1, 4, 4, 4});
  for (auto& v : h.values()) v = u(rng);
  Tensor base({1, 3, size, size});
  for (auto& v : base.values()) v = u(rng);
  NoGradGuard guard;
  const Tensor ref = model.forward(base, &h).value();
  std::uniform_int_distribution<int> pos(0, size * size - 1);
  int violations = 0, changed_elsewhere = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int m = pos(rng);
    Tensor moved = base;
    std::uniform_int_distribution<int> later(m, size * size - 1);
    const int count = 1 + static_cast<int>(rng() % 4);
    for (int j = 0; j < count; ++j) {
      const int p = j == 0 ? m : later(rng);
      for (int ch = 0; ch < 3; ++ch) moved.at(0, ch, p / size, p % size) = u(rng);
    }
    const Tensor out = model.forward(moved, &h).value();
    for (int ch = 0; ch < out.dim(1); ++ch) {
      if (out.at(0, ch, m / size, m % size) != ref.at(0, ch, m / size, m % size)) ++violations;
    }
    if (m + 1 < size * size && out.at(0, 0, (m + 1) / size, (m + 1) % size) != ref.at(0, 0, (m + 1) / size, (m + 1) % size)) {
      ++changed_elsewhere;
    }
  }
  return {violations == 0 && changed_elsewhere > 0,
          fmt::format("{} changed outputs at the masked position over 50 perturbations; the next position responded in {}",
                      violations, changed_elsewhere)};
}

// 4. Default-config adapters produce [N, 2F, S, S] for every (tap, resolution); shuffle identity.
Outcome adapter_totality() {
  const EncoderConfig enc;
  pixelcnn::PixelCNNConfig pc;
  pc.image_size = enc.input_size;
  Rng rng(404);
  int ok = 0, total = 0;
  std::string bad;
  std::set<std::string> cases;
  for (Tap t : kAllTaps) {
    const TapShape ts = tap_shape(enc, t);
    for (int res : pc.internal_resolutions()) {
      ++total;
      nn::ParamRegistry reg;
      const auto ad = pixelcnn::make_adapter(reg, "a", ts, 2 * pc.filters, res, rng);
      cases.insert(pixelcnn::to_string(ad.kind));
      Tensor h(ts.batch_shape(2));
      std::normal_distribution<float> d;
      for (auto& v : h.values()) v = d(rng);
      NoGradGuard g;
      const Tensor out = ad(Var(h)).value();
      if (out.shape() == Shape{2, 2 * pc.filters, res, res}) {
        ++ok;
      } else {
        bad += fmt::format(" {}@{}->{}", to_string(t), res, shape_str(out.shape()));
      }
    }
  }
  int mismatches = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const int c = 1 + trial, s = 2 + trial;
    Tensor x({2, 4 * c, s, s});
    std::normal_distribution<float> d;
    for (auto& v : x.values()) v = d(rng);
    NoGradGuard g;
    const Tensor y = ops::pixel_shuffle(Var(x), 2).value();
    for (int n = 0; n < 2; ++n)
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < s; ++i)
          for (int j = 0; j < s; ++j)
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                if (y.at(n, ch, 2 * i + a, 2 * j + b) != x.at(n, ch * 4 + a * 2 + b, i, j)) ++mismatches;
  }
  std::string kinds;
  for (const auto& k : cases) kinds += (kinds.empty() ? "" : ",") + k;
  return {ok == total && mismatches == 0,
          fmt::format("{}/{} (tap, resolution) pairs shaped correctly [{}]{}; {} shuffle mismatches", ok, total, kinds,
                      bad, mismatches)};
}

// 5. Exact MI on known joints.
Outcome exact_mi_oracle() {
  mi::JointHistogram det(4, 4);
  for (int i = 0; i < 4; ++i) det.at(i, i) = 0.25;
  mi::JointHistogram ind(3, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) ind.at(i, j) = (0.2 + 0.3 * i) * (j == 0 ? 0.4 : 0.6);
  const auto two = mi::JointHistogram::from_matrix({{0.4, 0.1}, {0.1, 0.4}});
  const double a = mi::exact_mi_discrete(det), b = mi::exact_mi_discrete(ind), c = mi::exact_mi_discrete(two);
  // Direct summation of p ln(p / (p_a p_b)) for the 2x2 joint.
  const double direct = 2 * 0.4 * std::log(0.4 / 0.25) + 2 * 0.1 * std::log(0.1 / 0.25);
  const bool pass = std::abs(a - std::log(4.0)) < 1e-5 && std::abs(b) < 1e-5 && std::abs(c - 0.19274) < 1e-5 &&
                    std::abs(c - direct) < 1e-12;
  return {pass, fmt::format("deterministic {:.6f} (ln 4 = {:.6f}), independent {:.1e}, 2x2 {:.6f} (direct sum {:.6f})",
                            a, std::log(4.0), b, c, direct)};
}

// 6. Baselined inverse estimate on binary templates vs the closed form.
Outcome template_lower_bound() {
  data::TemplateDatasetSpec spec;
  spec.image_size = 4;
  spec.num_templates = 4;
  spec.noise_rate = 0.1;
  spec.num_samples = 6000;
  const auto tds = data::generate_template_dataset(spec, 606);
  const double exact = mi::exact_mi_discrete(tds.joint);

  // Samples are i.i.d. draws from a small space, so content duplicates are expected; the
  // halves are split by draw order rather than by content hash.
  data::Dataset dec, eval;
  dec.class_names = eval.class_names = tds.samples.class_names;
  const std::size_t half = tds.samples.size() / 2;
  dec.items.assign(tds.samples.items.begin(), tds.samples.items.begin() + half);
  eval.items.assign(tds.samples.items.begin() + half, tds.samples.items.end());
  auto one_hot = [&](std::size_t from, std::size_t to) {
    Tensor h({static_cast<int>(to - from), spec.num_templates}, 0.0f);
    for (std::size_t i = from; i < to; ++i) h[(i - from) * spec.num_templates + tds.template_of[i]] = 1.0f;
    return h;
  };
  const Tensor h_dec = one_hot(0, half), h_eval = one_hot(half, tds.samples.size());

  pixelcnn::PixelCNNConfig pc;
  pc.image_size = 4;
  pc.filters = 32;
  pc.gated_blocks = 2;
  pc.levels = 2;
  pc.components = 2;
  pixelcnn::InverseTrainOptions opt;
  opt.epochs = 25;
  opt.batch_size = 32;
  opt.lr = 2e-3;
  opt.lr_decay = 0.95;
  opt.on_epoch = [](int e, double nats) {
    if (e % 5 == 0) note(fmt::format("epoch {} train nll {:.4f} nats", e, nats));
  };
  note("conditional decoder");
  pixelcnn::ConditionalPixelCNN cond(pc, TapShape{true, spec.num_templates, 0}, 61);
  opt.shuffle_seed = 62;
  const auto rc = pixelcnn::train_inverse_decoder(cond, dec, &h_dec, eval, &h_eval, opt);
  note("unconditional decoder");
  pixelcnn::ConditionalPixelCNN uncond(pc, std::nullopt, 63);
  opt.shuffle_seed = 64;
  const auto ru = pixelcnn::train_inverse_decoder(uncond, dec, nullptr, eval, nullptr, opt);
  const mi::Estimate est = mi::inverse_mi_baselined(rc.evaluation, ru.evaluation);

  // Entropy floor for reference: H(x | t) and H(x) under the true joint.
  const auto px = tds.joint.row_marginal();
  const double hx = mi::entropy(px);
  const bool pass = est.value <= exact + 3 * est.std_error && std::abs(est.value - exact) <= 0.1;
  return {pass, fmt::format("estimate {:.4f} +/- {:.4f} nats vs exact {:.4f} (|diff| {:.4f}); cond nll {:.4f}, "
                            "uncond nll {:.4f}, true H(x) {:.4f}",
                            est.value, est.std_error, exact, std::abs(est.value - exact), -rc.evaluation.mean,
                            -ru.evaluation.mean, hx)};
}

// Desk-scale tracking runs shared by criteria 7-10.
experiment::RunManifest desk_manifest() {
  experiment::RunManifest m;
  m.seed = 11;
  m.encoder.input_size = 16;
  m.encoder.hyper_layer_channels = {8, 16, 32};
  m.encoder.blocks_per_hyper_layer = 1;
  m.schedule.epochs = 60;
  m.schedule.batch_size = 64;
  m.schedule.lr0 = 0.05;
  m.query_epochs = {0, 1, 5, 20, 60};
  m.taps = {Tap::kH2, Tap::kH3, Tap::kH4};
  m.estimators = {mi::EstimatorKind::kForwardDecoder, mi::EstimatorKind::kInverseRelative,
                  mi::EstimatorKind::kInverseBaselined};
  m.data.shapes.num_samples = 3000;
  m.forward.epochs = 20;
  m.forward.batch_size = 64;
  m.forward.lr0 = 0.05;
  m.inverse.pixelcnn.filters = 16;
  m.inverse.pixelcnn.gated_blocks = 1;
  m.inverse.pixelcnn.levels = 2;
  m.inverse.pixelcnn.components = 5;
  m.inverse.epochs = 8;
  m.inverse.batch_size = 16;
  m.inverse.lr = 2e-3;
  return m;
}

struct Suite {
  std::vector<mi::MIRecord> forward_records;  // every forward record from every desk run
  std::vector<mi::MIRecord> classifier;
  std::vector<mi::MIRecord> autoencoder;
  int num_classes = 10;

  const std::vector<mi::MIRecord>& classifier_run() {
    if (classifier.empty()) {
      auto m = desk_manifest();
      const fs::path dir = work_dir() / "classifier";
      note("classifier tracking run in " + dir.string());
      const auto report = experiment::run_tracking(m, dir, note);
      if (report.failed > 0) throw Error("classifier run had failed jobs: " + report.failures.front());
      classifier = mi::read_records(dir / m.record_store);
      collect(classifier);
      viz::write_text(dir / "info_plane.svg",
                      viz::info_plane_svg(classifier, mi::EstimatorKind::kForwardDecoder,
                                          mi::EstimatorKind::kInverseBaselined));
      viz::write_text(dir / "forward_mi.svg", viz::mi_curves_svg(classifier, mi::Direction::kForward));
      viz::write_text(dir / "inverse_mi.svg",
                      viz::mi_curves_svg(classifier, mi::Direction::kInverse, mi::EstimatorKind::kInverseBaselined));
    }
    return classifier;
  }

  const std::vector<mi::MIRecord>& autoencoder_run() {
    if (autoencoder.empty()) {
      auto m = desk_manifest();
      m.encoder.mode = EncoderMode::kAutoencoder;
      m.query_epochs = {60};
      m.taps = {Tap::kH4};
      m.estimators = {mi::EstimatorKind::kForwardDecoder};
      const fs::path dir = work_dir() / "autoencoder";
      note("autoencoder run in " + dir.string());
      const auto report = experiment::run_tracking(m, dir, note);
      if (report.failed > 0) throw Error("autoencoder run had failed jobs: " + report.failures.front());
      autoencoder = mi::read_records(dir / m.record_store);
      collect(autoencoder);
    }
    return autoencoder;
  }

  void collect(const std::vector<mi::MIRecord>& recs) {
    for (const auto& r : recs) {
      if (r.direction == mi::Direction::kForward) forward_records.push_back(r);
    }
  }
};

const mi::MIRecord* find(const std::vector<mi::MIRecord>& recs, int epoch, const std::string& tap, mi::EstimatorKind e) {
  for (const auto& r : recs) {
    if (r.epoch == epoch && r.tap == tap && r.estimator == e) return &r;
  }
  return nullptr;
}

// 8. Forward MI non-decreasing per tap; some tap shows a significant inverse peak before the end.
Outcome two_phase(Suite& suite) {
  const auto& recs = suite.classifier_run();
  const auto m = desk_manifest();
  const auto epochs = m.resolved_query_epochs();
  bool monotone = true;
  bool compression = false;
  std::string detail;
  for (Tap t : m.taps) {
    const std::string tap = to_string(t);
    std::string fwd = tap + " fwd:";
    std::vector<const mi::MIRecord*> series;
    for (int e : epochs) {
      const auto* f = find(recs, e, tap, mi::EstimatorKind::kForwardDecoder);
      if (!f) throw Error("missing forward record " + tap);
      fwd += fmt::format(" {:.3f}", f->value_nats);
      series.push_back(f);
    }
    for (std::size_t i = 1; i < series.size(); ++i) {
      if (series[i]->value_nats < series[i - 1]->value_nats - 0.05) monotone = false;
    }
    std::string inv = " inv:";
    const mi::MIRecord* peak = nullptr;
    const mi::MIRecord* last = nullptr;
    for (int e : epochs) {
      const auto* r = find(recs, e, tap, mi::EstimatorKind::kInverseBaselined);
      if (!r) throw Error("missing inverse record " + tap);
      inv += fmt::format(" {:.1f}", r->value_nats);
      if (!peak || r->value_nats > peak->value_nats) peak = r;
      last = r;
    }
    const double se = std::hypot(peak->uncertainty, last->uncertainty);
    const double delta = peak->value_nats - last->value_nats;
    const bool sig = peak->epoch < last->epoch && delta > 2 * se;
    compression = compression || sig;
    detail += fmt::format("[{}{} dc={:.1f} 2se={:.1f}{}] ", fwd, inv, delta, 2 * se, sig ? " *" : "");
  }
  return {monotone && compression,
          fmt::format("(a) forward non-decreasing within 0.05: {}; (b) significant compression: {}; {}",
                      monotone ? "yes" : "no", compression ? "yes" : "no", detail)};
}

// 9. Autoencoder bottleneck carries less label information than the classifier's h4.
Outcome autoencoder_contrast(Suite& suite) {
  const auto* c = find(suite.classifier_run(), 60, "h4", mi::EstimatorKind::kForwardDecoder);
  const auto* a = find(suite.autoencoder_run(), 60, "h4", mi::EstimatorKind::kForwardDecoder);
  if (!c || !a) throw Error("missing h4 forward records");
  if (c->decoder_budget != a->decoder_budget) throw Error("decoder budgets differ");
  const double se = std::hypot(c->uncertainty, a->uncertainty);
  const double gap = c->value_nats - a->value_nats;
  return {gap > 3 * se, fmt::format("classifier h4 {:.4f} +/- {:.4f}, autoencoder h4 {:.4f} +/- {:.4f} nats; gap {:.4f} "
                                    "vs 3 se {:.4f} (budget {} epochs)",
                                    c->value_nats, c->uncertainty, a->value_nats, a->uncertainty, gap, 3 * se,
                                    c->decoder_budget)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(INFOPLANE_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 10. Two fresh run-tracking invocations with the same manifest agree record by record.
Outcome determinism(Suite& suite) {
  auto m = desk_manifest();
  m.seed = 1010;
  m.schedule.epochs = 6;
  m.query_epochs = {0, 6};
  m.taps = {Tap::kH2, Tap::kH4};
  m.estimators = {mi::EstimatorKind::kForwardDecoder, mi::EstimatorKind::kProbe,
                  mi::EstimatorKind::kInverseRelative, mi::EstimatorKind::kInverseBaselined};
  m.data.shapes.num_samples = 900;
  m.forward.epochs = 5;
  m.probe.epochs = 5;
  m.inverse.epochs = 2;
  const fs::path root = work_dir() / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  experiment::save_manifest(m, root / "manifest.json");
  std::vector<std::vector<mi::MIRecord>> runs;
  for (const char* name : {"a", "b"}) {
    const int code = run_cli(fmt::format("--config {} --out {} run-tracking", (root / "manifest.json").string(),
                                         (root / name).string()));
    if (code != 0) throw Error(fmt::format("run-tracking exited with {}", code));
    runs.push_back(mi::read_records(root / name / "records.csv"));
  }
  suite.collect(runs[0]);
  double worst = 0;
  int matched = 0;
  for (const auto& r : runs[0]) {
    const auto it = std::find_if(runs[1].begin(), runs[1].end(), [&](const auto& o) { return o.key() == r.key(); });
    if (it == runs[1].end()) return {false, "record " + r.key() + " missing from the second run"};
    worst = std::max(worst, std::abs(it->value_nats - r.value_nats));
    ++matched;
  }
  const bool pass = matched > 0 && runs[0].size() == runs[1].size() && worst <= 1e-3;
  return {pass, fmt::format("{} records matched, max |difference| {:.2e} nats", matched, worst)};
}

// 7. No forward estimate exceeds ln(classes) + 3 stderr.
Outcome forward_ceiling(Suite& suite) {
  if (suite.forward_records.empty()) {
    suite.classifier_run();
    suite.autoencoder_run();
  }
  const double ceiling = std::log(static_cast<double>(suite.num_classes));
  int violations = 0;
  double max_value = -1e300;
  for (const auto& r : suite.forward_records) {
    if (r.value_nats > ceiling + 3 * r.uncertainty) ++violations;
    max_value = std::max(max_value, r.value_nats);
  }
  return {violations == 0 && !suite.forward_records.empty(),
          fmt::format("{} forward records, max {:.4f} nats vs ln {} = {:.4f}; {} violations",
                      suite.forward_records.size(), max_value, suite.num_classes, ceiling, violations)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return selected.empty() || selected.count(n); };
  fs::create_directories(work_dir());

  Suite suite;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, density_normalization},
      {2, gradient_check},
      {3, autoregressive_masking},
      {4, adapter_totality},
      {5, exact_mi_oracle},
      {6, template_lower_bound},
      {8, [&] { return two_phase(suite); }},
      {9, [&] { return autoencoder_contrast(suite); }},
      {10, [&] { return determinism(suite); }},
      {7, [&] { return forward_ceiling(suite); }},
  };
  std::map<int, std::string> lines;
  int passed = 0, failed = 0, broken = 0;
  for (const auto& [n, fn] : criteria) {
    if (!wanted(n)) continue;
    std::cerr << fmt::format("criterion {}: running", n) << std::endl;
    const auto start = std::chrono::steady_clock::now();
    std::string line;
    try {
      const Outcome o = fn();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      line = fmt::format("criterion {:>2}: {} ({:.1f} s) {}", n, o.pass ? "PASS" : "FAIL", secs, o.detail);
      (o.pass ? passed : failed) += 1;
    } catch (const std::exception& e) {
      line = fmt::format("criterion {:>2}: FAIL (error) {}", n, e.what());
      ++broken;
    }
    std::cout << line << std::endl;
    lines[n] = line;
  }
  std::cout << "\nsummary (criterion order):\n";
  for (const auto& [n, line] : lines) std::cout << line << '\n';
  std::cout << fmt::format("{} passed, {} failed, {} errored\n", passed, failed, broken);
  return broken == 0 ? 0 : 1;
}
