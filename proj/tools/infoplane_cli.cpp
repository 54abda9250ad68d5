// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

// infoplane: train encoders, track MI over training, and render figures.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "infoplane/data.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/experiment.hpp"
#include "infoplane/image_io.hpp"
#include "infoplane/mi.hpp"
#include "infoplane/viz.hpp"

namespace fs = std::filesystem;
using namespace infoplane;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string device = "cpu";
};

void log_line(const std::string& s) { std::cerr << s << '\n'; }

void check_device(const Globals& g) {
  if (g.device != "cpu") throw ConfigError("device", "unsupported device '" + g.device + "' (only cpu is available)");
}

// Manifest from --config, else from the run directory when `existing_run` and one is there.
experiment::RunManifest load_config(const Globals& g, bool existing_run) {
  check_device(g);
  experiment::RunManifest m;
  if (!g.config.empty()) {
    m = experiment::load_manifest(g.config);
  } else if (existing_run && fs::exists(fs::path(g.out) / "manifest.json")) {
    m = experiment::load_manifest(fs::path(g.out) / "manifest.json");
  }
  if (g.seed) m.seed = *g.seed;
  m.validate();
  return m;
}

std::vector<Tap> parse_taps(const std::vector<std::string>& names) {
  std::vector<Tap> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      out.push_back(parse_tap(names[i]));
    } catch (const Error& e) {
      throw ConfigError(fmt::format("tap[{}]", i), e.what());
    }
  }
  return out;
}

std::vector<mi::EstimatorKind> parse_estimators(const std::vector<std::string>& names, mi::Direction d) {
  std::vector<mi::EstimatorKind> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    mi::EstimatorKind e;
    try {
      e = mi::parse_estimator(names[i]);
    } catch (const Error& err) {
      throw ConfigError(fmt::format("estimator[{}]", i), err.what());
    }
    if (mi::direction_of(e) != d) {
      throw ConfigError(fmt::format("estimator[{}]", i), names[i] + " is not a " + mi::to_string(d) + " estimator");
    }
    out.push_back(e);
  }
  return out;
}

std::optional<mi::EstimatorKind> optional_estimator(const std::string& name) {
  if (name.empty()) return std::nullopt;
  try {
    return mi::parse_estimator(name);
  } catch (const Error& e) {
    throw ConfigError("estimator", e.what());
  }
}

std::vector<mi::MIRecord> load_records(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("no records: " + path.string() + " does not exist");
  auto recs = mi::read_records(path);
  if (recs.empty()) throw DataError("no records in " + path.string());
  return recs;
}

int cmd_estimate(const fs::path& records_path) {
  const auto recs = load_records(records_path);
  std::cout << fmt::format("{:>6}  {:<4}  {:<18}  {:>14}  {:>10}  {:>6}\n", "epoch", "tap", "estimator", "value_nats",
                           "stderr", "budget");
  std::map<std::pair<std::string, mi::EstimatorKind>, std::vector<mi::MIRecord>> series;
  for (const auto& r : recs) {
    std::cout << fmt::format("{:>6}  {:<4}  {:<18}  {:>14.6f}  {:>10.6f}  {:>6}\n", r.epoch, r.tap,
                             mi::to_string(r.estimator), r.value_nats, r.uncertainty, r.decoder_budget);
    series[{r.tap, r.estimator}].push_back(r);
  }
  std::cout << "\ncompression delta (max over epochs minus final epoch):\n";
  for (auto& [key, s] : series) {
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
    if (s.size() < 2) continue;
    try {
      std::cout << fmt::format("  {:<4} {:<18} {:.6f}\n", key.first, mi::to_string(key.second),
                               mi::compression_delta(s));
    } catch (const BudgetMismatch& e) {
      std::cout << fmt::format("  {:<4} {:<18} refused: {}\n", key.first, mi::to_string(key.second), e.what());
    }
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"infoplane: information-plane tracking for image encoders", "infoplane"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run manifest (JSON)");
  app.add_option("--seed", g.seed, "Override the manifest seed");
  app.add_option("--out", g.out, "Run or output directory")->capture_default_str();
  app.add_option("--device", g.device, "Compute device")->capture_default_str();

  auto* train = app.add_subcommand("train-encoder", "Train the encoder and write query-epoch checkpoints");

  auto* track = app.add_subcommand("run-tracking", "Train (or resume) a full tracking run");
  int jobs = 0;
  bool compute_both = false;
  track->add_option("--jobs", jobs, "Maximum concurrent decoder jobs");
  track->add_flag("--compute-both", compute_both, "Decode autoencoder h3 and h4 separately");

  std::vector<int> epochs;
  std::vector<std::string> tap_names;
  auto* fwd = app.add_subcommand("decode-forward", "Fit forward decoders on an existing run");
  bool probe = false;
  fwd->add_option("--epochs", epochs, "Checkpoint epochs (default: all)")->delimiter(',');
  fwd->add_option("--tap", tap_names, "Taps (default: manifest taps)")->delimiter(',');
  fwd->add_flag("--probe", probe, "Use the linear probe instead of the suffix decoder");

  auto* inv = app.add_subcommand("decode-inverse", "Fit inverse decoders on an existing run");
  std::vector<std::string> inv_estimators = {"inverse_relative"};
  inv->add_option("--epochs", epochs, "Checkpoint epochs (default: all)")->delimiter(',');
  inv->add_option("--tap", tap_names, "Taps (default: manifest taps)")->delimiter(',');
  inv->add_option("--estimator", inv_estimators, "inverse_relative and/or inverse_baselined")
      ->delimiter(',')
      ->capture_default_str();

  std::string records;
  auto* est = app.add_subcommand("estimate-mi", "Print stored MI records and compression deltas");
  est->add_option("--records", records, "Record store (default: <out>/records.csv)");

  auto* plot = app.add_subcommand("plot", "Render a figure");
  std::string kind, output, fwd_est, inv_est, direction = "forward";
  int rows = 8;
  std::uint64_t grid_seed = 0;
  plot->add_option("--kind", kind, "info_plane | mi_curves | loss_curves | sample_grid")
      ->required()
      ->check(CLI::IsMember({"info_plane", "mi_curves", "loss_curves", "sample_grid"}));
  plot->add_option("--records", records, "Record store (default: <out>/records.csv)");
  plot->add_option("--output", output, "Output file (default: <out>/<kind>.svg)");
  plot->add_option("--forward-estimator", fwd_est, "Forward estimator when records hold several");
  plot->add_option("--inverse-estimator", inv_est, "Inverse estimator when records hold several");
  plot->add_option("--direction", direction, "mi_curves direction")->check(CLI::IsMember({"forward", "inverse"}));
  plot->add_option("--tap", tap_names, "sample_grid tap")->delimiter(',');
  plot->add_option("--epochs", epochs, "sample_grid epochs")->delimiter(',');
  plot->add_option("--rows", rows, "sample_grid source images");

  auto* grid = app.add_subcommand("sample-grid", "Conditional samples per checkpoint epoch (PNG)");
  grid->add_option("--tap", tap_names, "Tap the decoders condition on")->required()->delimiter(',');
  grid->add_option("--epochs", epochs, "Epochs (default: all with decoders)")->delimiter(',');
  grid->add_option("--rows", rows, "Number of source images")->capture_default_str();
  grid->add_option("--output", output, "Output PNG (default: <out>/sample_grid_<tap>.png)");
  grid->add_option("--sample-seed", grid_seed, "Sampling seed");

  auto* splits = app.add_subcommand("make-splits", "Write the three disjoint splits as image folders");

  auto* synth = app.add_subcommand("gen-synth", "Generate a synthetic dataset as an image folder");
  std::string synth_kind = "shapes";
  int samples = 0, image_size = 0, templates = 4;
  double noise = -1;
  synth->add_option("--kind", synth_kind, "shapes | template")
      ->check(CLI::IsMember({"shapes", "template"}))
      ->capture_default_str();
  synth->add_option("--samples", samples, "Number of images");
  synth->add_option("--image-size", image_size, "Image side length");
  synth->add_option("--templates", templates, "Template count (template kind)");
  synth->add_option("--noise", noise, "Pixel noise (shapes) or flip rate (template)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const fs::path out(g.out);
  try {
    if (train->parsed()) {
      auto m = load_config(g, false);
      experiment::prepare_run(m, out, log_line);
      return 0;
    }
    if (track->parsed()) {
      auto m = load_config(g, false);
      if (jobs > 0) m.max_parallel_jobs = jobs;
      if (compute_both) m.alias_autoencoder_forward = false;
      const auto report = experiment::run_tracking(m, out, log_line);
      for (const auto& f : report.failures) std::cerr << "failed: " << f << '\n';
      return report.exit_code();
    }
    if (fwd->parsed() || inv->parsed()) {
      auto m = load_config(g, true);
      experiment::JobFilter filter;
      filter.epochs = epochs;
      filter.taps = parse_taps(tap_names);
      if (fwd->parsed()) {
        filter.estimators = {probe ? mi::EstimatorKind::kProbe : mi::EstimatorKind::kForwardDecoder};
      } else {
        filter.estimators = parse_estimators(inv_estimators, mi::Direction::kInverse);
      }
      const auto report = experiment::run_tracking(m, out, log_line, filter);
      for (const auto& f : report.failures) std::cerr << "failed: " << f << '\n';
      return report.exit_code();
    }
    if (est->parsed()) {
      check_device(g);
      return cmd_estimate(records.empty() ? out / "records.csv" : fs::path(records));
    }
    if (plot->parsed() || grid->parsed()) {
      check_device(g);
      if (grid->parsed() || kind == "sample_grid") {
        const auto taps = parse_taps(tap_names);
        if (taps.size() != 1) throw ConfigError("tap", "sample_grid needs exactly one tap");
        const Image img = viz::run_sample_grid(out, taps[0], rows, grid_seed, epochs);
        const fs::path path = output.empty() ? out / ("sample_grid_" + to_string(taps[0]) + ".png") : fs::path(output);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_png(path, img);
        std::cout << path.string() << '\n';
        return 0;
      }
      std::string svg;
      if (kind == "loss_curves") {
        std::vector<fs::path> files;
        if (fs::exists(out / "logs")) {
          for (const auto& e : fs::directory_iterator(out / "logs")) {
            if (e.path().extension() == ".csv") files.push_back(e.path());
          }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("no loss logs in " + (out / "logs").string());
        std::vector<viz::Series> series;
        for (const auto& f : files) series.push_back(viz::read_loss_csv(f, f.stem().string()));
        svg = viz::loss_curves_svg(series);
      } else {
        const auto recs = load_records(records.empty() ? out / "records.csv" : fs::path(records));
        if (kind == "info_plane") {
          svg = viz::info_plane_svg(recs, optional_estimator(fwd_est), optional_estimator(inv_est));
        } else {
          const auto d = mi::parse_direction(direction);
          svg = viz::mi_curves_svg(recs, d, optional_estimator(d == mi::Direction::kForward ? fwd_est : inv_est));
        }
      }
      const fs::path path = output.empty() ? out / (kind + ".svg") : fs::path(output);
      viz::write_text(path, svg);
      std::cout << path.string() << '\n';
      return 0;
    }
    if (splits->parsed()) {
      const auto m = load_config(g, false);
      const auto split = experiment::prepare_split(m);
      const fs::path root = out / "splits";
      data::write_image_folder(split.encoding, root, "encoding");
      data::write_image_folder(split.decoding, root, "decoding");
      data::write_image_folder(split.evaluation, root, "evaluation");
      const nlohmann::json info = {{"seed", split.seed},
                                   {"truncated", split.truncated},
                                   {"digests",
                                    {{"encoding", split.encoding_digest},
                                     {"decoding", split.decoding_digest},
                                     {"evaluation", split.evaluation_digest}}}};
      viz::write_text(root / "splits.json", info.dump(2) + "\n");
      std::cout << root.string() << '\n';
      return 0;
    }
    if (synth->parsed()) {
      check_device(g);
      const std::uint64_t seed = g.seed.value_or(1);
      nlohmann::json info = {{"kind", synth_kind}, {"seed", seed}};
      data::Dataset ds;
      if (synth_kind == "shapes") {
        data::ShapesSpec spec;
        if (samples > 0) spec.num_samples = samples;
        if (image_size > 0) spec.image_size = image_size;
        if (noise >= 0) spec.pixel_noise = noise;
        ds = data::generate_shapes_dataset(spec, seed);
      } else {
        data::TemplateDatasetSpec spec;
        if (samples > 0) spec.num_samples = samples;
        if (image_size > 0) spec.image_size = image_size;
        if (noise >= 0) spec.noise_rate = noise;
        spec.num_templates = templates;
        const auto t = data::generate_template_dataset(spec, seed);
        ds = t.samples;
        info["exact_mi_nats"] = mi::exact_mi_discrete(t.joint);
        info["templates"] = t.templates;
      }
      data::write_image_folder(ds, out, "all");
      info["samples"] = ds.size();
      viz::write_text(out / "synth.json", info.dump(2) + "\n");
      std::cout << out.string() << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
