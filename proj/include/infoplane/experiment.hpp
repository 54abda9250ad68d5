// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoplane/data.hpp"
#include "infoplane/encoder.hpp"
#include "infoplane/mi.hpp"
#include "infoplane/pixelcnn.hpp"

// Information-plane tracking runs: train an encoder with checkpoints, then fit forward and
// inverse decoders per (checkpoint, tap) and store MI records.
namespace infoplane::experiment {

// "paper": {0, 1, 10, 100, 200} clipped to total (total always included).
// "log": 0, then log-spaced unique integers up to and including total.
std::vector<int> query_schedule(int total_epochs, const std::string& preset);

struct DataSource {
  std::string kind = "shapes";  // shapes | folder
  std::string folder;
  data::ShapesSpec shapes;
};

struct ForwardBudget {
  int epochs = 50;
  int batch_size = 128;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct ProbeBudget {
  int epochs = 30;
  int batch_size = 128;
  double lr0 = 0.1;
};

struct InverseBudget {
  pixelcnn::PixelCNNConfig pixelcnn;
  int epochs = 10;
  int batch_size = 16;
  double lr = 2e-4;
  double lr_decay = 0.9999;
};

struct CheckpointEntry {
  std::string path;  // relative to the run directory
  std::string digest;
};

struct RunManifest {
  static constexpr const char* kFormat = "infoplane.manifest";
  static constexpr int kVersion = 1;

  std::uint64_t seed = 1;
  // Desk-scale default matching the synthetic corpus resolution.
  EncoderConfig encoder = [] {
    EncoderConfig c;
    c.input_size = 16;
    return c;
  }();
  TrainSchedule schedule;
  std::string query_preset = "paper";
  std::vector<int> query_epochs;  // explicit list overrides the preset
  std::vector<Tap> taps = {Tap::kH2, Tap::kH3, Tap::kH4};
  std::vector<mi::EstimatorKind> estimators = {mi::EstimatorKind::kForwardDecoder,
                                               mi::EstimatorKind::kInverseRelative};
  DataSource data;
  ForwardBudget forward;
  ProbeBudget probe;
  InverseBudget inverse;
  // Autoencoder runs compute forward MI for one of h3/h4 and copy it to the other.
  bool alias_autoencoder_forward = true;
  // Not part of the configuration digest; results do not depend on it.
  int max_parallel_jobs = 1;

  // Filled in by run_tracking.
  std::string record_store = "records.csv";
  std::map<std::string, std::string> split_digests;
  std::optional<data::Normalization> normalization;
  std::map<int, CheckpointEntry> checkpoints;
  std::vector<std::string> produced_records;

  // Effective query epochs (explicit list or preset), sorted and unique.
  std::vector<int> resolved_query_epochs() const;
  // Throws ConfigError with a dotted field path.
  void validate() const;
  // Digest over the configuration sections only; outputs are excluded.
  std::string config_digest() const;
};

nlohmann::json to_json(const RunManifest& m);
// Throws ConfigError naming the field on malformed input.
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const RunManifest& m, const std::filesystem::path& path);

struct RunReport {
  int completed = 0;
  int skipped = 0;
  int failed = 0;
  std::vector<std::string> failures;

  // 0 on success, 2 when some jobs failed.
  int exit_code() const { return failed > 0 ? 2 : 0; }
};

using Logger = std::function<void(const std::string&)>;

// Loads or generates the source data and returns the seeded three-way split.
data::SplitDataset prepare_split(const RunManifest& m);

struct PreparedRun {
  data::SplitDataset split;
  data::Normalization normalization;
};

// Writes the manifest, builds the split and makes sure every query-epoch checkpoint exists
// (training the encoder when one is missing or its digest is stale). Throws ConfigError when
// `run_dir` holds a manifest with a different configuration.
PreparedRun prepare_run(RunManifest& manifest, const std::filesystem::path& run_dir, const Logger& log = {});

// Restricts a run to a subset of jobs. Empty fields mean "all in the manifest"; `estimators`
// replaces the manifest list when set.
struct JobFilter {
  std::vector<int> epochs;
  std::vector<Tap> taps;
  std::vector<mi::EstimatorKind> estimators;
};

// Runs (or resumes) a tracking run in `run_dir`. Completed (epoch, tap, estimator) records
// are skipped.
RunReport run_tracking(RunManifest& manifest, const std::filesystem::path& run_dir, const Logger& log = {},
                       const JobFilter& filter = {});

// Paths of artifacts inside a run directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int epoch);
std::filesystem::path inverse_decoder_path(const std::filesystem::path& run_dir, int epoch, Tap tap);

}  // namespace infoplane::experiment
