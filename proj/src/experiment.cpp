// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "infoplane/core/digest.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/forward_decoder.hpp"

namespace infoplane::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> query_schedule(int total_epochs, const std::string& preset) {
  if (total_epochs < 0) throw InvalidParameter("query schedule: negative epoch count");
  std::set<int> out{0, total_epochs};
  if (preset == "paper") {
    for (int e : {1, 10, 100, 200}) {
      if (e <= total_epochs) out.insert(e);
    }
  } else if (preset == "log") {
    if (total_epochs >= 1) {
      const int points = 8;
      for (int i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) / (points - 1);
        out.insert(static_cast<int>(std::lround(std::pow(static_cast<double>(total_epochs), t))));
      }
    }
  } else {
    throw ConfigError("query.preset", "unknown preset '" + preset + "' (expected paper or log)");
  }
  return {out.begin(), out.end()};
}

std::vector<int> RunManifest::resolved_query_epochs() const {
  if (query_epochs.empty()) return query_schedule(schedule.epochs, query_preset);
  std::set<int> s(query_epochs.begin(), query_epochs.end());
  return {s.begin(), s.end()};
}

void RunManifest::validate() const {
  encoder.validate();
  if (schedule.epochs < 1) throw ConfigError("schedule.epochs", "must be at least 1");
  if (schedule.batch_size < 1) throw ConfigError("schedule.batch_size", "must be at least 1");
  if (!(schedule.lr0 > 0)) throw ConfigError("schedule.lr0", "must be positive");
  if (query_epochs.empty()) {
    query_schedule(schedule.epochs, query_preset);
  } else {
    for (std::size_t i = 0; i < query_epochs.size(); ++i) {
      if (query_epochs[i] < 0 || query_epochs[i] > schedule.epochs) {
        throw ConfigError(fmt::format("query.epochs[{}]", i), "outside [0, schedule.epochs]");
      }
    }
  }
  if (taps.empty()) throw ConfigError("taps", "at least one tap is required");
  if (estimators.empty()) throw ConfigError("estimators", "at least one estimator is required");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    if (estimators[i] == mi::EstimatorKind::kExactOracle) {
      throw ConfigError(fmt::format("estimators[{}]", i), "exact_oracle applies to synthetic data only");
    }
  }
  if (data.kind == "shapes") {
    if (data.shapes.image_size != encoder.input_size) {
      throw ConfigError("data.shapes.image_size", "must equal encoder.input_size");
    }
    if (data.shapes.num_classes != encoder.num_classes) {
      throw ConfigError("data.shapes.num_classes", "must equal encoder.num_classes");
    }
    if (data.shapes.num_samples < 3) throw ConfigError("data.shapes.num_samples", "must be at least 3");
  } else if (data.kind == "folder") {
    if (data.folder.empty()) throw ConfigError("data.folder", "required when data.kind is folder");
  } else {
    throw ConfigError("data.kind", "unknown data kind '" + data.kind + "' (expected shapes or folder)");
  }
  if (forward.epochs < 0) throw ConfigError("forward.epochs", "must be non-negative");
  if (forward.batch_size < 1) throw ConfigError("forward.batch_size", "must be at least 1");
  if (probe.epochs < 0) throw ConfigError("probe.epochs", "must be non-negative");
  if (probe.batch_size < 1) throw ConfigError("probe.batch_size", "must be at least 1");
  try {
    inverse.pixelcnn.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("inverse." + e.field(), e.what());
  }
  if (inverse.pixelcnn.image_size != encoder.input_size) {
    throw ConfigError("inverse.pixelcnn.image_size", "must equal encoder.input_size");
  }
  if (inverse.epochs < 0) throw ConfigError("inverse.epochs", "must be non-negative");
  if (inverse.batch_size < 1) throw ConfigError("inverse.batch_size", "must be at least 1");
  if (!(inverse.lr > 0)) throw ConfigError("inverse.lr", "must be positive");
  if (max_parallel_jobs < 1) throw ConfigError("max_parallel_jobs", "must be at least 1");
  for (Tap t : taps) {
    try {
      (void)pixelcnn::adapter_case(tap_shape(encoder, t), inverse.pixelcnn.image_size);
    } catch (const ShapeError& e) {
      throw ConfigError("taps", e.what());
    }
  }
}

namespace {

json config_json(const RunManifest& m) {
  json taps = json::array();
  for (Tap t : m.taps) taps.push_back(to_string(t));
  json est = json::array();
  for (auto e : m.estimators) est.push_back(mi::to_string(e));
  return json{
      {"seed", m.seed},
      {"encoder", m.encoder},
      {"schedule", m.schedule},
      {"query", {{"preset", m.query_preset}, {"epochs", m.query_epochs}}},
      {"taps", taps},
      {"estimators", est},
      {"data",
       {{"kind", m.data.kind},
        {"folder", m.data.folder},
        {"shapes",
         {{"image_size", m.data.shapes.image_size},
          {"num_classes", m.data.shapes.num_classes},
          {"num_samples", m.data.shapes.num_samples},
          {"pixel_noise", m.data.shapes.pixel_noise}}}}},
      {"forward",
       {{"epochs", m.forward.epochs},
        {"batch_size", m.forward.batch_size},
        {"lr0", m.forward.lr0},
        {"momentum", m.forward.momentum},
        {"weight_decay", m.forward.weight_decay}}},
      {"probe", {{"epochs", m.probe.epochs}, {"batch_size", m.probe.batch_size}, {"lr0", m.probe.lr0}}},
      {"inverse",
       {{"pixelcnn", m.inverse.pixelcnn},
        {"epochs", m.inverse.epochs},
        {"batch_size", m.inverse.batch_size},
        {"lr", m.inverse.lr},
        {"lr_decay", m.inverse.lr_decay}}},
      {"alias_autoencoder_forward", m.alias_autoencoder_forward},
  };
}

// Reads `j[key]` into `out` when present, reporting type errors against `field`.
template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& field) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

}  // namespace

std::string RunManifest::config_digest() const { return sha256_hex(config_json(*this).dump()); }

json to_json(const RunManifest& m) {
  json j = config_json(m);
  j["format"] = RunManifest::kFormat;
  j["version"] = RunManifest::kVersion;
  j["max_parallel_jobs"] = m.max_parallel_jobs;
  json ckpts = json::object();
  for (const auto& [epoch, c] : m.checkpoints) ckpts[std::to_string(epoch)] = {{"path", c.path}, {"digest", c.digest}};
  json outputs = {{"record_store", m.record_store},
                  {"split_digests", m.split_digests},
                  {"checkpoints", ckpts},
                  {"records", m.produced_records},
                  {"config_digest", m.config_digest()}};
  if (m.normalization) {
    outputs["normalization"] = {{"mean", m.normalization->mean}, {"std", m.normalization->stddev}};
  }
  j["outputs"] = outputs;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest", "expected a JSON object");
  if (j.contains("format") && j["format"] != RunManifest::kFormat) {
    throw ConfigError("format", "not an infoplane manifest");
  }
  if (j.contains("version") && j["version"] != RunManifest::kVersion) {
    throw ConfigError("version", "unsupported manifest version");
  }
  RunManifest m;
  read_opt(j, "seed", m.seed, "seed");
  if (j.contains("encoder")) {
    try {
      m.encoder = j["encoder"].get<EncoderConfig>();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("encoder", e.what());
    }
  }
  if (j.contains("schedule")) {
    try {
      m.schedule = j["schedule"].get<TrainSchedule>();
    } catch (const std::exception& e) {
      throw ConfigError("schedule", e.what());
    }
  }
  if (j.contains("query")) {
    const json& q = j["query"];
    read_opt(q, "preset", m.query_preset, "query.preset");
    read_opt(q, "epochs", m.query_epochs, "query.epochs");
  }
  if (j.contains("taps")) {
    std::vector<std::string> names;
    read_opt(j, "taps", names, "taps");
    m.taps.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        m.taps.push_back(parse_tap(names[i]));
      } catch (const Error& e) {
        throw ConfigError(fmt::format("taps[{}]", i), e.what());
      }
    }
  }
  if (j.contains("estimators")) {
    std::vector<std::string> names;
    read_opt(j, "estimators", names, "estimators");
    m.estimators.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        m.estimators.push_back(mi::parse_estimator(names[i]));
      } catch (const Error& e) {
        throw ConfigError(fmt::format("estimators[{}]", i), e.what());
      }
    }
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    read_opt(d, "kind", m.data.kind, "data.kind");
    read_opt(d, "folder", m.data.folder, "data.folder");
    if (d.contains("shapes")) {
      const json& s = d["shapes"];
      read_opt(s, "image_size", m.data.shapes.image_size, "data.shapes.image_size");
      read_opt(s, "num_classes", m.data.shapes.num_classes, "data.shapes.num_classes");
      read_opt(s, "num_samples", m.data.shapes.num_samples, "data.shapes.num_samples");
      read_opt(s, "pixel_noise", m.data.shapes.pixel_noise, "data.shapes.pixel_noise");
    }
  }
  if (j.contains("forward")) {
    const json& f = j["forward"];
    read_opt(f, "epochs", m.forward.epochs, "forward.epochs");
    read_opt(f, "batch_size", m.forward.batch_size, "forward.batch_size");
    read_opt(f, "lr0", m.forward.lr0, "forward.lr0");
    read_opt(f, "momentum", m.forward.momentum, "forward.momentum");
    read_opt(f, "weight_decay", m.forward.weight_decay, "forward.weight_decay");
  }
  if (j.contains("probe")) {
    const json& p = j["probe"];
    read_opt(p, "epochs", m.probe.epochs, "probe.epochs");
    read_opt(p, "batch_size", m.probe.batch_size, "probe.batch_size");
    read_opt(p, "lr0", m.probe.lr0, "probe.lr0");
  }
  if (j.contains("inverse")) {
    const json& v = j["inverse"];
    if (v.contains("pixelcnn")) {
      try {
        m.inverse.pixelcnn = v["pixelcnn"].get<pixelcnn::PixelCNNConfig>();
      } catch (const ConfigError& e) {
        throw ConfigError("inverse." + e.field(), e.what());
      } catch (const std::exception& e) {
        throw ConfigError("inverse.pixelcnn", e.what());
      }
    }
    read_opt(v, "epochs", m.inverse.epochs, "inverse.epochs");
    read_opt(v, "batch_size", m.inverse.batch_size, "inverse.batch_size");
    read_opt(v, "lr", m.inverse.lr, "inverse.lr");
    read_opt(v, "lr_decay", m.inverse.lr_decay, "inverse.lr_decay");
  }
  read_opt(j, "alias_autoencoder_forward", m.alias_autoencoder_forward, "alias_autoencoder_forward");
  read_opt(j, "max_parallel_jobs", m.max_parallel_jobs, "max_parallel_jobs");

  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    read_opt(o, "record_store", m.record_store, "outputs.record_store");
    read_opt(o, "split_digests", m.split_digests, "outputs.split_digests");
    read_opt(o, "records", m.produced_records, "outputs.records");
    if (o.contains("checkpoints")) {
      for (const auto& [k, v] : o["checkpoints"].items()) {
        m.checkpoints[std::stoi(k)] = {v.at("path").get<std::string>(), v.at("digest").get<std::string>()};
      }
    }
    if (o.contains("normalization")) {
      data::Normalization n;
      n.mean = o["normalization"].at("mean").get<std::array<float, 3>>();
      n.stddev = o["normalization"].at("std").get<std::array<float, 3>>();
      m.normalization = n;
    }
  }
  return m;
}

RunManifest load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest", std::string("invalid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

void save_manifest(const RunManifest& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, to_json(m).dump(2) + "\n");
}

fs::path checkpoint_path(const fs::path& run_dir, int epoch) { return run_dir / "checkpoints" / checkpoint_name(epoch); }

fs::path inverse_decoder_path(const fs::path& run_dir, int epoch, Tap tap) {
  return run_dir / "decoders" / fmt::format("inverse_e{:04d}_{}.pcnn", epoch, to_string(tap));
}

data::SplitDataset prepare_split(const RunManifest& m) {
  data::Dataset source;
  if (m.data.kind == "shapes") {
    source = data::generate_shapes_dataset(m.data.shapes, derive_seed(m.seed, "data"));
  } else {
    source = data::load_image_folder(m.data.folder);
    for (const auto& it : source.items) {
      if (it.image.width != m.encoder.input_size || it.image.height != m.encoder.input_size) {
        throw DataError(fmt::format("image size {}x{} does not match encoder.input_size {}", it.image.width,
                                    it.image.height, m.encoder.input_size));
      }
    }
    if (source.num_classes() != m.encoder.num_classes) {
      throw ConfigError("encoder.num_classes", fmt::format("data has {} classes", source.num_classes()));
    }
  }
  return data::three_way_split(source, derive_seed(m.seed, "split"));
}

namespace {

enum class Family { kForward, kProbe, kInverse };

struct Job {
  int epoch;
  Tap tap;
  Family family;
  std::vector<mi::EstimatorKind> estimators;  // records this job emits
  std::vector<Tap> aliases;                   // taps that receive a copy of the records
};

std::string job_name(const Job& j) {
  static const char* names[] = {"forward", "probe", "inverse"};
  return fmt::format("e{:04d}_{}_{}", j.epoch, to_string(j.tap), names[static_cast<int>(j.family)]);
}

void write_loss_csv(const fs::path& path, const std::vector<std::pair<int, double>>& rows) {
  fs::create_directories(path.parent_path());
  std::ostringstream s;
  s << "epoch,loss\n";
  for (const auto& [e, l] : rows) s << e << ',' << fmt::format("{:.9g}", l) << '\n';
  write_file_atomic(path, s.str());
}

json summary_json(const mi::LikelihoodSummary& s) {
  return {{"mean", s.mean}, {"std_error", s.std_error}, {"budget", s.budget}, {"per_example", s.per_example}};
}

mi::LikelihoodSummary summary_from_json(const json& j) {
  mi::LikelihoodSummary s;
  s.mean = j.at("mean").get<double>();
  s.std_error = j.at("std_error").get<double>();
  s.budget = j.at("budget").get<int>();
  s.per_example = j.at("per_example").get<std::vector<double>>();
  return s;
}

struct Context {
  const RunManifest& m;
  const fs::path& dir;
  const data::SplitDataset& split;
  const data::Normalization& norm;
  const mi::LikelihoodSummary* baseline;
};

pixelcnn::InverseTrainOptions inverse_options(const RunManifest& m, std::uint64_t seed) {
  pixelcnn::InverseTrainOptions o;
  o.epochs = m.inverse.epochs;
  o.batch_size = m.inverse.batch_size;
  o.lr = m.inverse.lr;
  o.lr_decay = m.inverse.lr_decay;
  o.shuffle_seed = seed;
  return o;
}

std::vector<mi::MIRecord> run_job(const Context& ctx, const Job& job) {
  const RunManifest& m = ctx.m;
  const std::string name = job_name(job);
  const std::uint64_t seed = derive_seed(m.seed, name);
  auto source = std::make_shared<const Encoder>(load_encoder(checkpoint_path(ctx.dir, job.epoch), &m.encoder));
  std::vector<mi::MIRecord> out;
  auto emit = [&](mi::EstimatorKind kind, double value, int budget, double err) {
    mi::MIRecord r;
    r.epoch = job.epoch;
    r.tap = to_string(job.tap);
    r.direction = mi::direction_of(kind);
    r.estimator = kind;
    r.value_nats = value;
    r.decoder_budget = budget;
    r.uncertainty = err;
    out.push_back(r);
  };

  if (job.family == Family::kForward) {
    forward::ForwardDecoder dec(source, job.tap, derive_seed(seed, "init"));
    forward::ForwardTrainOptions opt;
    opt.schedule.epochs = m.forward.epochs;
    opt.schedule.batch_size = m.forward.batch_size;
    opt.schedule.lr0 = m.forward.lr0;
    opt.schedule.momentum = m.forward.momentum;
    opt.schedule.weight_decay = m.forward.weight_decay;
    opt.shuffle_seed = derive_seed(seed, "shuffle");
    const auto res = forward::train_forward_decoder(dec, ctx.split.decoding, ctx.split.evaluation, ctx.norm, opt);
    std::vector<std::pair<int, double>> rows;
    for (const auto& l : res.logs) rows.emplace_back(l.epoch, l.loss);
    write_loss_csv(ctx.dir / "logs" / (name + ".csv"), rows);
    const double v = mi::forward_mi_nats(res.evaluation.mean_nll, ctx.split.evaluation.class_prior());
    emit(mi::EstimatorKind::kForwardDecoder, v, res.evaluation.budget, res.evaluation.std_error);
  } else if (job.family == Family::kProbe) {
    forward::ProbeOptions po;
    po.epochs = m.probe.epochs;
    po.batch_size = m.probe.batch_size;
    po.lr0 = m.probe.lr0;
    po.seed = seed;
    const auto ev = forward::linear_probe(*source, job.tap, ctx.split.decoding, ctx.split.evaluation, ctx.norm, po);
    const double v = mi::forward_mi_nats(ev.mean_nll, ctx.split.evaluation.class_prior());
    emit(mi::EstimatorKind::kProbe, v, ev.budget, ev.std_error);
  } else {
    const Tensor h_dec = compute_tap(*source, job.tap, ctx.split.decoding, ctx.norm);
    const Tensor h_eval = compute_tap(*source, job.tap, ctx.split.evaluation, ctx.norm);
    pixelcnn::ConditionalPixelCNN model(m.inverse.pixelcnn, tap_shape(m.encoder, job.tap), derive_seed(seed, "init"));
    const auto res = pixelcnn::train_inverse_decoder(model, ctx.split.decoding, &h_dec, ctx.split.evaluation, &h_eval,
                                                     inverse_options(m, derive_seed(seed, "shuffle")));
    std::vector<std::pair<int, double>> rows;
    for (std::size_t i = 0; i < res.epoch_losses.size(); ++i) rows.emplace_back(static_cast<int>(i) + 1, res.epoch_losses[i]);
    write_loss_csv(ctx.dir / "logs" / (name + ".csv"), rows);
    fs::create_directories(inverse_decoder_path(ctx.dir, job.epoch, job.tap).parent_path());
    save_pixelcnn(model, inverse_decoder_path(ctx.dir, job.epoch, job.tap));
    for (auto kind : job.estimators) {
      if (kind == mi::EstimatorKind::kInverseRelative) {
        emit(kind, mi::inverse_mi_relative(res.evaluation.mean), res.evaluation.budget, res.evaluation.std_error);
      } else {
        const mi::Estimate est = mi::inverse_mi_baselined(res.evaluation, *ctx.baseline);
        emit(kind, est.value, res.evaluation.budget, est.std_error);
      }
    }
  }

  std::vector<mi::MIRecord> copies;
  for (Tap alias : job.aliases) {
    for (mi::MIRecord r : out) {
      r.tap = to_string(alias);
      copies.push_back(r);
    }
  }
  out.insert(out.end(), copies.begin(), copies.end());
  return out;
}

}  // namespace

PreparedRun prepare_run(RunManifest& manifest, const fs::path& run_dir, const Logger& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  manifest.validate();
  fs::create_directories(run_dir);
  const fs::path manifest_path = run_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    RunManifest existing = load_manifest(manifest_path);
    if (existing.config_digest() != manifest.config_digest()) {
      throw ConfigError("manifest", "run directory " + run_dir.string() + " holds a different configuration");
    }
    manifest.checkpoints = existing.checkpoints;
    manifest.produced_records = existing.produced_records;
  }
  save_manifest(manifest, manifest_path);

  PreparedRun run{prepare_split(manifest), {}};
  const data::SplitDataset& split = run.split;
  manifest.split_digests = {{"encoding", split.encoding_digest},
                            {"decoding", split.decoding_digest},
                            {"evaluation", split.evaluation_digest}};
  run.normalization = data::compute_normalization(split.encoding);
  const data::Normalization& norm = run.normalization;
  manifest.normalization = norm;
  save_manifest(manifest, manifest_path);
  say(fmt::format("split: {} / {} / {} examples", split.encoding.size(), split.decoding.size(), split.evaluation.size()));

  // Encoder checkpoints. Training is deterministic, so a partial set is regenerated in full.
  const std::vector<int> epochs = manifest.resolved_query_epochs();
  bool have_all = true;
  for (int e : epochs) {
    const auto it = manifest.checkpoints.find(e);
    const fs::path p = checkpoint_path(run_dir, e);
    if (it == manifest.checkpoints.end() || !fs::exists(p) || file_digest(p) != it->second.digest) have_all = false;
  }
  if (!have_all) {
    say(fmt::format("training encoder for {} epochs", manifest.schedule.epochs));
    fs::create_directories(run_dir / "checkpoints");
    Encoder enc(manifest.encoder, derive_seed(manifest.seed, "encoder"));
    EncoderTrainOptions opt;
    opt.checkpoint_epochs = epochs;
    opt.checkpoint_dir = run_dir / "checkpoints";
    opt.shuffle_seed = derive_seed(manifest.seed, "encoder.shuffle");
    opt.on_epoch = [&](const EpochLog& l) {
      say(fmt::format("encoder epoch {} lr {:.4g} loss {:.4f} acc {:.3f}", l.epoch, l.lr, l.loss, l.accuracy));
    };
    const auto logs = train_encoder(enc, split.encoding, norm, manifest.schedule, opt);
    std::ostringstream s;
    s << "epoch,lr,loss,accuracy\n";
    for (const auto& l : logs) s << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", l.epoch, l.lr, l.loss, l.accuracy);
    fs::create_directories(run_dir / "logs");
    write_file_atomic(run_dir / "logs" / "encoder.csv", s.str());
    manifest.checkpoints.clear();
    for (int e : epochs) {
      const fs::path p = checkpoint_path(run_dir, e);
      manifest.checkpoints[e] = {fs::relative(p, run_dir).generic_string(), file_digest(p)};
    }
    save_manifest(manifest, manifest_path);
  } else {
    say("encoder checkpoints present; skipping encoder training");
  }
  return run;
}

RunReport run_tracking(RunManifest& manifest, const fs::path& run_dir, const Logger& log, const JobFilter& filter) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const PreparedRun run = prepare_run(manifest, run_dir, log);
  const data::SplitDataset& split = run.split;
  const data::Normalization& norm = run.normalization;
  const fs::path manifest_path = run_dir / "manifest.json";
  std::vector<int> epochs = manifest.resolved_query_epochs();
  for (std::size_t i = 0; i < filter.epochs.size(); ++i) {
    if (std::find(epochs.begin(), epochs.end(), filter.epochs[i]) == epochs.end()) {
      throw ConfigError(fmt::format("epochs[{}]", i), fmt::format("epoch {} has no checkpoint in this run", filter.epochs[i]));
    }
  }
  if (!filter.epochs.empty()) epochs = filter.epochs;
  const std::vector<Tap> taps = filter.taps.empty() ? manifest.taps : filter.taps;
  const std::vector<mi::EstimatorKind> estimators = filter.estimators.empty() ? manifest.estimators : filter.estimators;
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    if (estimators[i] == mi::EstimatorKind::kExactOracle) {
      throw ConfigError(fmt::format("estimators[{}]", i), "exact_oracle applies to synthetic data only");
    }
  }
  for (Tap t : taps) {
    try {
      (void)pixelcnn::adapter_case(tap_shape(manifest.encoder, t), manifest.inverse.pixelcnn.image_size);
    } catch (const ShapeError& e) {
      throw ConfigError("taps", e.what());
    }
  }

  mi::RecordStore store(run_dir / manifest.record_store);
  store.load();

  auto wants = [&](mi::EstimatorKind k) {
    return std::find(estimators.begin(), estimators.end(), k) != estimators.end();
  };
  auto has = [&](int epoch, Tap tap, mi::EstimatorKind k) {
    mi::MIRecord r;
    r.epoch = epoch;
    r.tap = to_string(tap);
    r.estimator = k;
    return store.contains(r.key());
  };
  auto has_tap = [&](Tap t) { return std::find(taps.begin(), taps.end(), t) != taps.end(); };

  RunReport report;
  std::vector<Job> jobs;
  const bool alias = manifest.alias_autoencoder_forward && manifest.encoder.mode == EncoderMode::kAutoencoder &&
                     has_tap(Tap::kH3) && has_tap(Tap::kH4);
  for (int e : epochs) {
    for (Tap t : taps) {
      for (auto [kind, fam] : {std::pair{mi::EstimatorKind::kForwardDecoder, Family::kForward},
                               std::pair{mi::EstimatorKind::kProbe, Family::kProbe}}) {
        if (!wants(kind)) continue;
        if (alias && t == Tap::kH4) continue;  // copied from the h3 job
        Job j{e, t, fam, {kind}, {}};
        if (alias && t == Tap::kH3) j.aliases.push_back(Tap::kH4);
        const bool done = has(e, t, kind) && (j.aliases.empty() || has(e, Tap::kH4, kind));
        if (done) {
          report.skipped += 1;
          continue;
        }
        jobs.push_back(j);
      }
      Job inv{e, t, Family::kInverse, {}, {}};
      for (auto kind : {mi::EstimatorKind::kInverseRelative, mi::EstimatorKind::kInverseBaselined}) {
        if (!wants(kind)) continue;
        if (has(e, t, kind)) {
          report.skipped += 1;
        } else {
          inv.estimators.push_back(kind);
        }
      }
      if (!inv.estimators.empty()) jobs.push_back(inv);
    }
  }

  // Unconditional baseline, shared by all baselined inverse records.
  std::optional<mi::LikelihoodSummary> baseline;
  const bool need_baseline = std::any_of(jobs.begin(), jobs.end(), [](const Job& j) {
    return std::find(j.estimators.begin(), j.estimators.end(), mi::EstimatorKind::kInverseBaselined) !=
           j.estimators.end();
  });
  if (need_baseline) {
    const fs::path bpath = run_dir / "baseline.json";
    if (fs::exists(bpath)) {
      baseline = summary_from_json(json::parse(read_file(bpath)));
      if (baseline->budget != manifest.inverse.epochs) baseline.reset();
    }
    if (!baseline) {
      say("training unconditional baseline");
      pixelcnn::ConditionalPixelCNN model(manifest.inverse.pixelcnn, std::nullopt,
                                          derive_seed(manifest.seed, "baseline.init"));
      try {
        const auto res = pixelcnn::train_inverse_decoder(model, split.decoding, nullptr, split.evaluation, nullptr,
                                                         inverse_options(manifest, derive_seed(manifest.seed, "baseline.shuffle")));
        baseline = res.evaluation;
        write_file_atomic(bpath, summary_json(*baseline).dump() + "\n");
        fs::create_directories(run_dir / "decoders");
        save_pixelcnn(model, run_dir / "decoders" / "baseline.pcnn");
      } catch (const Error& e) {
        report.failed += 1;
        report.failures.push_back(std::string("baseline: ") + e.what());
        say(report.failures.back());
        for (auto& j : jobs) {
          std::erase(j.estimators, mi::EstimatorKind::kInverseBaselined);
        }
        std::erase_if(jobs, [](const Job& j) { return j.family == Family::kInverse && j.estimators.empty(); });
      }
    }
  }

  const Context ctx{manifest, run_dir, split, norm, baseline ? &*baseline : nullptr};
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        const auto records = run_job(ctx, job);
        std::lock_guard lock(mu);
        for (const auto& r : records) {
          if (store.append(r)) manifest.produced_records.push_back(r.key());
          say(fmt::format("{} {} {} = {:.4f} nats (+/- {:.4f})", r.epoch, r.tap, mi::to_string(r.estimator),
                          r.value_nats, r.uncertainty));
        }
        report.completed += 1;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        report.failed += 1;
        report.failures.push_back(job_name(job) + ": " + e.what());
        say("job failed: " + report.failures.back());
      }
    }
  };
  const int threads = std::min<int>(manifest.max_parallel_jobs, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  save_manifest(manifest, manifest_path);
  say(fmt::format("jobs: {} completed, {} skipped, {} failed", report.completed, report.skipped, report.failed));
  return report;
}

}  // namespace infoplane::experiment
