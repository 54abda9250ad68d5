// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace infoplane::mi {

// Joint counts (or probabilities) over an enumerable pair of discrete spaces, row-major
// [rows x cols].
struct JointHistogram {
  int rows = 0;
  int cols = 0;
  std::vector<double> counts;

  JointHistogram() = default;
  JointHistogram(int r, int c) : rows(r), cols(c), counts(static_cast<std::size_t>(r) * c, 0.0) {}
  static JointHistogram from_matrix(const std::vector<std::vector<double>>& m);

  double& at(int r, int c) { return counts[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return counts[static_cast<std::size_t>(r) * cols + c]; }
  double total() const;
  JointHistogram transposed() const;
  std::vector<double> row_marginal() const;
  std::vector<double> col_marginal() const;
};

// Shannon entropy in nats of a (possibly unnormalized) distribution; 0 ln 0 = 0.
double entropy(std::span<const double> p);

// I(a; b) = sum p(a,b) ln[p(a,b) / (p(a) p(b))].
double exact_mi_discrete(const JointHistogram& hist);

// Standard error of the mean.
double standard_error(std::span<const double> values);

// Forward-direction bound H(y) - E[-log q(y|h)].
double forward_mi_nats(double mean_nll, std::span<const double> class_prior);

// E[log q(x|h)]; meaningful only up to the constant E[log p(x)].
double inverse_mi_relative(double mean_cond_ll);

// Evaluation-set log-likelihood summary of one decoder.
struct LikelihoodSummary {
  double mean = 0.0;
  double std_error = 0.0;
  int budget = 0;
  std::vector<double> per_example;  // optional; enables paired uncertainty
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  bool negative = false;  // conditional decoder underperformed the baseline
};

// E[log q(x|h)] - E[log q(x)]. Budgets must match. Uses the paired standard error when both
// summaries carry aligned per-example values.
Estimate inverse_mi_baselined(const LikelihoodSummary& conditional, const LikelihoodSummary& unconditional);

enum class Direction { kForward, kInverse };
enum class EstimatorKind { kForwardDecoder, kProbe, kInverseRelative, kInverseBaselined, kExactOracle };

std::string to_string(Direction d);
std::string to_string(EstimatorKind e);
Direction parse_direction(const std::string& s);
EstimatorKind parse_estimator(const std::string& s);
Direction direction_of(EstimatorKind e);

struct MIRecord {
  int epoch = 0;
  std::string tap;
  Direction direction = Direction::kForward;
  EstimatorKind estimator = EstimatorKind::kForwardDecoder;
  double value_nats = 0.0;
  int decoder_budget = 0;
  double uncertainty = 0.0;

  std::string key() const;
};

// Delta_c = max over the series of value - value at the final (largest) epoch.
double compression_delta(std::span<const MIRecord> series);

// Append-only CSV store, unique on (epoch, tap, estimator).
class RecordStore {
 public:
  static constexpr const char* kSchemaLine = "# infoplane.records schema=1";
  static constexpr const char* kHeader = "epoch,tap,direction,estimator,value_nats,budget,stderr";

  explicit RecordStore(std::filesystem::path path);

  // Loads existing rows; a missing file is an empty store.
  void load();
  // Returns false (and writes nothing) when the key is already present.
  bool append(const MIRecord& record);
  bool contains(const std::string& key) const;
  std::optional<MIRecord> find(const std::string& key) const;
  const std::vector<MIRecord>& records() const { return records_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<MIRecord> records_;
};

// Parse a store without a writer.
std::vector<MIRecord> read_records(const std::filesystem::path& path);

}  // namespace infoplane::mi
