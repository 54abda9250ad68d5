// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/mi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "infoplane/errors.hpp"

namespace infoplane::mi {

JointHistogram JointHistogram::from_matrix(const std::vector<std::vector<double>>& m) {
  if (m.empty() || m.front().empty()) throw InvalidParameter("empty joint matrix");
  JointHistogram h(static_cast<int>(m.size()), static_cast<int>(m.front().size()));
  for (int r = 0; r < h.rows; ++r) {
    if (static_cast<int>(m[r].size()) != h.cols) throw InvalidParameter("ragged joint matrix");
    for (int c = 0; c < h.cols; ++c) h.at(r, c) = m[r][c];
  }
  return h;
}

double JointHistogram::total() const {
  double s = 0;
  for (double v : counts) s += v;
  return s;
}

JointHistogram JointHistogram::transposed() const {
  JointHistogram t(cols, rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
  return t;
}

std::vector<double> JointHistogram::row_marginal() const {
  std::vector<double> m(rows, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m[r] += at(r, c);
  return m;
}

std::vector<double> JointHistogram::col_marginal() const {
  std::vector<double> m(cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m[c] += at(r, c);
  return m;
}

double entropy(std::span<const double> p) {
  double total = 0;
  for (double v : p) {
    if (v < 0) throw InvalidParameter("negative probability mass");
    total += v;
  }
  if (!(total > 0)) throw InvalidParameter("distribution has no mass");
  double h = 0;
  for (double v : p) {
    if (v > 0) h -= (v / total) * std::log(v / total);
  }
  return h;
}

double exact_mi_discrete(const JointHistogram& hist) {
  const double total = hist.total();
  if (!(total > 0)) throw InvalidParameter("joint histogram has no mass");
  for (double v : hist.counts) {
    if (v < 0) throw InvalidParameter("negative joint count");
  }
  const auto pa = hist.row_marginal();
  const auto pb = hist.col_marginal();
  double mi = 0;
  for (int r = 0; r < hist.rows; ++r) {
    for (int c = 0; c < hist.cols; ++c) {
      const double p = hist.at(r, c);
      if (p <= 0) continue;
      mi += (p / total) * std::log(p * total / (pa[r] * pb[c]));
    }
  }
  // Rounding can leave a tiny negative residue for independent joints.
  return std::max(mi, 0.0);
}

double standard_error(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

double forward_mi_nats(double mean_nll, std::span<const double> class_prior) {
  if (mean_nll < 0) throw InvalidParameter("mean negative log-likelihood must be non-negative");
  return entropy(class_prior) - mean_nll;
}

double inverse_mi_relative(double mean_cond_ll) {
  if (!std::isfinite(mean_cond_ll)) throw InvalidParameter("non-finite log-likelihood");
  return mean_cond_ll;
}

Estimate inverse_mi_baselined(const LikelihoodSummary& conditional, const LikelihoodSummary& unconditional) {
  if (conditional.budget != unconditional.budget) {
    throw BudgetMismatch(fmt::format("conditional decoder budget {} differs from unconditional budget {}",
                                     conditional.budget, unconditional.budget));
  }
  Estimate e;
  e.value = conditional.mean - unconditional.mean;
  if (!conditional.per_example.empty() && conditional.per_example.size() == unconditional.per_example.size()) {
    std::vector<double> diff(conditional.per_example.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = conditional.per_example[i] - unconditional.per_example[i];
    e.std_error = standard_error(diff);
  } else {
    e.std_error = std::hypot(conditional.std_error, unconditional.std_error);
  }
  e.negative = e.value < 0;
  return e;
}

std::string to_string(Direction d) { return d == Direction::kForward ? "forward" : "inverse"; }

std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::kForwardDecoder: return "forward_decoder";
    case EstimatorKind::kProbe: return "probe";
    case EstimatorKind::kInverseRelative: return "inverse_relative";
    case EstimatorKind::kInverseBaselined: return "inverse_baselined";
    case EstimatorKind::kExactOracle: return "exact_oracle";
  }
  return "unknown";
}

Direction parse_direction(const std::string& s) {
  if (s == "forward") return Direction::kForward;
  if (s == "inverse") return Direction::kInverse;
  throw InvalidParameter("unknown direction '" + s + "'");
}

EstimatorKind parse_estimator(const std::string& s) {
  static const std::map<std::string, EstimatorKind> kNames = {
      {"forward_decoder", EstimatorKind::kForwardDecoder},
      {"probe", EstimatorKind::kProbe},
      {"inverse_relative", EstimatorKind::kInverseRelative},
      {"inverse_baselined", EstimatorKind::kInverseBaselined},
      {"exact_oracle", EstimatorKind::kExactOracle},
  };
  auto it = kNames.find(s);
  if (it == kNames.end()) throw InvalidParameter("unknown estimator '" + s + "'");
  return it->second;
}

Direction direction_of(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::kForwardDecoder:
    case EstimatorKind::kProbe: return Direction::kForward;
    default: return Direction::kInverse;
  }
}

std::string MIRecord::key() const { return fmt::format("{}|{}|{}", epoch, tap, to_string(estimator)); }

double compression_delta(std::span<const MIRecord> series) {
  if (series.size() < 2) throw InvalidParameter("compression delta needs at least two records");
  for (const auto& r : series) {
    if (r.decoder_budget != series.front().decoder_budget) {
      throw BudgetMismatch("compression delta over mixed decoder budgets");
    }
    if (r.estimator != series.front().estimator || r.tap != series.front().tap) {
      throw InvalidParameter("compression delta series must hold one tap and one estimator");
    }
  }
  const auto last = std::max_element(series.begin(), series.end(),
                                     [](const MIRecord& a, const MIRecord& b) { return a.epoch < b.epoch; });
  double peak = series.front().value_nats;
  for (const auto& r : series) peak = std::max(peak, r.value_nats);
  return peak - last->value_nats;
}

namespace {

std::string format_record(const MIRecord& r) {
  return fmt::format("{},{},{},{},{:.17g},{},{:.17g}", r.epoch, r.tap, to_string(r.direction),
                     to_string(r.estimator), r.value_nats, r.decoder_budget, r.uncertainty);
}

MIRecord parse_record(const std::string& line, const std::filesystem::path& path, int lineno) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 7) throw IoError(fmt::format("{}:{}: expected 7 fields, got {}", path.string(), lineno, f.size()));
  try {
    MIRecord r;
    r.epoch = std::stoi(f[0]);
    r.tap = f[1];
    r.direction = parse_direction(f[2]);
    r.estimator = parse_estimator(f[3]);
    r.value_nats = std::stod(f[4]);
    r.decoder_budget = std::stoi(f[5]);
    r.uncertainty = std::stod(f[6]);
    return r;
  } catch (const std::exception& e) {
    throw IoError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
  }
}

}  // namespace

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {}

void RecordStore::load() { records_ = std::filesystem::exists(path_) ? read_records(path_) : std::vector<MIRecord>{}; }

bool RecordStore::contains(const std::string& key) const { return find(key).has_value(); }

std::optional<MIRecord> RecordStore::find(const std::string& key) const {
  for (const auto& r : records_) {
    if (r.key() == key) return r;
  }
  return std::nullopt;
}

bool RecordStore::append(const MIRecord& record) {
  if (contains(record.key())) return false;
  const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
  if (fresh && path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream os(path_, std::ios::app);
  if (!os) throw IoError("cannot append to " + path_.string());
  if (fresh) os << kSchemaLine << '\n' << kHeader << '\n';
  os << format_record(record) << '\n';
  os.flush();
  if (!os) throw IoError("write failed for " + path_.string());
  records_.push_back(record);
  return true;
}

std::vector<MIRecord> read_records(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open record store " + path.string());
  std::vector<MIRecord> out;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line != RecordStore::kSchemaLine) throw IoError(path.string() + ": unsupported schema line '" + line + "'");
      continue;
    }
    if (!header_seen) {
      if (line != RecordStore::kHeader) throw IoError(path.string() + ": unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    out.push_back(parse_record(line, path, lineno));
  }
  return out;
}

}  // namespace infoplane::mi
