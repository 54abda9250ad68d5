// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "infoplane/core/rng.hpp"
#include "infoplane/errors.hpp"
#include "infoplane/mi.hpp"

using namespace infoplane;
using namespace infoplane::mi;

namespace {

// Independent evaluation of the KL form with explicit normalization.
double brute_force_mi(const std::vector<std::vector<double>>& p) {
  double total = 0;
  for (const auto& row : p)
    for (double v : row) total += v;
  std::vector<double> pa(p.size(), 0.0), pb(p[0].size(), 0.0);
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p[0].size(); ++b) {
      pa[a] += p[a][b] / total;
      pb[b] += p[a][b] / total;
    }
  double mi = 0;
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p[0].size(); ++b) {
      const double q = p[a][b] / total;
      if (q > 0) mi += q * std::log(q / (pa[a] * pb[b]));
    }
  return mi;
}

MIRecord rec(int epoch, double v, int budget = 5) {
  MIRecord r;
  r.epoch = epoch;
  r.tap = "h3";
  r.direction = Direction::kInverse;
  r.estimator = EstimatorKind::kInverseRelative;
  r.value_nats = v;
  r.decoder_budget = budget;
  return r;
}

}  // namespace

TEST_CASE("exact MI reference values") {
  CHECK(exact_mi_discrete(JointHistogram::from_matrix({{1, 1}, {1, 1}})) == doctest::Approx(0.0));
  CHECK(exact_mi_discrete(JointHistogram::from_matrix({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}})) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  const double v = exact_mi_discrete(JointHistogram::from_matrix({{0.4, 0.1}, {0.1, 0.4}}));
  CHECK(std::abs(v - brute_force_mi({{0.4, 0.1}, {0.1, 0.4}})) < 1e-12);
  CHECK(std::abs(v - 0.19274) < 1e-5);
}

TEST_CASE("exact MI properties on random joints") {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int r = 1 + static_cast<int>(rng() % 5), c = 1 + static_cast<int>(rng() % 5);
    JointHistogram h(r, c);
    for (auto& v : h.counts) v = u(rng) < 0.3 ? 0.0 : u(rng);
    if (h.total() == 0) h.at(0, 0) = 1;
    const double mi = exact_mi_discrete(h);
    CHECK(mi >= 0.0);
    CHECK(mi == doctest::Approx(exact_mi_discrete(h.transposed())).epsilon(1e-10));
    CHECK(mi <= std::min(entropy(h.row_marginal()), entropy(h.col_marginal())) + 1e-12);
  }
  // Deterministic h = f(x): I(x; h) = H(h) <= H(x).
  JointHistogram det(6, 3);
  const double px[6] = {0.1, 0.2, 0.05, 0.3, 0.15, 0.2};
  for (int x = 0; x < 6; ++x) det.at(x, x % 3) = px[x];
  CHECK(exact_mi_discrete(det) == doctest::Approx(entropy(det.col_marginal())).epsilon(1e-12));
  CHECK(exact_mi_discrete(det) <= entropy(det.row_marginal()));
  CHECK_THROWS_AS(exact_mi_discrete(JointHistogram(2, 2)), InvalidParameter);
}

TEST_CASE("forward and relative inverse estimates") {
  const std::vector<double> uniform(10, 0.1);
  CHECK(forward_mi_nats(std::log(10.0), uniform) == doctest::Approx(0.0));
  CHECK(forward_mi_nats(0.0, uniform) == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK(forward_mi_nats(1.0, uniform) == doctest::Approx(1.302585).epsilon(1e-6));
  CHECK_THROWS_AS(forward_mi_nats(-0.1, uniform), InvalidParameter);

  CHECK(inverse_mi_relative(-3120.0) - inverse_mi_relative(-3000.0) == doctest::Approx(-120.0));
  CHECK(inverse_mi_relative(-5.0) - inverse_mi_relative(-5.0) == 0.0);
  const double c = 1234.5;
  CHECK(inverse_mi_relative(-3120.0 + c) - inverse_mi_relative(-3000.0 + c) == doctest::Approx(-120.0));
}

TEST_CASE("baselined inverse estimate") {
  LikelihoodSummary cond{-100.0, 1.0, 5, {-99, -101, -100}};
  LikelihoodSummary uncond{-100.0, 1.0, 5, {-99, -101, -100}};
  Estimate e = inverse_mi_baselined(cond, uncond);
  CHECK(e.value == 0.0);
  CHECK(e.std_error == 0.0);
  uncond.mean = -98.0;
  uncond.per_example = {-97, -99, -98};
  e = inverse_mi_baselined(cond, uncond);
  CHECK(e.value == doctest::Approx(-2.0));
  CHECK(e.negative);
  uncond.budget = 6;
  CHECK_THROWS_AS(inverse_mi_baselined(cond, uncond), BudgetMismatch);
}

TEST_CASE("compression delta") {
  const std::vector<MIRecord> s1 = {rec(0, 10), rec(1, 50), rec(2, 30)};
  CHECK(compression_delta(s1) == doctest::Approx(20.0));
  const std::vector<MIRecord> s2 = {rec(0, 1), rec(1, 2), rec(2, 3)};
  CHECK(compression_delta(s2) == 0.0);
  // Order of records does not matter; epochs do.
  const std::vector<MIRecord> s3 = {rec(2, 30), rec(0, 10), rec(1, 50)};
  CHECK(compression_delta(s3) == doctest::Approx(20.0));
  const std::vector<MIRecord> mixed = {rec(0, 10, 5), rec(1, 20, 6)};
  CHECK_THROWS_AS(compression_delta(mixed), BudgetMismatch);
  const std::vector<MIRecord> one = {rec(0, 1)};
  CHECK_THROWS_AS(compression_delta(one), InvalidParameter);
}

TEST_CASE("record store round trip and uniqueness") {
  const auto path = std::filesystem::temp_directory_path() / "infoplane_records_test.csv";
  std::filesystem::remove(path);
  {
    RecordStore store(path);
    store.load();
    CHECK(store.records().empty());
    MIRecord r = rec(10, -1234.5678901234);
    r.uncertainty = 0.125;
    CHECK(store.append(r));
    CHECK_FALSE(store.append(r));
    MIRecord f;
    f.epoch = 10;
    f.tap = "h3";
    f.direction = Direction::kForward;
    f.estimator = EstimatorKind::kForwardDecoder;
    f.value_nats = 1.5;
    f.decoder_budget = 3;
    CHECK(store.append(f));
  }
  RecordStore again(path);
  again.load();
  REQUIRE(again.records().size() == 2);
  CHECK(again.records()[0].value_nats == -1234.5678901234);
  CHECK(again.records()[0].uncertainty == 0.125);
  CHECK(again.contains(rec(10, 0).key()));
  CHECK_FALSE(again.append(rec(10, 7.0)));
  CHECK(read_records(path).size() == 2);

  std::ofstream(path) << "epoch,tap\n1,h1\n";
  CHECK_THROWS_AS(read_records(path), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("estimator names round trip") {
  for (auto e : {EstimatorKind::kForwardDecoder, EstimatorKind::kProbe, EstimatorKind::kInverseRelative,
                 EstimatorKind::kInverseBaselined, EstimatorKind::kExactOracle}) {
    CHECK(parse_estimator(to_string(e)) == e);
  }
  CHECK(direction_of(EstimatorKind::kProbe) == Direction::kForward);
  CHECK(direction_of(EstimatorKind::kInverseBaselined) == Direction::kInverse);
  CHECK_THROWS(parse_estimator("bogus"));
}
