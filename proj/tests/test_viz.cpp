// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <regex>

#include "doctest.h"
#include "infoplane/errors.hpp"
#include "infoplane/experiment.hpp"
#include "infoplane/viz.hpp"

using namespace infoplane;
using namespace infoplane::viz;
namespace fs = std::filesystem;

namespace {

mi::MIRecord rec(int epoch, const std::string& tap, mi::EstimatorKind e, double v, int budget = 10) {
  mi::MIRecord r;
  r.epoch = epoch;
  r.tap = tap;
  r.estimator = e;
  r.direction = mi::direction_of(e);
  r.value_nats = v;
  r.decoder_budget = budget;
  return r;
}

std::vector<mi::MIRecord> sample_records() {
  std::vector<mi::MIRecord> out;
  for (int e : {0, 1, 10}) {
    for (const char* tap : {"h2", "h3"}) {
      out.push_back(rec(e, tap, mi::EstimatorKind::kForwardDecoder, 0.5 + 0.1 * e));
      out.push_back(rec(e, tap, mi::EstimatorKind::kInverseRelative, -900.0 + e));
    }
  }
  return out;
}

// Sum of RGB channels of each circle fill, in document order.
std::vector<int> marker_brightness(const std::string& svg) {
  std::vector<int> out;
  const std::regex re("<circle[^>]*fill=\"#([0-9a-f]{2})([0-9a-f]{2})([0-9a-f]{2})\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back(std::stoi((*it)[1], nullptr, 16) + std::stoi((*it)[2], nullptr, 16) + std::stoi((*it)[3], nullptr, 16));
  }
  return out;
}

}  // namespace

TEST_CASE("info plane is deterministic and labels relative units") {
  const auto recs = sample_records();
  const std::string a = info_plane_svg(recs);
  CHECK(a == info_plane_svg(recs));
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("nats (relative)") != std::string::npos);
  CHECK(a.find("h2") != std::string::npos);
  const auto b = marker_brightness(a);
  REQUIRE(b.size() == 6);
  // Markers run from faint (early) to dark (late) along each trajectory.
  CHECK(b[0] > b[1]);
  CHECK(b[1] > b[2]);
}

TEST_CASE("mixed estimators are refused unless one is selected") {
  auto recs = sample_records();
  recs.push_back(rec(0, "h2", mi::EstimatorKind::kProbe, 0.3));
  CHECK_THROWS_AS(info_plane_svg(recs), InvalidParameter);
  CHECK_THROWS_AS(mi_curves_svg(recs, mi::Direction::kForward), InvalidParameter);
  CHECK_NOTHROW(info_plane_svg(recs, mi::EstimatorKind::kForwardDecoder));
  CHECK_NOTHROW(mi_curves_svg(recs, mi::Direction::kForward, mi::EstimatorKind::kProbe));
  CHECK_THROWS_AS(mi_curves_svg(recs, mi::Direction::kForward, mi::EstimatorKind::kInverseRelative), InvalidParameter);

  const std::string inv = mi_curves_svg(recs, mi::Direction::kInverse);
  CHECK(inv.find("nats (relative)") != std::string::npos);
  recs = sample_records();
  recs.push_back(rec(200, "h2", mi::EstimatorKind::kForwardDecoder, 0.9, 50));
  CHECK_THROWS_AS(mi_curves_svg(recs, mi::Direction::kForward), BudgetMismatch);
  CHECK_THROWS_AS(info_plane_svg({}), InvalidParameter);
}

TEST_CASE("baselined inverse uses plain nats") {
  std::vector<mi::MIRecord> recs;
  for (int e : {0, 5}) {
    recs.push_back(rec(e, "h4", mi::EstimatorKind::kForwardDecoder, 1.0));
    recs.push_back(rec(e, "h4", mi::EstimatorKind::kInverseBaselined, 12.0 - e));
  }
  const std::string svg = info_plane_svg(recs);
  CHECK(svg.find("relative") == std::string::npos);
  CHECK(svg.find("I(x; h) [nats]") != std::string::npos);
}

TEST_CASE("loss curves from csv") {
  const fs::path p = fs::temp_directory_path() / "infoplane_viz_loss.csv";
  {
    std::ofstream o(p);
    o << "epoch,loss\n1,2.5\n2,2.0\n3,1.7\n";
  }
  const Series s = read_loss_csv(p, "enc");
  CHECK(s.x == std::vector<double>{1, 2, 3});
  CHECK(s.y[2] == doctest::Approx(1.7));
  const std::vector<Series> all = {s};
  CHECK(loss_curves_svg(all).find("enc") != std::string::npos);
  {
    std::ofstream o(p);
    o << "epoch,loss\n1,oops\n";
  }
  CHECK_THROWS_AS(read_loss_csv(p, "bad"), DataError);
  fs::remove(p);
  CHECK_THROWS_AS(read_loss_csv(p, "missing"), IoError);
}

TEST_CASE("grid layout places originals first") {
  std::vector<Image> originals(2, Image(4, 4));
  for (auto& v : originals[0].rgb) v = 10;
  for (auto& v : originals[1].rgb) v = 20;
  std::vector<std::vector<Image>> cols(3, std::vector<Image>(2, Image(4, 4)));
  for (auto& v : cols[2][1].rgb) v = 99;
  const Image g = compose_grid(originals, cols, 1);
  CHECK(g.height == 2 * 4 + 3);
  CHECK(g.width == 4 * 4 + 5);
  CHECK(g.at(1, 1, 0) == 10);
  CHECK(g.at(6, 1, 0) == 20);
  CHECK(g.at(6, 1 + 3 * 5, 2) == 99);
  CHECK(g.at(0, 0, 0) == 255);
  cols[0].pop_back();
  CHECK_THROWS_AS(compose_grid(originals, cols), ShapeError);
}

TEST_CASE("sample grid from a tracking run") {
  const fs::path d = fs::temp_directory_path() / "infoplane_viz_run";
  fs::remove_all(d);
  experiment::RunManifest m;
  m.encoder.hyper_layer_channels = {4, 8, 16};
  m.encoder.blocks_per_hyper_layer = 1;
  m.schedule.epochs = 1;
  m.schedule.batch_size = 16;
  m.query_epochs = {0, 1};
  m.taps = {Tap::kH4};
  m.estimators = {mi::EstimatorKind::kInverseRelative};
  m.data.shapes.num_samples = 60;
  m.inverse.pixelcnn.filters = 4;
  m.inverse.pixelcnn.gated_blocks = 1;
  m.inverse.pixelcnn.levels = 1;
  m.inverse.pixelcnn.components = 1;
  m.inverse.epochs = 1;
  REQUIRE(experiment::run_tracking(m, d).exit_code() == 0);
  const Image g = run_sample_grid(d, Tap::kH4, 2, 7);
  CHECK(g.height == 2 * 16 + 3);
  CHECK(g.width == 3 * 16 + 4);
  CHECK(g.rgb == run_sample_grid(d, Tap::kH4, 2, 7).rgb);
  CHECK_THROWS_AS(run_sample_grid(d, Tap::kH2, 2, 7), DataError);
  fs::remove_all(d);
}
