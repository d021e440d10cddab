// Copyright 2026 The bevmap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "bevmap/datagen.hpp"
#include "bevmap/dataset.hpp"
#include "bevmap/eval.hpp"
#include "bevmap/filter.hpp"
#include "bevmap/geometry.hpp"
#include "bevmap/gridmap.hpp"
#include "bevmap/models.hpp"
#include "cli.hpp"
#include "test_util.hpp"

namespace bevmap {
namespace {

namespace fs = std::filesystem;

std::vector<std::optional<BBox>> wrap(const std::vector<BBox>& boxes) {
  return {boxes.begin(), boxes.end()};
}

TEST(Pipeline, LibraryEndToEnd) {
  const auto dir = testing::scratch_dir("pipeline_lib");
  SceneConfig scene;
  scene.rng_seed = 21;
  scene.noise.box_jitter_px = 1.0;
  scene.noise.absurd_size_prob = 0.1;
  save_dataset(dir / "raw.jsonl", to_dataset(scene, generate_frames(scene, 120)));

  // Dirty records are screened out before fitting.
  const Dataset raw = load_dataset(dir / "raw.jsonl").dataset;
  RuleSet rules;
  rules.min_birdeye_area = 150;
  rules.box_in_frame = true;
  const FilterResult filtered = filter_dataset(raw.records, rules, raw.header);
  ASSERT_GT(filtered.kept.size(), 300u);
  EXPECT_GT(filtered.report[Rule::area], 0u);
  EXPECT_EQ(filtered.kept.size() + filtered.rejected.size(), raw.records.size());
  for (const auto& r : filtered.kept) EXPECT_GE(r.birdeye_box.area(), 150.0);

  SceneConfig test_scene = scene;
  test_scene.rng_seed = 22;
  test_scene.noise = {};
  const Dataset test = to_dataset(test_scene, generate_frames(test_scene, 30));
  const std::span<const DetectionRecord> train(filtered.kept);

  save_homography(dir / "h.json", fit_homography(train));
  save_grid(dir / "g.csv", fit_grid(train, GridSpec{}));
  const Homography h = load_homography(dir / "h.json");
  const GridModel g = load_grid(dir / "g.csv");

  FeatureConfig fc;
  fc.feature_dim = 16;
  fc.seed = 3;
  const FeatureProvider fp(fc);
  nn::Hyper hyper;
  hyper.max_epochs = 30;
  hyper.batch_size = 32;
  hyper.rng_seed = 4;
  nn::NetworkSpec sdpn_spec;
  sdpn_spec.coord_dim = 4;
  sdpn_spec.side_dim = 16;
  sdpn_spec.encoder = {{4, 32, nn::Activation::relu, 0}};
  sdpn_spec.decoder = {{48, 64, nn::Activation::relu, 0}, {64, 4, nn::Activation::tanh, 0}};
  nn::NetworkSpec mlp_spec;
  mlp_spec.decoder = {{4, 64, nn::Activation::relu, 0}, {64, 64, nn::Activation::relu, 0},
                      {64, 4, nn::Activation::tanh, 0}};
  const auto split = train.size() / 10;
  const TrainedModel mlp = train_model(ModelKind::mlp, mlp_spec, train.subspan(split),
                                       train.first(split), raw.header, hyper, nullptr);
  const TrainedModel sdpn = train_model(ModelKind::sdpn, sdpn_spec, train.subspan(split),
                                        train.first(split), raw.header, hyper, &fp);
  save_learned_model(dir / "sdpn.bevnet", sdpn.model);
  const LearnedModel sdpn_back = load_learned_model(dir / "sdpn.bevnet");

  MetricReport report;
  report.edges = default_bucket_edges();
  std::vector<std::optional<BBox>> hp, gp, truth;
  for (const auto& r : test.records) {
    hp.emplace_back(homography_predict(h, r.frontal_box));
    gp.emplace_back(grid_predict(g, r.frontal_box));
    truth.emplace_back(r.birdeye_box);
  }
  report.models.push_back(evaluate_predictions("oracle", test.records, truth, report.edges));
  report.models.push_back(evaluate_predictions("homography", test.records, hp, report.edges));
  report.models.push_back(evaluate_predictions("grid", test.records, gp, report.edges));
  report.models.push_back(evaluate_predictions(
      "mlp", test.records, wrap(predict(mlp.model, test.records, nullptr)), report.edges));
  report.models.push_back(evaluate_predictions(
      "sdpn", test.records, wrap(predict(sdpn_back, test.records, &fp)), report.edges));
  // The reloaded model predicts exactly like the trained one.
  EXPECT_EQ(predict(sdpn_back, test.records, &fp), predict(sdpn.model, test.records, &fp));

  EXPECT_EQ(report.models[0].mean_iou, 1.0);
  for (const auto& m : report.models) {
    EXPECT_EQ(m.count, test.records.size()) << m.name;
    EXPECT_GE(m.mean_iou, 0.0);
    EXPECT_LE(m.mean_iou, 1.0);
    EXPECT_GE(m.mean_cd, 0.0);
    std::size_t in_buckets = 0;
    for (const auto& b : m.buckets) in_buckets += b.count;
    EXPECT_EQ(in_buckets, m.count) << m.name;
  }
  // Every learned or fitted model lands somewhere near the truth.
  for (std::size_t i = 1; i < report.models.size(); ++i)
    EXPECT_GT(report.models[i].mean_iou, 0.05) << report.models[i].name;

  emit_report(report, dir / "report");
  const std::string csv = testing::slurp(dir / "report" / "metrics.csv");
  for (const char* name : {"oracle", "homography", "grid", "mlp", "sdpn"})
    EXPECT_NE(csv.find(std::string("\n") + name + ","), std::string::npos) << name;
}

std::vector<std::string> pipeline_files() {
  return {"data/dataset.jsonl",   "data/filtered.jsonl",     "data/rejections.csv",
          "m/homography.json",    "m/grid.csv",              "m/mlp.bevnet",
          "m/sdpn.bevnet",        "m/mlp_loss_history.csv", "pred/predictions.jsonl",
          "report/metrics.csv",   "report/iou_by_distance.csv", "report/iou_by_distance.svg"};
}

void run_cli_pipeline(const fs::path& root) {
  const std::string d = root.string();
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) {
    ASSERT_EQ(cli::run(args, out, err), cli::kExitOk) << err.str();
  };
  run({"generate", "--frames", "40", "--seed", "9", "--jitter", "1", "--absurd-prob", "0.05",
       "--out", d + "/data"});
  run({"filter", "--dataset", d + "/data/dataset.jsonl", "--min-birdeye-area", "150", "--out",
       d + "/data"});
  const std::string train = d + "/data/filtered.jsonl";
  run({"fit", "--kind", "homography", "--train", train, "--out", d + "/m"});
  run({"fit", "--kind", "grid", "--train", train, "--out", d + "/m"});
  for (const char* kind : {"mlp", "sdpn"})
    run({"train", "--kind", kind, "--train", train, "--epochs", "2", "--feature-dim", "8",
         "--seed", "9", "--out", d + "/m"});
  run({"predict", "--model", d + "/m/sdpn.bevnet", "--dataset", train, "--out", d + "/pred"});
  run({"compare", "--dataset", train, "--model", d + "/m/homography.json", "--model",
       d + "/m/grid.csv", "--model", d + "/m/mlp.bevnet", "--model", d + "/m/sdpn.bevnet",
       "--grid-sample", "--seed", "9", "--out", d + "/report"});
}

TEST(Pipeline, CliRunsAreByteIdentical) {
  const auto a = testing::scratch_dir("pipeline_cli_a");
  const auto b = testing::scratch_dir("pipeline_cli_b");
  run_cli_pipeline(a);
  run_cli_pipeline(b);
  for (const auto& f : pipeline_files()) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(testing::slurp(a / f), testing::slurp(b / f)) << f;
  }
}

}  // namespace
}  // namespace bevmap
