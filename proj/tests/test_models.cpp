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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bevmap/datagen.hpp"
#include "bevmap/errors.hpp"
#include "bevmap/eval.hpp"
#include "bevmap/models.hpp"
#include "test_util.hpp"

namespace bevmap {
namespace {

using nn::Activation;

// Independent per-layer arithmetic for the fusion network.
std::size_t sdpn_param_oracle(std::size_t feature_dim) {
  const std::size_t enc[] = {4, 256, 256, 256};
  const std::size_t dec[] = {256 + feature_dim, 1024, 1024, 512, 256, 128, 4};
  std::size_t n = 0;
  for (int i = 0; i < 3; ++i) n += enc[i] * enc[i + 1] + enc[i + 1];
  for (int i = 0; i < 6; ++i) n += dec[i] * dec[i + 1] + dec[i + 1];
  return n;
}

TEST(BuildSdpn, Shape) {
  const nn::NetworkSpec s = build_sdpn(2048);
  EXPECT_EQ(s.coord_dim, 4);
  EXPECT_EQ(s.side_dim, 2048);
  ASSERT_EQ(s.encoder.size(), 3u);
  ASSERT_EQ(s.decoder.size(), 6u);
  EXPECT_EQ(s.decoder.front().in_dim, 2304);
  EXPECT_EQ(s.decoder.back().out_dim, 4);
  EXPECT_EQ(s.parameter_count(), sdpn_param_oracle(2048));
  EXPECT_EQ(build_sdpn(64).parameter_count(), sdpn_param_oracle(64));
}

TEST(BuildSdpn, ActivationsAndDropout) {
  const nn::NetworkSpec s = build_sdpn(32, 0.25);
  std::vector<nn::LayerSpec> all = s.encoder;
  all.insert(all.end(), s.decoder.begin(), s.decoder.end());
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    EXPECT_EQ(all[i].activation, Activation::relu) << i;
    EXPECT_DOUBLE_EQ(all[i].dropout_p, 0.25) << i;
  }
  EXPECT_EQ(all.back().activation, Activation::tanh);
  EXPECT_DOUBLE_EQ(all.back().dropout_p, 0.0);
}

TEST(BuildMlp, MatchesReferenceWithinFivePercent) {
  for (int dim : {16, 64, 2048}) {
    const std::size_t ref = build_sdpn(dim).parameter_count();
    const nn::NetworkSpec m = build_mlp_baseline(ref);
    EXPECT_EQ(m.coord_dim, 4);
    EXPECT_EQ(m.side_dim, 0);
    EXPECT_TRUE(m.encoder.empty());
    ASSERT_EQ(m.decoder.size(), 7u);
    EXPECT_EQ(m.decoder.front().in_dim, 4);
    EXPECT_EQ(m.decoder.back().out_dim, 4);
    EXPECT_EQ(m.decoder.back().activation, Activation::tanh);
    for (std::size_t i = 0; i + 1 < m.decoder.size(); ++i)
      EXPECT_EQ(m.decoder[i].out_dim, m.decoder.front().out_dim);
    const double n = double(m.parameter_count());
    EXPECT_LE(std::abs(n - double(ref)), 0.05 * double(ref)) << dim;
    EXPECT_EQ(build_mlp_baseline(ref), m);
  }
}

TEST(BuildMlp, UnsatisfiableReference) {
  EXPECT_THROW(build_mlp_baseline(0), ConfigError);
  EXPECT_THROW(build_mlp_baseline(1), ConfigError);
}

TEST(Features, Deterministic) {
  const auto a = synth_feature(301, ClassLabel::bus, 7, 128);
  const auto b = synth_feature(301, ClassLabel::bus, 7, 128);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, synth_feature(302, ClassLabel::bus, 7, 128));
  EXPECT_NE(a, synth_feature(301, ClassLabel::bus, 8, 128));
  EXPECT_NEAR(class_prototype(ClassLabel::van, 3, 256).norm(), 1.0, 1e-12);
}

TEST(Features, ZeroPerturbationIsPrototype) {
  EXPECT_EQ(synth_feature(5, ClassLabel::truck, 9, 64, 0.0),
            class_prototype(ClassLabel::truck, 9, 64));
}

TEST(Features, ClassesNearlyOrthogonal) {
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = class_prototype(ClassLabel::car, seed, 2048);
    const auto b = class_prototype(ClassLabel::truck, seed, 2048);
    sum += std::abs(a.dot(b)) / (a.norm() * b.norm());
  }
  EXPECT_LT(sum / 100, 0.2);
}

TEST(Features, PerturbationScale) {
  double sum = 0;
  for (int m = 0; m < 200; ++m)
    sum += (synth_feature(m, ClassLabel::car, 1, 512, 0.3) - class_prototype(ClassLabel::car, 1, 512))
               .norm();
  EXPECT_NEAR(sum / 200, 0.3, 0.03);
}

TEST(Features, FileRoundTrip) {
  const auto dir = testing::scratch_dir("models_features");
  std::vector<std::pair<std::string, Eigen::VectorXf>> entries;
  entries.emplace_back("f0/1", Eigen::VectorXf::LinSpaced(8, -1, 1));
  entries.emplace_back("f3/22", Eigen::VectorXf::Constant(8, 0.5f));
  write_feature_file(dir / "feat.bin", 8, entries);
  int dim = 0;
  const auto table = read_feature_file(dir / "feat.bin", &dim);
  EXPECT_EQ(dim, 8);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.at("f0/1"), entries[0].second);
  EXPECT_EQ(table.at("f3/22"), entries[1].second);

  FeatureConfig cfg;
  cfg.mode = FeatureConfig::Mode::file;
  cfg.path = dir / "feat.bin";
  const FeatureProvider provider(cfg);
  EXPECT_EQ(provider.dim(), 8);
  DetectionRecord r;
  r.frame_id = "f3";
  r.entity_id = 22;
  ASSERT_TRUE(provider.feature(r));
  EXPECT_EQ(*provider.feature(r), entries[1].second.cast<double>());
  r.entity_id = 23;
  EXPECT_FALSE(provider.feature(r));
}

TEST(Features, CorruptFileRejected) {
  const auto dir = testing::scratch_dir("models_corrupt");
  std::ofstream(dir / "bad.bin") << "XXXX";
  EXPECT_THROW(read_feature_file(dir / "bad.bin"), Error);
  EXPECT_THROW(read_feature_file(dir / "missing.bin"), Error);
}

LearnedModel fresh_model(ModelKind kind, int feature_dim, std::uint64_t seed) {
  LearnedModel m;
  m.kind = kind;
  m.spec = kind == ModelKind::sdpn ? build_sdpn(feature_dim)
                                   : build_mlp_baseline(build_sdpn(feature_dim).parameter_count());
  m.state = nn::init_state<double>(m.spec, seed);
  if (kind == ModelKind::sdpn) m.features = FeatureConfig{FeatureConfig::Mode::synthetic, feature_dim, 4, 0.1, {}};
  return m;
}

TEST(Predict, ZeroHeadGivesFrameCenter) {
  LearnedModel m = fresh_model(ModelKind::mlp, 16, 1);
  m.state.layers.back().w.setZero();
  m.state.layers.back().b.setZero();
  std::mt19937_64 rng(3);
  const BBox b = predict(m, testing::random_record(rng, 0), nullptr);
  EXPECT_DOUBLE_EQ(b.x_min, 960);
  EXPECT_DOUBLE_EQ(b.x_max, 960);
  EXPECT_DOUBLE_EQ(b.y_min, 540);
  EXPECT_DOUBLE_EQ(b.y_max, 540);
  EXPECT_EQ(b.view, View::birdeye);
}

TEST(Predict, OutputsInsideFrameAndOrdered) {
  std::mt19937_64 rng(5);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 300; ++i) records.push_back(testing::random_record(rng, i));
  for (ModelKind kind : {ModelKind::mlp, ModelKind::sdpn}) {
    const LearnedModel m = fresh_model(kind, 16, 9);
    const FeatureProvider fp(*fresh_model(ModelKind::sdpn, 16, 9).features);
    for (const BBox& b : predict(m, records, kind == ModelKind::sdpn ? &fp : nullptr)) {
      EXPECT_TRUE(b.is_ordered());
      EXPECT_GT(b.x_min, 0);
      EXPECT_GT(b.y_min, 0);
      EXPECT_LT(b.x_max, 1920);
      EXPECT_LT(b.y_max, 1080);
    }
  }
}

TEST(Predict, ConstantFeaturesIgnoreModelId) {
  const auto dir = testing::scratch_dir("models_constant");
  std::mt19937_64 rng(11);
  DetectionRecord a = testing::random_record(rng, 0), b = a;
  b.entity_id = 99;
  b.model_id = 401;
  b.class_label = ClassLabel::motorbike;
  const Eigen::VectorXf c = Eigen::VectorXf::Constant(16, 0.25f);
  write_feature_file(dir / "const.bin", 16, {{a.key(), c}, {b.key(), c}});
  FeatureConfig cfg;
  cfg.mode = FeatureConfig::Mode::file;
  cfg.path = dir / "const.bin";
  const FeatureProvider fp(cfg);
  const LearnedModel m = fresh_model(ModelKind::sdpn, 16, 2);
  EXPECT_EQ(predict(m, a, &fp), predict(m, b, &fp));
}

TEST(Predict, MissingFeatureNamesRecord) {
  const auto dir = testing::scratch_dir("models_missing");
  std::mt19937_64 rng(12);
  DetectionRecord r = testing::random_record(rng, 0);
  r.frame_id = "frame_77";
  r.entity_id = 4;
  write_feature_file(dir / "empty.bin", 16, {});
  FeatureConfig cfg;
  cfg.mode = FeatureConfig::Mode::file;
  cfg.path = dir / "empty.bin";
  const FeatureProvider fp(cfg);
  const LearnedModel m = fresh_model(ModelKind::sdpn, 16, 2);
  try {
    predict(m, r, &fp);
    FAIL() << "expected MissingInputError";
  } catch (const MissingInputError& e) {
    EXPECT_NE(std::string(e.what()).find("frame_77/4"), std::string::npos);
  }
  EXPECT_THROW(predict(m, r, nullptr), MissingInputError);
}

TEST(Predict, MlpIsDeterministic) {
  std::mt19937_64 rng(13);
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 10; ++i) records.push_back(testing::random_record(rng, i));
  const LearnedModel m = fresh_model(ModelKind::mlp, 16, 3);
  EXPECT_EQ(predict(m, records, nullptr), predict(m, records, nullptr));
}

TEST(ModelFile, RoundTrip) {
  for (ModelKind kind : {ModelKind::mlp, ModelKind::sdpn}) {
    const LearnedModel m = fresh_model(kind, 8, 21);
    std::stringstream ss;
    write_learned_model(ss, m);
    const LearnedModel back = read_learned_model(ss);
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.spec, m.spec);
    EXPECT_EQ(back.dims, m.dims);
    ASSERT_EQ(back.state.layers.size(), m.state.layers.size());
    for (std::size_t i = 0; i < m.state.layers.size(); ++i) {
      EXPECT_EQ(back.state.layers[i].w, m.state.layers[i].w);
      EXPECT_EQ(back.state.layers[i].b, m.state.layers[i].b);
    }
    EXPECT_EQ(back.features.has_value(), m.features.has_value());
    std::stringstream again;
    write_learned_model(again, back);
    std::stringstream first;
    write_learned_model(first, m);
    EXPECT_EQ(again.str(), first.str());
  }
}

TEST(ModelFile, GarbageRejected) {
  std::stringstream ss("not a model");
  EXPECT_THROW(read_learned_model(ss), Error);
}

TEST(Training, MemorizesNoiseFreeData) {
  SceneConfig scene;
  scene.rng_seed = 17;
  const Dataset ds = to_dataset(scene, generate_frames(scene, 8));
  ASSERT_GE(ds.records.size(), 24u);
  const std::span<const DetectionRecord> recs(ds.records);

  nn::NetworkSpec spec;
  spec.coord_dim = 4;
  spec.decoder = {{4, 64, Activation::relu, 0}, {64, 64, Activation::relu, 0},
                  {64, 4, Activation::tanh, 0}};
  nn::Hyper hyper;
  hyper.lr = 0.003;
  hyper.batch_size = 16;
  hyper.max_epochs = 1500;
  hyper.patience = 1500;
  hyper.rng_seed = 5;
  const TrainedModel tm =
      train_model(ModelKind::mlp, spec, recs, recs, ds.header, hyper, nullptr);
  const auto preds = predict(tm.model, recs, nullptr);
  std::size_t good = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) good += iou(preds[i], recs[i].birdeye_box) > 0.5;
  EXPECT_GE(double(good), 0.9 * double(preds.size())) << good << " of " << preds.size();
}

TEST(Training, DeterministicAndPrecisions) {
  SceneConfig scene;
  scene.rng_seed = 3;
  const Dataset ds = to_dataset(scene, generate_frames(scene, 4));
  const std::span<const DetectionRecord> recs(ds.records);
  nn::NetworkSpec spec = build_sdpn(8);
  spec.encoder = {{4, 16, Activation::relu, 0.25}};
  spec.decoder = {{24, 16, Activation::relu, 0.25}, {16, 4, Activation::tanh, 0}};
  const FeatureProvider fp(FeatureConfig{FeatureConfig::Mode::synthetic, 8, 1, 0.1, {}});
  nn::Hyper hyper;
  hyper.max_epochs = 3;
  hyper.batch_size = 8;
  for (Precision p : {Precision::float64, Precision::float32}) {
    const TrainedModel a = train_model(ModelKind::sdpn, spec, recs, recs, ds.header, hyper, &fp, p);
    const TrainedModel b = train_model(ModelKind::sdpn, spec, recs, recs, ds.header, hyper, &fp, p);
    ASSERT_EQ(a.history.size(), 3u);
    EXPECT_EQ(predict(a.model, recs, &fp), predict(b.model, recs, &fp));
    ASSERT_TRUE(a.model.features);
    EXPECT_EQ(a.model.features->feature_dim, 8);
  }
  EXPECT_THROW(train_model(ModelKind::sdpn, spec, recs, recs, ds.header, hyper, nullptr),
               MissingInputError);
}

TEST(Kinds, TextRoundTrip) {
  for (ModelKind k : {ModelKind::homography, ModelKind::grid, ModelKind::mlp, ModelKind::sdpn})
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_THROW(parse_model_kind("cnn"), ParseError);
  EXPECT_EQ(parse_precision("float32"), Precision::float32);
  EXPECT_THROW(parse_precision("half"), ParseError);
}

}  // namespace
}  // namespace bevmap
