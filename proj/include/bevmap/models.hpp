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

#ifndef BEVMAP_MODELS_HPP
#define BEVMAP_MODELS_HPP

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bevmap/core_types.hpp"
#include "bevmap/dataset.hpp"
#include "bevmap/neuralnet.hpp"

namespace bevmap {

enum class ModelKind { homography, grid, mlp, sdpn };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

// ---------------------------------------------------------------------------
// Appearance features

/// Deterministic unit vector standing in for the embedding of a class.
Eigen::VectorXd class_prototype(ClassLabel label, std::uint64_t seed, int dim);

/// Class prototype plus a per-model Gaussian offset of expected norm
/// `perturbation`.
Eigen::VectorXd synth_feature(std::int64_t model_id, ClassLabel label, std::uint64_t seed, int dim,
                              double perturbation = 0.1);

struct FeatureConfig {
  enum class Mode { synthetic, file };
  Mode mode = Mode::synthetic;
  int feature_dim = 2048;
  std::uint64_t seed = 0;
  double perturbation = 0.1;
  std::filesystem::path path;  // file mode only
};

/// Supplies one appearance vector per record, either synthesized or looked
/// up by record key in a feature file.
class FeatureProvider {
 public:
  explicit FeatureProvider(FeatureConfig config);

  const FeatureConfig& config() const { return config_; }
  int dim() const { return config_.feature_dim; }

  /// None when file mode has no vector for the record.
  std::optional<Eigen::VectorXd> feature(const DetectionRecord& r) const;

 private:
  FeatureConfig config_;
  std::unordered_map<std::string, Eigen::VectorXf> table_;
};

/// Binary feature file: "BEVF", u32 feature_dim, u64 count, then per record
/// u32 key length, key bytes, feature_dim little-endian float32 values.
void write_feature_file(const std::filesystem::path& path, int feature_dim,
                        const std::vector<std::pair<std::string, Eigen::VectorXf>>& entries);
std::unordered_map<std::string, Eigen::VectorXf> read_feature_file(
    const std::filesystem::path& path, int* feature_dim = nullptr);

// ---------------------------------------------------------------------------
// Architectures

inline constexpr int kCoordDim = 4;
inline constexpr int kEncodingDim = 256;
inline constexpr double kDropout = 0.25;
inline constexpr int kMlpDepth = 6;

/// Coordinate encoder (256, 256, 256) ReLU, concatenation with the feature
/// vector, decoder (1024, 1024, 512, 256, 128, 4) ReLU with a tanh head.
/// Dropout after every hidden layer.
nn::NetworkSpec build_sdpn(int feature_dim, double dropout_p = kDropout);

/// Coordinates-only baseline 4 -> 6 x width -> 4 (tanh head) whose width is
/// chosen so the parameter count is within 5% of `reference_param_count`.
/// Throws ConfigError when no width reaches that tolerance.
nn::NetworkSpec build_mlp_baseline(std::size_t reference_param_count, double dropout_p = kDropout);

// ---------------------------------------------------------------------------
// Learned models

struct LearnedModel {
  ModelKind kind = ModelKind::mlp;
  nn::NetworkSpec spec;
  nn::NetworkState<double> state;
  DatasetHeader dims;
  std::optional<FeatureConfig> features;  // SDPN only
};

/// Inputs: normalized frontal boxes (and features for SDPN). Targets:
/// normalized bird's-eye boxes. Throws MissingInputError naming the record
/// when a feature is unavailable.
nn::TrainingData<double> make_training_data(ModelKind kind, std::span<const DetectionRecord> records,
                                            const DatasetHeader& header,
                                            const FeatureProvider* features);

struct ValidationSplit {
  std::vector<DetectionRecord> train;
  std::vector<DetectionRecord> val;
};

/// Seeded shuffle that holds out floor(fraction * n) records for
/// validation. Throws ConfigError unless fraction lies in (0, 1) and
/// InsufficientDataError when either side would be empty.
ValidationSplit split_validation(std::span<const DetectionRecord> records, double fraction,
                                 std::uint64_t seed);

/// Arithmetic used while training; the stored model is always float64.
enum class Precision { float32, float64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

struct TrainedModel {
  LearnedModel model;
  std::vector<nn::EpochStats> history;
  int best_epoch = 0;
};

TrainedModel train_model(ModelKind kind, const nn::NetworkSpec& spec,
                         std::span<const DetectionRecord> train_records,
                         std::span<const DetectionRecord> val_records, const DatasetHeader& header,
                         const nn::Hyper& hyper, const FeatureProvider* features,
                         Precision precision = Precision::float64,
                         const std::function<void(const nn::EpochStats&)>& on_epoch = {});

/// Pixel-space bird's-eye boxes, corner-ordered. SDPN requires `features`.
std::vector<BBox> predict(const LearnedModel& model, std::span<const DetectionRecord> records,
                          const FeatureProvider* features);
BBox predict(const LearnedModel& model, const DetectionRecord& record,
             const FeatureProvider* features);

/// Text header (kind, frame sizes, feature source) followed by the network
/// tensor container.
void write_learned_model(std::ostream& out, const LearnedModel& model);
LearnedModel read_learned_model(std::istream& in);
void save_learned_model(const std::filesystem::path& path, const LearnedModel& model);
LearnedModel load_learned_model(const std::filesystem::path& path);

inline constexpr const char* kLearnedModelMagic = "bevmap-model 1";

}  // namespace bevmap

#endif  // BEVMAP_MODELS_HPP
