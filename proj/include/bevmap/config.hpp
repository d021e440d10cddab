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

#ifndef BEVMAP_CONFIG_HPP
#define BEVMAP_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "bevmap/datagen.hpp"
#include "bevmap/filter.hpp"
#include "bevmap/gridmap.hpp"
#include "bevmap/models.hpp"
#include "bevmap/neuralnet.hpp"

namespace bevmap {

/// Options of the train subcommand that are not network hyperparameters.
struct TrainOptions {
  double val_fraction = 0.1;  // held out from the training file when no validation file is given
  double dropout_p = kDropout;
  Precision precision = Precision::float64;
};

/// Everything the pipeline can be configured with. Config files are JSON
/// objects with the sections below; any subset of keys may be given and
/// the rest keep their defaults. Unknown keys are rejected.
struct RunConfig {
  SceneConfig scene;
  RuleSet rules;
  nn::Hyper hyper;
  int grid_cell_px = 10;
  FeatureConfig features;
  TrainOptions train;
  std::vector<double> bucket_edges = {5, 10, 15, 20, 25, 30};
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const SceneConfig& cfg);
nlohmann::ordered_json to_json(const RuleSet& rules);
nlohmann::ordered_json to_json(const nn::Hyper& hyper);
nlohmann::ordered_json to_json(const FeatureConfig& features);

}  // namespace bevmap

#endif  // BEVMAP_CONFIG_HPP
