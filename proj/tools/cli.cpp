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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bevmap/config.hpp"
#include "bevmap/datagen.hpp"
#include "bevmap/dataset.hpp"
#include "bevmap/errors.hpp"
#include "bevmap/eval.hpp"
#include "bevmap/filter.hpp"
#include "bevmap/geometry.hpp"
#include "bevmap/gridmap.hpp"
#include "bevmap/models.hpp"

namespace bevmap::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

/// Raised for malformed input data; maps to exit status 2.
class DataError : public Error {
 public:
  using Error::Error;
};

void set_path(ojson& root, const std::string& dotted, ojson value) {
  ojson* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty()) throw ConfigError("--set: empty key segment in '" + dotted + "'");
    if (!node->is_object()) *node = ojson::object();
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

/// Options shared by every subcommand plus the config overrides its flags
/// produce. Flags are bound to dotted config keys so that a flag and the
/// matching config-file entry are interchangeable.
struct Command {
  CLI::App* app = nullptr;
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> sets;
  std::vector<std::function<void(ojson&)>> overrides;

  template <typename T>
  CLI::Option* bind(const std::string& flag, const std::string& key, T init,
                    const std::string& help) {
    auto value = std::make_shared<T>(std::move(init));
    CLI::Option* opt = app->add_option(flag, *value, help + " [" + key + "]");
    opt->capture_default_str();
    overrides.push_back([opt, value, key](ojson& patch) {
      if (opt->count() > 0) set_path(patch, key, ojson(*value));
    });
    return opt;
  }

  /// Rules that are disabled unless given.
  template <typename T>
  CLI::Option* bind_off(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help + " (default: off) [" + key + "]");
    overrides.push_back([opt, value, key](ojson& patch) {
      if (opt->count() > 0) set_path(patch, key, ojson(*value));
    });
    return opt;
  }

  CLI::Option* bind_flag(const std::string& flag, const std::string& key, const std::string& help) {
    const std::string text = help + " [" + key + "]";
    CLI::Option* opt = app->add_flag(flag, text);
    overrides.push_back([opt, key](ojson& patch) {
      if (opt->count() > 0) set_path(patch, key, true);
    });
    return opt;
  }

  CLI::Option* seed_opt = nullptr;

  void add_common() {
    seed_opt = app->add_option("--seed", seed,
                               "Seed for every random stream of this run (overrides the seeds in "
                               "the config)")
                   ->capture_default_str();
    app->add_option("--config", config_path, "JSON config file merged over built-in defaults")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out_dir, "Output directory (created if absent)")
        ->capture_default_str();
    app->add_option("--set", sets, "Override any config key, e.g. --set scene.noise.box_jitter_px=2");
  }

  /// File, then --set, then dedicated flags, then --seed.
  RunConfig resolve() const {
    ojson patch = ojson::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config '" + config_path + "'");
      try {
        patch = ojson::parse(in);
      } catch (const ojson::parse_error& e) {
        throw ConfigError("config '" + config_path + "': " + e.what());
      }
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      const std::string text = s.substr(eq + 1);
      ojson value;
      try {
        value = ojson::parse(text);
      } catch (const ojson::parse_error&) {
        value = text;
      }
      set_path(patch, s.substr(0, eq), std::move(value));
    }
    for (const auto& apply : overrides) apply(patch);
    if (seed_opt->count() > 0) {
      set_path(patch, "scene.rng_seed", seed);
      set_path(patch, "hyper.rng_seed", seed);
      set_path(patch, "features.seed", seed);
    }
    return run_config_from_json(patch);
  }
};

fs::path prepare_out(const Command& cmd) {
  const fs::path dir(cmd.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void echo_config(const fs::path& dir, const std::string& name, const RunConfig& cfg,
                 const ojson& params) {
  ojson doc;
  doc["subcommand"] = name;
  doc["params"] = params;
  doc["config"] = to_json(cfg);
  write_text(dir / (name + ".config.json"), doc.dump(2) + "\n");
}

DatasetFile read_input(const fs::path& path, std::ostream& err, bool tolerate_bad_lines) {
  if (!fs::exists(path)) throw IoError("input file '" + path.string() + "' does not exist");
  DatasetFile file = load_dataset(path);
  for (const auto& issue : file.issues)
    err << path.string() << ":" << issue.line << ": " << issue.message << "\n";
  if (!file.issues.empty() && !tolerate_bad_lines)
    throw DataError(path.string() + ": " + std::to_string(file.issues.size()) +
                    " malformed record line(s)");
  return file;
}

// ---------------------------------------------------------------------------
// Models loaded from disk

struct AnyModel {
  std::string name;
  std::variant<Homography, GridModel, LearnedModel> model;
  std::optional<FeatureProvider> features;
};

std::string sniff_first_line(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  return line;
}

AnyModel load_any_model(const fs::path& path, const std::string& feature_override) {
  if (!fs::exists(path)) throw IoError("model file '" + path.string() + "' does not exist");
  const std::string first = sniff_first_line(path);
  AnyModel m;
  if (first.rfind(kLearnedModelMagic, 0) == 0) {
    LearnedModel learned = load_learned_model(path);
    m.name = std::string(to_string(learned.kind));
    if (learned.features) {
      FeatureConfig fc = *learned.features;
      if (!feature_override.empty()) {
        fc.mode = FeatureConfig::Mode::file;
        fc.path = feature_override;
      }
      m.features.emplace(fc);
    }
    m.model = std::move(learned);
  } else if (first.rfind("# bevmap grid", 0) == 0) {
    m.name = "grid";
    m.model = load_grid(path);
  } else if (!first.empty() && first.front() == '{') {
    m.name = "homography";
    m.model = load_homography(path);
  } else {
    throw DataError("unrecognized model file '" + path.string() + "'");
  }
  return m;
}

void check_dims(const AnyModel& m, const DatasetHeader& header, const fs::path& path) {
  auto mismatch = [&](const DatasetHeader& expected) {
    if (!(expected == header))
      throw DataError("model '" + path.string() + "' expects frames " +
                      std::to_string(expected.frontal_dims.width) + "x" +
                      std::to_string(expected.frontal_dims.height) + " / " +
                      std::to_string(expected.birdeye_dims.width) + "x" +
                      std::to_string(expected.birdeye_dims.height) +
                      " but the dataset header differs");
  };
  if (const auto* g = std::get_if<GridModel>(&m.model)) mismatch({g->spec.frontal, g->spec.birdeye});
  if (const auto* l = std::get_if<LearnedModel>(&m.model)) mismatch(l->dims);
}

struct PredictOptions {
  bool grid_sample = false;
  std::uint64_t seed = 0;
};

std::vector<std::optional<BBox>> run_model(const AnyModel& m, std::span<const DetectionRecord> recs,
                                           const PredictOptions& opts) {
  std::vector<std::optional<BBox>> out;
  out.reserve(recs.size());
  if (const auto* h = std::get_if<Homography>(&m.model)) {
    for (const auto& r : recs) {
      try {
        out.emplace_back(homography_predict(*h, r.frontal_box));
      } catch (const PointAtInfinityError&) {
        out.emplace_back(std::nullopt);
      }
    }
  } else if (const auto* g = std::get_if<GridModel>(&m.model)) {
    std::mt19937_64 rng(opts.seed);
    for (const auto& r : recs)
      out.emplace_back(opts.grid_sample ? grid_predict(*g, r.frontal_box, rng)
                                        : grid_predict(*g, r.frontal_box));
  } else {
    const auto& l = std::get<LearnedModel>(m.model);
    for (auto& b : predict(l, recs, m.features ? &*m.features : nullptr)) out.emplace_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const Command& cmd, int frames, std::ostream& out) {
  const RunConfig cfg = cmd.resolve();
  if (frames <= 0) throw ConfigError("--frames must be positive");
  const fs::path dir = prepare_out(cmd);
  const auto generated = generate_frames(cfg.scene, frames);
  const Dataset data = to_dataset(cfg.scene, generated);
  save_dataset(dir / "dataset.jsonl", data);
  echo_config(dir, "generate", cfg, {{"frames", frames}});
  out << "wrote " << data.records.size() << " records from " << frames << " frames to "
      << (dir / "dataset.jsonl").string() << "\n";
  return kExitOk;
}

int cmd_filter(const Command& cmd, const std::string& input, std::ostream& out,
               std::ostream& err) {
  const RunConfig cfg = cmd.resolve();
  validate(cfg.rules);
  const DatasetFile file = read_input(input, err, /*tolerate_bad_lines=*/true);
  const fs::path dir = prepare_out(cmd);
  FilterResult result = filter_dataset(file.dataset.records, cfg.rules, file.dataset.header);
  result.report.parse_errors = file.issues.size();
  save_dataset(dir / "filtered.jsonl", {file.dataset.header, result.kept});
  std::ostringstream csv;
  write_rejection_report(csv, result.report);
  write_text(dir / "rejections.csv", csv.str());
  echo_config(dir, "filter", cfg, {{"dataset", input}});
  out << "kept " << result.kept.size() << ", rejected " << result.rejected.size()
      << ", malformed lines " << file.issues.size() << "\n";
  return file.issues.empty() ? kExitOk : kExitData;
}

int cmd_fit(const Command& cmd, const std::string& kind_text, const std::string& input,
            std::ostream& out, std::ostream& err) {
  const RunConfig cfg = cmd.resolve();
  const ModelKind kind = parse_model_kind(kind_text);
  if (kind != ModelKind::homography && kind != ModelKind::grid)
    throw ConfigError("fit handles homography and grid; use 'train' for " + kind_text);
  const DatasetFile file = read_input(input, err, false);
  const fs::path dir = prepare_out(cmd);
  fs::path artifact;
  if (kind == ModelKind::homography) {
    const Homography h = fit_homography(file.dataset.records);
    artifact = dir / "homography.json";
    save_homography(artifact, h);
  } else {
    GridSpec spec{cfg.grid_cell_px, file.dataset.header.frontal_dims,
                  file.dataset.header.birdeye_dims};
    const GridModel g = fit_grid(file.dataset.records, spec);
    artifact = dir / "grid.csv";
    save_grid(artifact, g);
  }
  echo_config(dir, "fit", cfg, {{"kind", kind_text}, {"train", input}});
  out << "wrote " << artifact.string() << "\n";
  return kExitOk;
}

int cmd_train(const Command& cmd, const std::string& kind_text, const std::string& input,
              const std::string& val_input, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = cmd.resolve();
  const ModelKind kind = parse_model_kind(kind_text);
  if (kind != ModelKind::mlp && kind != ModelKind::sdpn)
    throw ConfigError("train handles mlp and sdpn; use 'fit' for " + kind_text);
  nn::validate(cfg.hyper);
  const DatasetFile file = read_input(input, err, false);
  std::vector<DetectionRecord> train_recs = file.dataset.records;
  std::vector<DetectionRecord> val_recs;
  if (!val_input.empty()) {
    const DatasetFile vf = read_input(val_input, err, false);
    if (!(vf.dataset.header == file.dataset.header))
      throw DataError("validation file frame dimensions differ from the training file");
    val_recs = vf.dataset.records;
  } else {
    if (!(cfg.train.val_fraction > 0 && cfg.train.val_fraction < 1))
      throw ConfigError("train.val_fraction must lie in (0, 1) when no --val file is given");
    ValidationSplit split = split_validation(train_recs, cfg.train.val_fraction, cfg.hyper.rng_seed);
    train_recs = std::move(split.train);
    val_recs = std::move(split.val);
  }
  std::optional<FeatureProvider> features;
  if (kind == ModelKind::sdpn) features.emplace(cfg.features);
  const nn::NetworkSpec sdpn = build_sdpn(cfg.features.feature_dim, cfg.train.dropout_p);
  const nn::NetworkSpec spec =
      kind == ModelKind::sdpn ? sdpn
                              : build_mlp_baseline(sdpn.parameter_count(), cfg.train.dropout_p);
  const fs::path dir = prepare_out(cmd);
  std::ostringstream history;
  history << "epoch,train_loss,val_loss\n";
  auto log = [&](const nn::EpochStats& s) {
    err << "epoch " << s.epoch << " train " << s.train_loss << " val " << s.val_loss << std::endl;
    history << s.epoch << "," << format_double(s.train_loss) << "," << format_double(s.val_loss)
            << "\n";
  };
  const fs::path history_path = dir / (kind_text + "_loss_history.csv");
  TrainedModel trained;
  try {
    trained = train_model(kind, spec, train_recs, val_recs, file.dataset.header, cfg.hyper,
                          features ? &*features : nullptr, cfg.train.precision, log);
  } catch (const nn::TrainingDivergedError&) {
    write_text(history_path, history.str());
    throw;
  }
  write_text(history_path, history.str());
  const fs::path artifact = dir / (kind_text + ".bevnet");
  save_learned_model(artifact, trained.model);
  echo_config(dir, "train", cfg,
              {{"kind", kind_text},
               {"train", input},
               {"val", val_input},
               {"parameters", spec.parameter_count()},
               {"best_epoch", trained.best_epoch}});
  out << "trained " << kind_text << " (" << spec.parameter_count() << " parameters, "
      << trained.history.size() << " epochs, best " << trained.best_epoch << ") -> "
      << artifact.string() << "\n";
  return kExitOk;
}

int cmd_predict(const Command& cmd, const std::string& model_path, const std::string& input,
                const std::string& feature_file, const PredictOptions& popts_in, std::ostream& out,
                std::ostream& err) {
  const RunConfig cfg = cmd.resolve();
  const DatasetFile file = read_input(input, err, false);
  const AnyModel m = load_any_model(model_path, feature_file);
  check_dims(m, file.dataset.header, model_path);
  PredictOptions popts = popts_in;
  popts.seed = cfg.hyper.rng_seed;
  const auto preds = run_model(m, file.dataset.records, popts);
  const fs::path dir = prepare_out(cmd);
  save_predictions(dir / "predictions.jsonl", file.dataset, preds);
  echo_config(dir, "predict", cfg,
              {{"model", model_path}, {"dataset", input}, {"grid_sample", popts.grid_sample}});
  out << "wrote " << preds.size() << " predictions from " << m.name << "\n";
  return kExitOk;
}

int cmd_report(const Command& cmd, const std::string& name, const std::vector<std::string>& models,
               const std::vector<std::string>& names, const std::string& predictions,
               const std::string& input, const std::string& feature_file,
               const PredictOptions& popts_in, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = cmd.resolve();
  const std::size_t sources = predictions.empty() ? models.size() : 1;
  if (!names.empty() && names.size() != sources)
    throw ConfigError("--name must be given once per --model");
  MetricReport report;
  report.edges = cfg.bucket_edges;
  ojson params = {{"models", models}, {"names", names}};
  if (!predictions.empty()) {
    if (!models.empty()) throw ConfigError("give either --predictions or --model, not both");
    if (!input.empty()) throw ConfigError("--dataset is only used with --model");
    const DatasetFile file = read_input(predictions, err, false);
    const std::string label = names.empty() ? fs::path(predictions).stem().string() : names[0];
    report.models.push_back(
        evaluate_predictions(label, file.dataset.records, file.predictions, report.edges));
    params["predictions"] = predictions;
  } else {
    if (models.empty()) throw ConfigError("need --predictions, or --model with --dataset");
    if (input.empty()) throw ConfigError("--dataset is required with --model");
    const DatasetFile file = read_input(input, err, false);
    PredictOptions popts = popts_in;
    popts.seed = cfg.hyper.rng_seed;
    std::vector<std::string> used;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const AnyModel m = load_any_model(models[i], feature_file);
      check_dims(m, file.dataset.header, models[i]);
      std::string label = names.empty() ? m.name : names[i];
      if (std::find(used.begin(), used.end(), label) != used.end())
        label = fs::path(models[i]).stem().string() + "_" + std::to_string(i);
      used.push_back(label);
      const auto preds = run_model(m, file.dataset.records, popts);
      report.models.push_back(
          evaluate_predictions(label, file.dataset.records, preds, report.edges));
    }
    params["dataset"] = input;
  }
  const fs::path dir = prepare_out(cmd);
  emit_report(report, dir);
  echo_config(dir, name, cfg, params);
  out << format_metrics_csv(report);
  return kExitOk;
}

constexpr const char* kDescription =
    "Frontal-to-bird's-eye bounding box mapping: synthetic data, filtering, "
    "four models and evaluation";

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app(kDescription, "bevmap");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto make = [&](const std::string& name, const std::string& desc) {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, desc);
    cmd->add_common();
    return cmd;
  };
  const RunConfig defaults;

  // generate
  auto gen = make("generate", "Render synthetic frames into a dataset file (dataset.jsonl)");
  int frames = 1000;
  gen->app->add_option("--frames", frames, "Number of frames to render")->capture_default_str();
  gen->bind("--vehicles-min", "scene.vehicles_min", defaults.scene.vehicles_min,
            "Fewest vehicles per frame");
  gen->bind("--vehicles-max", "scene.vehicles_max", defaults.scene.vehicles_max,
            "Most vehicles per frame");
  gen->bind("--distance-min", "scene.distance_min_m", defaults.scene.distance_min_m,
            "Nearest vehicle distance (m)");
  gen->bind("--distance-max", "scene.distance_max_m", defaults.scene.distance_max_m,
            "Farthest vehicle distance (m)");
  gen->bind("--jitter", "scene.noise.box_jitter_px", defaults.scene.noise.box_jitter_px,
            "Gaussian box jitter sigma (px)");
  gen->bind("--drop-prob", "scene.noise.drop_one_view_prob",
            defaults.scene.noise.drop_one_view_prob, "Probability of losing one view");
  gen->bind("--absurd-prob", "scene.noise.absurd_size_prob", defaults.scene.noise.absurd_size_prob,
            "Probability of an absurd-size bird's-eye box");
  gen->bind("--models-per-class", "scene.models_per_class", defaults.scene.models_per_class,
            "Distinct vehicle models per class");
  gen->bind("--model-jitter", "scene.model_extent_jitter", defaults.scene.model_extent_jitter,
            "Relative per-model extent spread");
  gen->bind("--yaw-concentration", "scene.yaw.concentration", defaults.scene.yaw.concentration,
            "von Mises concentration of yaw modes");
  gen->bind("--camera-height", "scene.frontal_camera.height_m",
            defaults.scene.frontal_camera.height_m, "Frontal camera height (m)");
  gen->bind("--camera-pitch", "scene.frontal_camera.pitch_deg",
            defaults.scene.frontal_camera.pitch_deg, "Frontal camera downward pitch (deg)");
  gen->bind("--birdeye-scale", "scene.birdeye_camera.scale_px_per_m",
            defaults.scene.birdeye_camera.scale_px_per_m, "Bird's-eye scale (px/m)");
  gen->bind_flag("--occlusion", "scene.occlusion_culling", "Cull mostly hidden vehicles");

  // filter
  auto fil = make("filter", "Apply the rule set (filtered.jsonl, rejections.csv)");
  std::string filter_input;
  fil->app->add_option("--dataset", filter_input, "Input dataset file")->required();
  fil->bind_off<double>("--distance-min", "rules.distance_min_m", "Reject records nearer than this (m)");
  fil->bind_off<double>("--distance-max", "rules.distance_max_m", "Reject records farther than this (m)");
  fil->bind_flag("--box-in-frame", "rules.box_in_frame", "Require both boxes inside their frames");
  fil->bind_off<double>("--min-frontal-area", "rules.min_frontal_area", "Minimum frontal box area (px^2)");
  fil->bind_off<double>("--min-birdeye-area", "rules.min_birdeye_area",
            "Minimum bird's-eye box area (px^2)");
  fil->bind_off<double>("--frontal-aspect-min", "rules.frontal_aspect_min", "Minimum frontal width/height");
  fil->bind_off<double>("--frontal-aspect-max", "rules.frontal_aspect_max", "Maximum frontal width/height");
  fil->bind_off<double>("--birdeye-aspect-min", "rules.birdeye_aspect_min",
            "Minimum bird's-eye width/height");
  fil->bind_off<double>("--birdeye-aspect-max", "rules.birdeye_aspect_max",
            "Maximum bird's-eye width/height");
  fil->bind_off<std::vector<std::string>>("--class", "rules.class_allowlist",
            "Keep only these classes (repeatable)");
  fil->bind_off<std::vector<std::int64_t>>("--allow-model", "rules.model_allowlist",
            "Keep only these model ids (repeatable)");
  fil->bind_off<std::vector<std::int64_t>>("--deny-model", "rules.model_denylist",
            "Drop these model ids (repeatable)");
  fil->bind_flag("--yaw-valid", "rules.yaw_valid", "Require yaw in [0, 360)");

  // fit
  auto fit = make("fit", "Fit a homography (homography.json) or grid model (grid.csv)");
  std::string fit_kind, fit_input;
  fit->app->add_option("--kind", fit_kind, "Model kind")
      ->required()
      ->check(CLI::IsMember({"homography", "grid"}));
  fit->app->add_option("--train", fit_input, "Training dataset file")->required();
  fit->bind("--cell-px", "grid.cell_px", defaults.grid_cell_px, "Grid cell size (px)");

  // train
  auto tr = make("train", "Train an MLP or SDPN (<kind>.bevnet, <kind>_loss_history.csv)");
  std::string train_kind, train_input, train_val;
  tr->app->add_option("--kind", train_kind, "Model kind")
      ->required()
      ->check(CLI::IsMember({"mlp", "sdpn"}));
  tr->app->add_option("--train", train_input, "Training dataset file")->required();
  tr->app->add_option("--val", train_val,
                      "Validation dataset file (default: hold out train.val_fraction)");
  tr->bind("--epochs", "hyper.max_epochs", defaults.hyper.max_epochs, "Maximum epochs");
  tr->bind("--batch-size", "hyper.batch_size", defaults.hyper.batch_size, "Minibatch size");
  tr->bind("--lr", "hyper.lr", defaults.hyper.lr, "Adam learning rate");
  tr->bind("--patience", "hyper.patience", defaults.hyper.patience,
           "Epochs without validation improvement before stopping");
  tr->bind("--dropout", "train.dropout_p", defaults.train.dropout_p, "Dropout probability");
  tr->bind("--precision", "train.precision", std::string("float64"),
           "Training arithmetic; models are stored as float64")
      ->check(CLI::IsMember({"float32", "float64"}));
  tr->bind("--val-fraction", "train.val_fraction", defaults.train.val_fraction,
           "Held-out fraction when --val is absent");
  tr->bind("--feature-dim", "features.feature_dim", defaults.features.feature_dim,
           "Appearance feature length (also sizes the MLP)");
  tr->bind("--feature-mode", "features.mode", std::string("synthetic"),
           "Appearance features: synthetic or file")
      ->check(CLI::IsMember({"synthetic", "file"}));
  tr->bind("--feature-file", "features.path", std::string(), "Feature file for file mode");
  tr->bind("--feature-perturbation", "features.perturbation", defaults.features.perturbation,
           "Per-model spread of synthetic features");

  // predict
  auto pr = make("predict", "Run a model artifact over a dataset (predictions.jsonl)");
  std::string pred_model, pred_input, pred_features;
  PredictOptions popts;
  pr->app->add_option("--model", pred_model, "Model artifact")->required();
  pr->app->add_option("--dataset", pred_input, "Dataset file")->required();
  pr->app->add_option("--feature-file", pred_features,
                      "Feature file replacing the one recorded in an SDPN artifact");
  pr->app->add_flag("--grid-sample", popts.grid_sample,
                    "Sample grid cells instead of taking the argmax (seeded by --seed)");

  // eval and compare
  std::vector<std::string> eval_models, eval_names, cmp_models, cmp_names;
  std::string eval_preds, eval_input, cmp_input, eval_features, cmp_features;
  PredictOptions eval_popts, cmp_popts;
  auto ev = make("eval",
                 "Score stored predictions or one model (metrics.csv, iou_by_distance.csv/.svg)");
  ev->app->add_option("--predictions", eval_preds, "Predictions file");
  ev->app->add_option("--model", eval_models, "Model artifact (alternative to --predictions)")
      ->expected(0, 1);
  ev->app->add_option("--dataset", eval_input, "Dataset file used with --model");
  ev->app->add_option("--name", eval_names, "Label used in the report")->expected(0, 1);
  ev->app->add_option("--feature-file", eval_features, "Feature file override for SDPN");
  ev->app->add_flag("--grid-sample", eval_popts.grid_sample, "Sample grid cells");
  ev->bind("--buckets", "eval.bucket_edges", defaults.bucket_edges, "Distance bucket edges (m)")
      ->delimiter(',');

  auto cmp = make("compare", "Score several model artifacts on one dataset into a joint report");
  cmp->app->add_option("--model", cmp_models, "Model artifact (repeatable)")->required();
  cmp->app->add_option("--dataset", cmp_input, "Dataset file")->required();
  cmp->app->add_option("--name", cmp_names, "Report label per --model (repeatable)");
  cmp->app->add_option("--feature-file", cmp_features, "Feature file override for SDPN");
  cmp->app->add_flag("--grid-sample", cmp_popts.grid_sample, "Sample grid cells");
  cmp->bind("--buckets", "eval.bucket_edges", defaults.bucket_edges, "Distance bucket edges (m)")
      ->delimiter(',');

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->app->parsed()) return cmd_generate(*gen, frames, out);
    if (fil->app->parsed()) return cmd_filter(*fil, filter_input, out, err);
    if (fit->app->parsed()) return cmd_fit(*fit, fit_kind, fit_input, out, err);
    if (tr->app->parsed()) return cmd_train(*tr, train_kind, train_input, train_val, out, err);
    if (pr->app->parsed())
      return cmd_predict(*pr, pred_model, pred_input, pred_features, popts, out, err);
    if (ev->app->parsed())
      return cmd_report(*ev, "eval", eval_models, eval_names, eval_preds, eval_input,
                        eval_features, eval_popts, out, err);
    if (cmp->app->parsed())
      return cmd_report(*cmp, "compare", cmp_models, cmp_names, "", cmp_input, cmp_features,
                        cmp_popts, out, err);
  } catch (const ConfigError& e) {
    err << "bevmap: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "bevmap: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "bevmap: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace bevmap::cli
